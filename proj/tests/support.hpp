#pragma once

#include <cmath>
#include <vector>

namespace fbmlt::test_support {

/// Fornberg weights for the m-th derivative at 0 on nodes x (long double for headroom).
inline std::vector<long double> fornberg_weights(int m, const std::vector<long double>& x) {
    const int n = static_cast<int>(x.size()) - 1;
    std::vector<std::vector<long double>> c(n + 1, std::vector<long double>(m + 1, 0.0L));
    long double c1 = 1.0L;
    long double c4 = x[0];
    c[0][0] = 1.0L;
    for (int i = 1; i <= n; ++i) {
        const int mn = std::min(i, m);
        long double c2 = 1.0L;
        const long double c5 = c4;
        c4 = x[i];
        for (int j = 0; j < i; ++j) {
            const long double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) {
                    c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) {
                c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<long double> w(n + 1);
    for (int i = 0; i <= n; ++i) {
        w[i] = c[i][m];
    }
    return w;
}

/// He_q(x) from Rodrigues' formula, (-1)^q e^{x^2/2} d^q/dx^q e^{-x^2/2}, with a
/// 25-point central difference stencil.
inline double rodrigues_hermite(int q, double x) {
    constexpr int half = 12;
    constexpr long double h = 0.08L;
    std::vector<long double> offsets;
    for (int i = -half; i <= half; ++i) {
        offsets.push_back(i * h);
    }
    const auto w = fornberg_weights(q, offsets);
    long double d = 0.0L;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        const long double y = x + offsets[i];
        d += w[i] * std::exp(-0.5L * y * y);
    }
    const long double sign = (q % 2 == 0) ? 1.0L : -1.0L;
    return static_cast<double>(sign * std::exp(0.5L * x * x) * d);
}

}  // namespace fbmlt::test_support
