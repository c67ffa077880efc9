#pragma once

#include <functional>
#include <vector>

namespace fbmlt::quad {

struct Result {
    double value = 0.0;
    double error = 0.0;
};

/// Probabilists' Gauss-Hermite rule: sum_i w_i f(x_i) approximates E[f(Z)], Z ~ N(0,1).
/// Exact for polynomials of degree <= 2*order - 1.
struct GaussHermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Golub-Welsch construction; cached per order, safe to call concurrently.
const GaussHermiteRule& gauss_hermite(int order);

/// Adaptive Gauss-Kronrod (15 point) on a finite interval. The estimate is accepted
/// once error <= max(abs_tol, rel_tol * L1 norm).
Result adaptive(const std::function<double(double)>& f, double a, double b, double abs_tol, double rel_tol = 0.0,
                unsigned max_depth = 12);

/// Integral over [a, +inf) by exp-sinh quadrature (for algebraically decaying integrands).
Result half_line(const std::function<double(double)>& f, double a, double tol);

/// Fixed 10-point Gauss-Legendre rule on [a, b].
double gauss_legendre10(const std::function<double(double)>& f, double a, double b);

/// Neumaier-compensated sum of a sequence, in index order.
double compensated_sum(const std::vector<double>& terms);

}  // namespace fbmlt::quad
