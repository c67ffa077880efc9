#include "fbmlt/oracles.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "fbmlt/errors.hpp"
#include "fbmlt/kernels.hpp"
#include "fbmlt/quadrature.hpp"
#include "fbmlt/rng.hpp"

namespace fbmlt {

namespace {

using Gauss10 = boost::math::quadrature::gauss<double, 10>;

// E[U^p] for U ~ N(0,1) from the Gauss-Hermite rule, p = 0..2*l_max.
const std::vector<double>& gh_moments() {
    static const std::vector<double> moments = [] {
        const auto& rule = quad::gauss_hermite(kPairMomentOrder);
        std::vector<double> m(2 * kPairMomentOrder, 0.0);
        for (std::size_t p = 0; p < m.size(); ++p) {
            double s = 0.0;
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                s += rule.weights[i] * std::pow(rule.nodes[i], static_cast<double>(p));
            }
            m[p] = s;
        }
        return m;
    }();
    return moments;
}

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
    }
    return r;
}

// Pair moment given det(M) computed by the caller (possibly in a cancellation-free way).
double pair_moment(int ell, double m12, double m22, double det) {
    // Z = (a U1, b U1 + c U2) has covariance M^{-1}.
    const double a = std::sqrt(m22 / det);
    const double b = -m12 / std::sqrt(det * m22);
    const double c = 1.0 / std::sqrt(m22);
    // Tensor rule sum_{i,j} w_i w_j (a x_i)^l (b x_i + c x_j)^l, expanded binomially in (b, c).
    const auto& mom = gh_moments();
    double e = 0.0;
    for (int k = 0; k <= ell; ++k) {
        e += binomial(ell, k) * std::pow(b, k) * std::pow(c, ell - k) * mom[static_cast<std::size_t>(ell + k)] *
             mom[static_cast<std::size_t>(ell - k)];
    }
    e *= std::pow(a, ell);
    return 2.0 * std::numbers::pi / std::sqrt(det) * e;
}

// Geometric nodes 0 < x_min = x_1 < ... < x_L = len, ratio `ratio`, with 0 prepended.
std::vector<double> geometric_nodes(double len, double x_min, double ratio) {
    std::vector<double> nodes{0.0};
    const int levels = std::max(1, static_cast<int>(std::ceil(std::log(len / x_min) / std::log(1.0 / ratio))));
    for (int j = levels - 1; j >= 0; --j) {
        nodes.push_back(len * std::pow(ratio, j));
    }
    return nodes;
}

struct SecondMomentIntegrand {
    int ell;
    double two_h;
    double eps_first;
    double eps_second;
    double sign_factor;

    // E[phi_eps^{(l)}(X_s) phi_eta^{(l)}(X_{s+d})] for s >= 0, d >= 0.
    double operator()(double s, double d) const {
        const double st = s + d;
        const double A = std::pow(s, two_h);
        const double B = std::pow(st, two_h);
        const double D = std::pow(d, two_h);
        const double diff = s > 0.0 ? A * std::expm1(two_h * std::log1p(d / s)) : B;  // B - A
        double det_sigma = 0.25 * (D * (2.0 * (A + B) - D) - diff * diff);
        det_sigma = std::max(det_sigma, 0.0);
        const double m11 = A + eps_first;
        const double m22 = B + eps_second;
        const double m12 = 0.5 * (A + B - D);
        const double det = det_sigma + eps_first * B + eps_second * A + eps_first * eps_second;
        (void)m11;
        return sign_factor * pair_moment(ell, m12, m22, det);
    }
};

struct TriangleResult {
    double value;
    std::size_t cells;
    std::size_t evaluations;
};

// Geometric toward both ends of [0, len].
std::vector<double> two_sided_nodes(double len, double x_min, double ratio) {
    auto nodes = geometric_nodes(0.5 * len, x_min, ratio);
    const std::size_t half = nodes.size();
    for (std::size_t i = half - 1; i-- > 0;) {
        nodes.push_back(len - nodes[i]);
    }
    return nodes;
}

// int over {0 <= s <= s + d <= t} of f(s, d), with s = (t - d) v.
// The inner integral behaves like sqrt(t - d) near d = t, hence the two-sided d mesh.
TriangleResult integrate_triangle(const SecondMomentIntegrand& f, double t, double d_min, double ratio) {
    const auto d_nodes = two_sided_nodes(t, d_min, ratio);
    const auto v_nodes = geometric_nodes(1.0, 1e-12, ratio);
    std::vector<double> cell_values;
    cell_values.reserve((d_nodes.size() - 1) * (v_nodes.size() - 1));
    std::size_t evals = 0;
    for (std::size_t i = 0; i + 1 < d_nodes.size(); ++i) {
        for (std::size_t j = 0; j + 1 < v_nodes.size(); ++j) {
            const double va = v_nodes[j];
            const double vb = v_nodes[j + 1];
            const double cell = Gauss10::integrate(
                [&](double d) {
                    const double len = t - d;
                    return len * Gauss10::integrate([&](double v) { return f(len * v, d); }, va, vb);
                },
                d_nodes[i], d_nodes[i + 1]);
            cell_values.push_back(cell);
            evals += 100;
        }
    }
    return {quad::compensated_sum(cell_values), cell_values.size(), evals};
}

}  // namespace

double gaussian_pair_moment(int ell, double m11, double m12, double m22) {
    if (ell < 0 || 2 * ell >= 2 * kPairMomentOrder) {
        throw DomainError("pair moment order out of range");
    }
    const double det = m11 * m22 - m12 * m12;
    if (!(m11 > 0.0) || !(m22 > 0.0) || !(det > 0.0)) {
        throw DomainError("pair moment matrix must be symmetric positive definite");
    }
    return pair_moment(ell, m12, m22, det);
}

OracleValue dlt_first_moment(const MomentQuery& q) {
    if (!(q.eps > 0.0)) {
        throw DomainError("mollifier variance must be positive");
    }
    if (!(q.t >= 0.0)) {
        throw DomainError("horizon must be nonnegative");
    }
    if (q.ell < 0) {
        throw DomainError("derivative order must be nonnegative");
    }
    if (q.t == 0.0) {
        return {};
    }
    const double two_h = 2.0 * q.hurst.value();
    auto f = [&](double s) { return mollifier_deriv({q.eps + std::pow(s, two_h), q.ell}, -q.lambda); };
    // geometric breakpoints toward s = 0, down to well below the scale eps^{1/2H}
    const double floor_s = std::min(q.t * 1e-14, std::pow(q.eps, 1.0 / two_h) * 1e-6);
    const auto nodes = geometric_nodes(q.t, floor_s, 0.25);
    std::vector<double> pieces;
    OracleValue out;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        const auto r = quad::adaptive(f, nodes[i], nodes[i + 1], 0.0, 1e-12);
        pieces.push_back(r.value);
        out.error_bound += r.error;
    }
    out.value = quad::compensated_sum(pieces);
    out.cells = pieces.size();
    return out;
}

OracleValue dlt_second_moment(const MomentQuery& q, double rel_tol) {
    const double eta = q.eta.value_or(q.eps);
    if (!(q.eps > 0.0) || !(eta > 0.0)) {
        throw DomainError("mollifier variances must be positive");
    }
    if (q.lambda != 0.0) {
        throw DomainError("second-moment oracle is restricted to lambda = 0");
    }
    if (!(q.t > 0.0)) {
        throw DomainError("horizon must be positive");
    }
    if (q.ell < 0 || q.ell >= kPairMomentOrder) {
        throw DomainError("derivative order out of range");
    }
    const double two_h = 2.0 * q.hurst.value();
    const double sign = q.ell % 2 == 0 ? 1.0 : -1.0;
    const double factor = sign / (4.0 * std::numbers::pi * std::numbers::pi);
    const double delta = std::pow(std::min(q.eps, eta), 1.0 / two_h);
    const double d_min = std::min(q.t * 1e-12, delta * 1e-4);

    const SecondMomentIntegrand upper{q.ell, two_h, q.eps, eta, factor};
    const SecondMomentIntegrand lower{q.ell, two_h, eta, q.eps, factor};
    auto evaluate = [&](double ratio, OracleValue& stats) {
        const auto a = integrate_triangle(upper, q.t, d_min, ratio);
        stats.cells = a.cells;
        stats.evaluations = a.evaluations;
        if (eta == q.eps) {
            return 2.0 * a.value;
        }
        const auto b = integrate_triangle(lower, q.t, d_min, ratio);
        stats.cells += b.cells;
        stats.evaluations += b.evaluations;
        return a.value + b.value;
    };

    OracleValue out;
    double ratio = 0.5;
    double coarse = evaluate(ratio, out);
    std::size_t total_evals = out.evaluations;
    for (int refinement = 0; refinement < 3; ++refinement) {
        ratio = std::sqrt(ratio);
        OracleValue stats;
        const double fine = evaluate(ratio, stats);
        total_evals += stats.evaluations;
        const double err = std::abs(fine - coarse);
        if (err <= rel_tol * std::abs(fine)) {
            out.value = fine;
            out.error_bound = err;
            out.cells = stats.cells;
            out.evaluations = total_evals;
            return out;
        }
        coarse = fine;
    }
    std::ostringstream os;
    os << "second-moment quadrature did not reach relative tolerance " << rel_tol;
    throw AccuracyError(os.str(), coarse, std::numeric_limits<double>::quiet_NaN());
}

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::converging:
            return "converging";
        case Verdict::diverging:
            return "diverging";
        case Verdict::inconclusive:
            return "inconclusive";
    }
    return "?";
}

std::vector<double> default_eps_schedule() {
    std::vector<double> s;
    for (int k = 0; k < 8; ++k) {
        s.push_back(0.05 * std::pow(4.0, -k));
    }
    return s;
}

DivergenceProbeResult divergence_probe(int ell, Hurst hurst, double t, std::span<const double> eps_schedule) {
    if (eps_schedule.size() < 4) {
        throw DomainError("divergence probe needs at least 4 schedule points");
    }
    for (std::size_t i = 0; i < eps_schedule.size(); ++i) {
        if (!(eps_schedule[i] > 0.0) || (i > 0 && !(eps_schedule[i] < eps_schedule[i - 1]))) {
            throw DomainError("eps schedule must be positive and strictly decreasing");
        }
    }
    DivergenceProbeResult r;
    r.eps_schedule.assign(eps_schedule.begin(), eps_schedule.end());
    for (double eps : eps_schedule) {
        MomentQuery q{ell, hurst, t, eps, std::nullopt, 0.0};
        r.second_moments.push_back(dlt_second_moment(q, 1e-6).value);
    }
    for (std::size_t i = 1; i < r.second_moments.size(); ++i) {
        r.growth_ratios.push_back(r.second_moments[i] / r.second_moments[i - 1]);
    }
    const double last = r.growth_ratios.back();
    // growing moment sequence; the ratios themselves approach 4^gamma from above
    bool increasing = true;
    for (double g : r.growth_ratios) {
        increasing = increasing && g > 1.0;
    }
    if (last < 1.10) {
        r.verdict = Verdict::converging;
    } else if (increasing && last > 1.20) {
        r.verdict = Verdict::diverging;
    } else {
        r.verdict = Verdict::inconclusive;
    }
    r.extrapolated = r.verdict == Verdict::diverging && ell % 2 == 1;
    return r;
}

BoundAuditReport covariance_bound_audit(std::size_t samples, std::span<const double> hurst_set, double horizon,
                                        std::uint64_t seed) {
    if (samples == 0) {
        throw DomainError("audit needs at least one sample");
    }
    if (!(horizon > 0.0)) {
        throw DomainError("audit horizon must be positive");
    }
    BoundAuditReport report;
    report.samples = samples;
    std::uint64_t stream = 0;
    for (double hv : hurst_set) {
        const Hurst h(hv);
        Engine eng = make_engine(seed, stream++);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        BoundAuditEntry e;
        e.hurst = hv;
        const double sharp = hv >= 0.5 ? std::max(1.0, hv * std::pow(2.0, 2.0 - 2.0 * hv)) : 1.0;
        for (std::size_t i = 0; i < samples; ++i) {
            const double T = horizon * (0.05 + 0.95 * unit(eng));
            const double u = T * unit(eng);
            const double v = u + (T - u) * unit(eng);
            const double hw = 0.5 * (v - u) * unit(eng);
            const double kw = (T - v) * unit(eng);
            const double w = T * unit(eng);
            if (!(hw > 0.0)) {
                continue;
            }
            const double scale = std::pow(T, 2.0 * hv);
            const double origin = increment_inner_product(u, hw, 0.0, std::max(w, 1e-300), h);
            const double origin_bound = hv < 0.5 ? std::pow(hw, 2.0 * hv) : std::pow(T, 2.0 * hv - 1.0) * hw;
            e.origin_ratio = std::max(e.origin_ratio, std::abs(origin) / origin_bound);
            e.origin_ratio_sharp = std::max(e.origin_ratio_sharp, std::abs(origin) / (sharp * origin_bound));
            if (kw > 0.0) {
                const double ip = increment_inner_product(u, hw, v, kw, h);
                const double bound = std::pow(2.0, 2.0 - 2.0 * hv) * hv * std::abs(2.0 * hv - 1.0) * hw * kw *
                                     std::pow(v - u, 2.0 * hv - 2.0);
                double ratio = 0.0;
                if (bound > 0.0) {
                    ratio = std::abs(ip) / bound;
                } else if (std::abs(ip) > 1e-12 * scale) {
                    ratio = std::numeric_limits<double>::infinity();
                }
                e.increment_ratio = std::max(e.increment_ratio, ratio);
            }
        }
        report.max_ratio = std::max({report.max_ratio, e.increment_ratio, e.origin_ratio});
        report.entries.push_back(e);
    }
    report.passed = report.max_ratio <= 1.0 + 1e-10;
    return report;
}

NondeterminismAudit local_nondeterminism_audit(std::size_t samples, Hurst hurst, std::uint64_t seed) {
    Engine eng = make_engine(seed, 7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> count(1, 5);
    NondeterminismAudit out{hurst.value(), std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < samples; ++i) {
        const double t = 0.01 + 2.0 * unit(eng);
        std::vector<double> cond;
        const int k = count(eng);
        double nearest = t;  // t_0 = 0
        for (int j = 0; j < k; ++j) {
            const double c = 0.01 + 2.0 * unit(eng);
            if (std::abs(c - t) < 1e-3) {
                continue;
            }
            bool dup = false;
            for (double o : cond) {
                dup = dup || std::abs(o - c) < 1e-3;
            }
            if (dup) {
                continue;
            }
            cond.push_back(c);
            nearest = std::min(nearest, std::abs(c - t));
        }
        const double cv = conditional_variance({t, cond, hurst});
        out.min_ratio = std::min(out.min_ratio, cv / std::pow(nearest, 2.0 * hurst.value()));
    }
    return out;
}

}  // namespace fbmlt
