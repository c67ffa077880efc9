#include "fbmlt/local_time.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "fbmlt/errors.hpp"

namespace fbmlt {

namespace {

constexpr double kImaginaryResidue = 1e-8;

struct TrapezoidSpan {
    std::size_t last_full;  // nodes 0..last_full carry full trapezoid weights
    double tail;            // extra width beyond node last_full (< one step)
};

TrapezoidSpan trapezoid_span(const TimeGrid& grid, double t) {
    if (t < 0.0) {
        throw DomainError("integration horizon must be nonnegative");
    }
    const double horizon_t = grid.time(grid.node_count() - 1);
    if (t > horizon_t * (1.0 + 1e-12) + 1e-15) {
        std::ostringstream os;
        os << "time " << t << " exceeds the path horizon " << horizon_t;
        throw DomainError(os.str());
    }
    const std::size_t k = std::min(grid.index_floor(t), grid.node_count() - 1);
    const double tail = std::max(0.0, t - grid.time(k));
    return {k, tail < 1e-12 * grid.step() ? 0.0 : tail};
}

// int over [0, t] of the piecewise-linear interpolant of f(node).
template <class F>
double trapezoid(const TimeGrid& grid, double t, F&& f) {
    const auto span = trapezoid_span(grid, t);
    const double h = grid.step();
    double sum = 0.0;
    if (span.last_full > 0) {
        sum += 0.5 * f(0);
        for (std::size_t i = 1; i < span.last_full; ++i) {
            sum += f(i);
        }
        sum += 0.5 * f(span.last_full);
        sum *= h;
    }
    if (span.tail > 0.0) {
        const double fa = f(span.last_full);
        const double fb = f(span.last_full + 1);
        const double frac = span.tail / h;
        sum += span.tail * (fa + 0.5 * frac * (fb - fa));
    }
    return sum;
}

void check_path(const PathView& path) {
    if (path.values.size() != path.grid.node_count()) {
        throw DomainError("path values do not match the grid");
    }
}

}  // namespace

std::string_view to_string(Route r) {
    switch (r) {
        case Route::discrete:
            return "discrete";
        case Route::mollified:
            return "mollified";
        case Route::fourier:
            return "fourier";
    }
    return "?";
}

Route route_from_string(std::string_view name) {
    if (name == "discrete") {
        return Route::discrete;
    }
    if (name == "mollified") {
        return Route::mollified;
    }
    if (name == "fourier") {
        return Route::fourier;
    }
    throw ConfigError("unknown estimator route '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const DltEstimate& e) {
    nlohmann::json p = nlohmann::json::object();
    if (e.params.n) p["n"] = *e.params.n;
    if (e.params.a) p["a"] = *e.params.a;
    if (e.params.normalized) p["normalized"] = *e.params.normalized;
    if (e.params.kernel) p["kernel"] = *e.params.kernel;
    if (e.params.epsilon) p["epsilon"] = *e.params.epsilon;
    if (e.params.xi_cutoff) p["xi_cutoff"] = *e.params.xi_cutoff;
    if (e.params.xi_step) p["xi_step"] = *e.params.xi_step;
    if (e.params.damping) p["damping"] = *e.params.damping;
    j = nlohmann::json{{"value", e.value}, {"route", std::string(to_string(e.route))}, {"ell", e.ell},
                       {"lambda", e.lambda},  {"t", e.t},                           {"params", p}};
}

void from_json(const nlohmann::json& j, DltEstimate& e) {
    e.value = j.at("value").get<double>();
    e.route = route_from_string(j.at("route").get<std::string>());
    e.ell = j.at("ell").get<int>();
    e.lambda = j.at("lambda").get<double>();
    e.t = j.at("t").get<double>();
    const auto& p = j.at("params");
    e.params = {};
    if (p.contains("n")) e.params.n = p["n"].get<std::int64_t>();
    if (p.contains("a")) e.params.a = p["a"].get<double>();
    if (p.contains("normalized")) e.params.normalized = p["normalized"].get<bool>();
    if (p.contains("kernel")) e.params.kernel = p["kernel"].get<std::string>();
    if (p.contains("epsilon")) e.params.epsilon = p["epsilon"].get<double>();
    if (p.contains("xi_cutoff")) e.params.xi_cutoff = p["xi_cutoff"].get<double>();
    if (p.contains("xi_step")) e.params.xi_step = p["xi_step"].get<double>();
    if (p.contains("damping")) e.params.damping = p["damping"].get<double>();
}

DltEstimate g_statistic(const PathView& path, const Kernel& kernel, const StatisticSpec& spec, bool normalized) {
    check_path(path);
    if (spec.ell < 0) {
        throw DomainError("derivative order must be nonnegative");
    }
    if (spec.ell > kernel.max_derivative_order()) {
        std::ostringstream os;
        os << "kernel '" << kernel.name() << "' has no derivative of order " << spec.ell;
        throw CapabilityError(os.str());
    }
    const auto span = trapezoid_span(path.grid, spec.t);
    const double n = static_cast<double>(path.grid.n());
    const double scale = std::pow(n, spec.a);
    double sum = 0.0;
    for (std::size_t i = 2; i <= span.last_full; ++i) {
        sum += kernel.deriv(spec.ell, scale * (path.values[i - 1] - spec.lambda));
    }
    if (normalized) {
        sum *= std::pow(n, spec.a * (spec.ell + 1) - 1.0);
    }
    DltEstimate e;
    e.value = sum;
    e.route = Route::discrete;
    e.params.n = path.grid.n();
    e.params.a = spec.a;
    e.params.normalized = normalized;
    e.params.kernel = kernel.name();
    e.ell = spec.ell;
    e.lambda = spec.lambda;
    e.t = spec.t;
    return e;
}

std::vector<double> g_statistic_running(const PathView& path, const Kernel& kernel, int ell, double a,
                                        double lambda) {
    check_path(path);
    if (ell < 0 || ell > kernel.max_derivative_order()) {
        throw CapabilityError("kernel '" + kernel.name() + "' lacks the requested derivative order");
    }
    const double scale = std::pow(static_cast<double>(path.grid.n()), a);
    std::vector<double> out(path.values.size(), 0.0);
    double sum = 0.0;
    for (std::size_t k = 2; k < out.size(); ++k) {
        sum += kernel.deriv(ell, scale * (path.values[k - 1] - lambda));
        out[k] = sum;
    }
    return out;
}

DltEstimate mollified_dlt(const PathView& path, const StatisticSpec& spec, double epsilon) {
    check_path(path);
    const MollifierSpec ms{epsilon, spec.ell};
    const double value =
        trapezoid(path.grid, spec.t, [&](std::size_t i) { return mollifier_deriv(ms, path.values[i] - spec.lambda); });
    DltEstimate e;
    e.value = value;
    e.route = Route::mollified;
    e.params.n = path.grid.n();
    e.params.epsilon = epsilon;
    e.ell = spec.ell;
    e.lambda = spec.lambda;
    e.t = spec.t;
    return e;
}

double mollified_increment(const PathView& path, const StatisticSpec& spec, double epsilon, double t_from) {
    if (t_from > spec.t) {
        throw DomainError("increment start exceeds its end");
    }
    StatisticSpec from = spec;
    from.t = t_from;
    return mollified_dlt(path, spec, epsilon).value - mollified_dlt(path, from, epsilon).value;
}

std::vector<double> mollified_running(const PathView& path, int ell, double lambda, double epsilon) {
    check_path(path);
    const MollifierSpec ms{epsilon, ell};
    const double h = path.grid.step();
    std::vector<double> out(path.values.size(), 0.0);
    double prev = mollifier_deriv(ms, path.values[0] - lambda);
    double acc = 0.0;
    for (std::size_t i = 1; i < out.size(); ++i) {
        const double cur = mollifier_deriv(ms, path.values[i] - lambda);
        acc += 0.5 * h * (prev + cur);
        out[i] = acc;
        prev = cur;
    }
    return out;
}

XiQuadrature default_xi_quadrature(double eps_ref) {
    if (!(eps_ref > 0.0)) {
        throw DomainError("reference variance must be positive");
    }
    const double cutoff = 12.0 / std::sqrt(eps_ref);
    return {cutoff, cutoff / 2048.0};
}

DltEstimate fourier_dlt(const PathView& path, const StatisticSpec& spec, double xi_cutoff, double xi_step,
                        double damping) {
    check_path(path);
    if (!(xi_cutoff > 0.0) || !(xi_step > 0.0)) {
        throw DomainError("xi cutoff and step must be positive");
    }
    if (damping < 0.0) {
        throw DomainError("damping variance must be nonnegative");
    }
    const auto span = trapezoid_span(path.grid, spec.t);
    const std::size_t half = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(xi_cutoff / xi_step - 1e-9)));
    const double dxi = xi_cutoff / static_cast<double>(half);

    // time weights of the trapezoid rule, with the partial last cell folded in
    const double h = path.grid.step();
    const std::size_t nodes = span.last_full + (span.tail > 0.0 ? 2 : 1);
    std::vector<double> tw(nodes, 0.0);
    if (span.last_full > 0) {
        for (std::size_t i = 0; i <= span.last_full; ++i) {
            tw[i] = h;
        }
        tw[0] = tw[span.last_full] = 0.5 * h;
    }
    if (span.tail > 0.0) {
        const double frac = span.tail / h;
        tw[span.last_full] += span.tail * (1.0 - 0.5 * frac);
        tw[span.last_full + 1] += span.tail * 0.5 * frac;
    }

    using cd = std::complex<double>;
    cd total{0.0, 0.0};
    double magnitude = 0.0;
    cd i_pow{1.0, 0.0};
    for (int k = 0; k < spec.ell; ++k) {
        i_pow *= cd{0.0, 1.0};
    }
    for (std::size_t k = 0; k <= 2 * half; ++k) {
        const double xi = -xi_cutoff + static_cast<double>(k) * dxi;
        const double w = (k == 0 || k == 2 * half ? 0.5 : 1.0) * dxi * std::exp(-0.5 * damping * xi * xi);
        if (w == 0.0) {
            continue;
        }
        double re = 0.0;
        double im = 0.0;
        double abs_s = 0.0;
        for (std::size_t i = 0; i < nodes; ++i) {
            const double phase = xi * (path.values[i] - spec.lambda);
            re += tw[i] * std::cos(phase);
            im += tw[i] * std::sin(phase);
            abs_s += tw[i];
        }
        const double xi_pow = std::pow(xi, spec.ell);
        total += w * xi_pow * i_pow * cd{re, im};
        magnitude += w * std::abs(xi_pow) * abs_s;
    }
    total /= 2.0 * std::numbers::pi;
    magnitude /= 2.0 * std::numbers::pi;
    if (std::abs(total.imag()) > kImaginaryResidue * std::max(std::abs(total.real()), magnitude * 1e-8)) {
        std::ostringstream os;
        os << "fourier estimate has imaginary residue " << total.imag() << " against real part " << total.real();
        throw NumericalError(os.str());
    }
    DltEstimate e;
    e.value = total.real();
    e.route = Route::fourier;
    e.params.n = path.grid.n();
    e.params.xi_cutoff = xi_cutoff;
    e.params.xi_step = dxi;
    if (damping > 0.0) {
        e.params.damping = damping;
    }
    e.ell = spec.ell;
    e.lambda = spec.lambda;
    e.t = spec.t;
    return e;
}

double occupation_time(const PathView& path, double lo, double hi, double t) {
    check_path(path);
    if (!(lo < hi)) {
        throw DomainError("occupation interval must satisfy lo < hi");
    }
    return trapezoid(path.grid, t, [&](std::size_t i) {
        const double x = path.values[i];
        return (x >= lo && x <= hi) ? 1.0 : 0.0;
    });
}

std::vector<DltEstimate> dlt_profile(const PathView& path, int ell, double epsilon, std::span<const double> lambda_grid,
                                     double t) {
    check_path(path);
    const MollifierSpec ms{epsilon, ell};
    mollifier_deriv(ms, 0.0);  // validates the spec
    const auto span = trapezoid_span(path.grid, t);
    const double h = path.grid.step();
    const std::size_t nodes = span.last_full + (span.tail > 0.0 ? 2 : 1);
    std::vector<double> tw(nodes, 0.0);
    if (span.last_full > 0) {
        for (std::size_t i = 0; i <= span.last_full; ++i) {
            tw[i] = h;
        }
        tw[0] = tw[span.last_full] = 0.5 * h;
    }
    if (span.tail > 0.0) {
        const double frac = span.tail / h;
        tw[span.last_full] += span.tail * (1.0 - 0.5 * frac);
        tw[span.last_full + 1] += span.tail * 0.5 * frac;
    }

    std::vector<std::size_t> order(lambda_grid.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lambda_grid[a] < lambda_grid[b]; });
    std::vector<double> sorted(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        sorted[i] = lambda_grid[order[i]];
    }

    // One pass over the path; each node only touches levels within the mollifier cutoff.
    const double reach = kMollifierCutoff * std::sqrt(epsilon);
    std::vector<double> acc(sorted.size(), 0.0);
    for (std::size_t i = 0; i < nodes; ++i) {
        const double x = path.values[i];
        auto first = std::lower_bound(sorted.begin(), sorted.end(), x - reach);
        auto last = std::upper_bound(sorted.begin(), sorted.end(), x + reach);
        for (auto it = first; it != last; ++it) {
            const auto idx = static_cast<std::size_t>(it - sorted.begin());
            acc[idx] += tw[i] * mollifier_deriv(ms, x - *it);
        }
    }

    std::vector<DltEstimate> out(lambda_grid.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        DltEstimate& e = out[order[i]];
        e.value = acc[i];
        e.route = Route::mollified;
        e.params.n = path.grid.n();
        e.params.epsilon = epsilon;
        e.ell = ell;
        e.lambda = sorted[i];
        e.t = t;
    }
    return out;
}

}  // namespace fbmlt
