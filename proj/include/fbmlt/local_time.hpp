#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fbmlt/fbm_engine.hpp"
#include "fbmlt/kernels.hpp"
#include <json.hpp>

namespace fbmlt {

struct StatisticSpec {
    int ell = 0;
    /// Scaling exponent of the discrete statistic; theorems need 0 < a <= H (not enforced).
    double a = 0.0;
    double lambda = 0.0;
    double t = 1.0;
};

enum class Route { discrete, mollified, fourier };

std::string_view to_string(Route r);
Route route_from_string(std::string_view name);

/// Everything needed to replay an estimate. Only the fields of the producing route are set.
struct DltParams {
    std::optional<std::int64_t> n;
    std::optional<double> a;
    std::optional<bool> normalized;
    std::optional<std::string> kernel;
    std::optional<double> epsilon;
    std::optional<double> xi_cutoff;
    std::optional<double> xi_step;
    std::optional<double> damping;

    bool operator==(const DltParams&) const = default;
};

struct DltEstimate {
    double value = 0.0;
    Route route = Route::mollified;
    DltParams params;
    int ell = 0;
    double lambda = 0.0;
    double t = 0.0;

    bool operator==(const DltEstimate&) const = default;
};

void to_json(nlohmann::json& j, const DltEstimate& e);
void from_json(const nlohmann::json& j, DltEstimate& e);

/// G = sum_{i=2}^{floor(nt)} g^{(l)}(n^a (X_{(i-1)/n} - lambda)), zero when nt < 2.
/// With `normalized`, multiplied by n^{a(l+1)-1}.
DltEstimate g_statistic(const PathView& path, const Kernel& kernel, const StatisticSpec& spec, bool normalized);

/// Running raw statistic: entry K is the sum over i = 2..K (zero for K < 2), for K = 0..node_count-1.
std::vector<double> g_statistic_running(const PathView& path, const Kernel& kernel, int ell, double a,
                                        double lambda);

/// Trapezoid rule for int_0^t phi_eps^{(l)}(X_s - lambda) ds on the path's grid.
DltEstimate mollified_dlt(const PathView& path, const StatisticSpec& spec, double epsilon);

/// Same integrand over [t_from, spec.t].
double mollified_increment(const PathView& path, const StatisticSpec& spec, double epsilon, double t_from);

/// Cumulative trapezoid integral of phi_eps^{(l)}(X_s - lambda) at every grid node.
std::vector<double> mollified_running(const PathView& path, int ell, double lambda, double epsilon);

/// (1/2pi) int_{-N}^{N} int_0^t (i xi)^l e^{i xi (X_s - lambda)} e^{-damping xi^2/2} ds dxi,
/// trapezoid in both variables. Throws NumericalError if the imaginary residue is not negligible.
DltEstimate fourier_dlt(const PathView& path, const StatisticSpec& spec, double xi_cutoff, double xi_step,
                        double damping = 0.0);

/// Default xi cutoff for a reference variance: 12 / sqrt(eps_ref), step cutoff / 2048.
struct XiQuadrature {
    double cutoff;
    double step;
};
XiQuadrature default_xi_quadrature(double eps_ref);

/// Node-counting trapezoid for int_0^t 1_{[lo,hi]}(X_s) ds.
double occupation_time(const PathView& path, double lo, double hi, double t);

/// mollified_dlt at every level of `lambda_grid`.
std::vector<DltEstimate> dlt_profile(const PathView& path, int ell, double epsilon, std::span<const double> lambda_grid,
                                     double t);

}  // namespace fbmlt
