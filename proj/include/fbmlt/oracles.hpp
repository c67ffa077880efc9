#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fbmlt/fbm_engine.hpp"

namespace fbmlt {

struct MomentQuery {
    int ell = 0;
    Hurst hurst{0.5};
    double t = 1.0;
    double eps = 0.01;
    /// Second mollifier variance for cross moments; defaults to eps.
    std::optional<double> eta;
    double lambda = 0.0;
};

/// Order of the Gauss-Hermite rule used per axis for the pair moments.
inline constexpr int kPairMomentOrder = 40;

/// int_{R^2} x^l y^l exp(-v^T M v / 2) dv = 2 pi |M|^{-1/2} E[Z_1^l Z_2^l], Z ~ N(0, M^{-1}).
/// Evaluated with a whitened tensor Gauss-Hermite rule.
double gaussian_pair_moment(int ell, double m11, double m12, double m22);

/// E[int_0^t phi_eps^{(l)}(X_s - lambda) ds] = int_0^t phi_{eps + s^{2H}}^{(l)}(-lambda) ds.
struct OracleValue {
    double value = 0.0;
    double error_bound = 0.0;
    std::size_t cells = 0;
    std::size_t evaluations = 0;
};
OracleValue dlt_first_moment(const MomentQuery& q);

/// E[L_{t,eps}^{(l)}(0) L_{t,eta}^{(l)}(0)] by 2-D quadrature over [0,t]^2 on a mesh graded
/// geometrically toward the diagonal and toward s = 0. Throws AccuracyError when the
/// refinement budget is exhausted before `rel_tol` is met.
OracleValue dlt_second_moment(const MomentQuery& q, double rel_tol = 1e-6);

enum class Verdict { converging, diverging, inconclusive };
std::string_view to_string(Verdict v);

struct DivergenceProbeResult {
    std::vector<double> eps_schedule;
    std::vector<double> second_moments;
    std::vector<double> growth_ratios;
    Verdict verdict = Verdict::inconclusive;
    /// Set for odd l with a diverging verdict; the blow-up argument only covers even l.
    bool extrapolated = false;
};

/// eps_k = 0.05 * 4^{-k}, k = 0..7.
std::vector<double> default_eps_schedule();

DivergenceProbeResult divergence_probe(int ell, Hurst hurst, double t, std::span<const double> eps_schedule);

struct BoundAuditEntry {
    double hurst = 0.0;
    /// max |<1_[u,u+h], 1_[v,v+k]>| / (2^{2-2H} H |2H-1| h k |v-u|^{2H-2})
    double increment_ratio = 0.0;
    /// max |<1_[u,u+h], 1_[0,w]>| / (h^{2H} if H < 1/2 else T^{2H-1} h)
    double origin_ratio = 0.0;
    /// origin_ratio measured against the sharp constant max(1, H 2^{2-2H}) for H >= 1/2
    double origin_ratio_sharp = 0.0;
};

struct BoundAuditReport {
    std::vector<BoundAuditEntry> entries;
    std::size_t samples = 0;
    double max_ratio = 0.0;
    bool passed = false;
};

/// Random (u,h,v,k,w,T) with 2h <= v-u and all times in [0,T], T <= horizon.
BoundAuditReport covariance_bound_audit(std::size_t samples, std::span<const double> hurst_set, double horizon,
                                        std::uint64_t seed = 1);

struct NondeterminismAudit {
    double hurst = 0.0;
    /// min over samples of Var[X_t | X_{t_1..t_k}] / min_i |t - t_i|^{2H} (t_0 = 0)
    double min_ratio = 0.0;
};

NondeterminismAudit local_nondeterminism_audit(std::size_t samples, Hurst hurst, std::uint64_t seed = 1);

}  // namespace fbmlt
