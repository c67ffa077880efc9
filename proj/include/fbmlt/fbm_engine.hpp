#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fbmlt {

/// Hurst index, strictly inside (0, 1).
class Hurst {
public:
    explicit Hurst(double value);
    double value() const noexcept { return value_; }

private:
    double value_;
};

/// Uniform grid t_i = i/n, i = 0..floor(n*T). Times are carried as node
/// indices; `time(i)` is only formed when a real value is needed.
class TimeGrid {
public:
    TimeGrid(std::int64_t n, double horizon);

    std::int64_t n() const noexcept { return n_; }
    double horizon() const noexcept { return horizon_; }
    std::size_t node_count() const noexcept { return nodes_; }
    double step() const noexcept { return 1.0 / static_cast<double>(n_); }
    double time(std::size_t i) const noexcept { return static_cast<double>(i) / static_cast<double>(n_); }

    /// floor(n*t), tolerant to a relative rounding of 1e-12 in n*t.
    std::size_t index_floor(double t) const;

    bool operator==(const TimeGrid&) const = default;

private:
    std::int64_t n_;
    double horizon_;
    std::size_t nodes_;
};

enum class Method { cholesky, circulant };

std::string_view to_string(Method m);
Method method_from_string(std::string_view name);

/// Sampled values on a grid. Estimators work on views so that synthetic
/// (non-fBm) trajectories can be fed through the same code.
struct PathView {
    TimeGrid grid;
    std::span<const double> values;
};

/// Exactly sampled fBm trajectory. Immutable once built.
class FbmPath {
public:
    FbmPath(Hurst hurst, TimeGrid grid, std::vector<double> values, std::uint64_t seed, Method method,
            std::string generator);

    Hurst hurst() const noexcept { return hurst_; }
    const TimeGrid& grid() const noexcept { return grid_; }
    const std::vector<double>& values() const noexcept { return values_; }
    std::uint64_t seed() const noexcept { return seed_; }
    Method method() const noexcept { return method_; }
    const std::string& generator() const noexcept { return generator_; }

    PathView view() const noexcept { return {grid_, values_}; }

private:
    Hurst hurst_;
    TimeGrid grid_;
    std::vector<double> values_;
    std::uint64_t seed_;
    Method method_;
    std::string generator_;
};

/// Covariance R(s,t) = (s^{2H} + t^{2H} - |t-s|^{2H}) / 2.
double cov(double s, double t, Hurst h);

/// E[(X_{u+h} - X_u)(X_{v+k} - X_v)].
double increment_inner_product(double u, double h, double v, double k, Hurst hurst);

/// Autocovariance of unit-step fractional Gaussian noise at lag k.
double fgn_autocovariance(std::int64_t lag, Hurst h);

/// Draws X on `grid`. cholesky factors the full covariance of (X_{t_1},...);
/// circulant embeds the increment autocovariance and sums the increments.
FbmPath simulate(const TimeGrid& grid, Hurst h, std::uint64_t seed, Method method);

/// Every `factor`-th node of `path`, on the grid with n / factor.
FbmPath subsample(const FbmPath& path, std::int64_t factor);

/// Seed for replication r of an experiment; depends only on (seed, r).
std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t replication);

struct GaussianConditioning {
    double target_time;
    std::vector<double> conditioner_times;
    Hurst hurst;
};

/// Var[X_t | X_{t_1}, ..., X_{t_k}] by Gaussian regression.
double conditional_variance(const GaussianConditioning& c);

struct DetDecomposition {
    double det;
    double product_of_conditional_variances;
};

/// Determinant of Cov(X_{t_1},...,X_{t_r}) together with
/// Var[X_{t_1}] * prod_j Var[X_{t_j} | X_{t_1},...,X_{t_{j-1}}].
DetDecomposition det_decomposition(std::span<const double> times, Hurst h);

}  // namespace fbmlt
