#include "fbmlt/fbm_engine.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <sstream>

#include "fbmlt/errors.hpp"
#include "fbmlt/rng.hpp"

namespace fbmlt {

namespace {

constexpr std::size_t kMaxCirculantNodes = std::size_t{1} << 27;
constexpr std::size_t kMaxCholeskyBytes = std::size_t{1} << 30;
constexpr double kConditionerJitter = 1e-12;
constexpr double kClampTolerance = 1e-10;
constexpr double kNegativeEigenvalueRatio = 1e-9;

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// In-place forward DFT of `data` (interleaved complex, length len).
void forward_dft(std::vector<fftw_complex>& data) {
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_1d(static_cast<int>(data.size()), data.data(), data.data(), FFTW_FORWARD,
                                FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
}

std::size_t next_pow2(std::size_t v) {
    std::size_t p = 1;
    while (p < v) {
        p <<= 1;
    }
    return p;
}

Eigen::MatrixXd covariance_matrix(std::span<const double> times, Hurst h) {
    const auto r = static_cast<Eigen::Index>(times.size());
    Eigen::MatrixXd c(r, r);
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            c(i, j) = c(j, i) = cov(times[i], times[j], h);
        }
    }
    return c;
}

std::vector<double> sample_cholesky(const TimeGrid& grid, Hurst h, Engine& eng) {
    const std::size_t m = grid.node_count() - 1;
    std::vector<double> x(grid.node_count(), 0.0);
    if (m == 0) {
        return x;
    }
    if (m * m * sizeof(double) > kMaxCholeskyBytes) {
        std::ostringstream os;
        os << "cholesky simulation of " << m << " nodes exceeds the memory budget; use circulant";
        throw ResourceError(os.str());
    }
    Eigen::MatrixXd c(m, m);
    const double n = static_cast<double>(grid.n());
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            c(i, j) = c(j, i) = cov(static_cast<double>(i + 1) / n, static_cast<double>(j + 1) / n, h);
        }
    }
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() != Eigen::Success) {
        const double jitter = 1e-12 * c.trace() / static_cast<double>(m);
        c.diagonal().array() += jitter;
        llt.compute(c);
        if (llt.info() != Eigen::Success) {
            throw NumericalError("cholesky factorization failed after diagonal jitter");
        }
    }
    std::normal_distribution<double> normal;
    Eigen::VectorXd z(m);
    for (std::size_t i = 0; i < m; ++i) {
        z(static_cast<Eigen::Index>(i)) = normal(eng);
    }
    const Eigen::VectorXd y = llt.matrixL() * z;
    for (std::size_t i = 0; i < m; ++i) {
        x[i + 1] = y(static_cast<Eigen::Index>(i));
    }
    return x;
}

// sqrt(eigenvalue / len) of the circulant embedding of length len; the last few are cached.
std::shared_ptr<const std::vector<double>> embedding_scales(std::size_t len, Hurst h) {
    using Key = std::pair<std::size_t, double>;
    static std::mutex mutex;
    static std::vector<std::pair<Key, std::shared_ptr<const std::vector<double>>>> cache;
    const Key key{len, h.value()};
    {
        std::lock_guard lock(mutex);
        for (const auto& [k, v] : cache) {
            if (k == key) {
                return v;
            }
        }
    }
    const std::size_t half = len / 2;
    std::vector<fftw_complex> row(len);
    for (std::size_t j = 0; j < len; ++j) {
        const std::size_t lag = j <= half ? j : len - j;
        row[j][0] = fgn_autocovariance(static_cast<std::int64_t>(lag), h);
        row[j][1] = 0.0;
    }
    forward_dft(row);

    double max_eig = 0.0;
    double min_eig = std::numeric_limits<double>::infinity();
    for (const auto& e : row) {
        max_eig = std::max(max_eig, e[0]);
        min_eig = std::min(min_eig, e[0]);
    }
    if (min_eig < -kNegativeEigenvalueRatio * max_eig) {
        std::ostringstream os;
        os << "circulant embedding is not PSD (min eigenvalue " << min_eig << ", max " << max_eig
           << "); fall back to method=cholesky";
        throw NumericalError(os.str());
    }
    auto scales = std::make_shared<std::vector<double>>(len);
    const double inv_len = 1.0 / static_cast<double>(len);
    for (std::size_t k = 0; k < len; ++k) {
        (*scales)[k] = std::sqrt(std::max(row[k][0], 0.0) * inv_len);
    }
    std::lock_guard lock(mutex);
    if (cache.size() >= 8) {
        cache.erase(cache.begin());
    }
    cache.emplace_back(key, scales);
    return scales;
}

std::vector<double> sample_circulant(const TimeGrid& grid, Hurst h, Engine& eng) {
    const std::size_t m = grid.node_count() - 1;
    std::vector<double> x(grid.node_count(), 0.0);
    if (m == 0) {
        return x;
    }
    if (grid.node_count() > kMaxCirculantNodes) {
        throw ResourceError("circulant simulation grid exceeds the memory budget");
    }
    const std::size_t half = next_pow2(m);
    const std::size_t len = 2 * half;

    const auto scales = embedding_scales(len, h);
    std::normal_distribution<double> normal;
    std::vector<fftw_complex> w(len);
    for (std::size_t k = 0; k < len; ++k) {
        w[k][0] = (*scales)[k] * normal(eng);
        w[k][1] = (*scales)[k] * normal(eng);
    }
    forward_dft(w);

    const double step_scale = std::pow(static_cast<double>(grid.n()), -h.value());
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        acc += step_scale * w[i][0];
        x[i + 1] = acc;
    }
    return x;
}

}  // namespace

Hurst::Hurst(double value) : value_(value) {
    if (!(value > 0.0 && value < 1.0)) {
        std::ostringstream os;
        os << "Hurst index must lie in (0,1), got " << value;
        throw DomainError(os.str());
    }
}

TimeGrid::TimeGrid(std::int64_t n, double horizon) : n_(n), horizon_(horizon), nodes_(0) {
    if (n <= 0) {
        throw DomainError("grid resolution n must be positive");
    }
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw DomainError("grid horizon must be positive and finite");
    }
    const double nt = static_cast<double>(n) * horizon;
    if (nt > static_cast<double>(std::numeric_limits<std::int64_t>::max() / 2)) {
        throw ResourceError("grid node count overflows");
    }
    nodes_ = static_cast<std::size_t>(std::floor(nt * (1.0 + 1e-12))) + 1;
}

std::size_t TimeGrid::index_floor(double t) const {
    if (t < 0.0) {
        throw DomainError("negative time");
    }
    return static_cast<std::size_t>(std::floor(static_cast<double>(n_) * t * (1.0 + 1e-12)));
}

std::string_view to_string(Method m) {
    return m == Method::cholesky ? "cholesky" : "circulant";
}

Method method_from_string(std::string_view name) {
    if (name == "cholesky") {
        return Method::cholesky;
    }
    if (name == "circulant") {
        return Method::circulant;
    }
    throw ConfigError("unknown simulation method '" + std::string(name) + "'");
}

FbmPath::FbmPath(Hurst hurst, TimeGrid grid, std::vector<double> values, std::uint64_t seed, Method method,
                 std::string generator)
    : hurst_(hurst),
      grid_(grid),
      values_(std::move(values)),
      seed_(seed),
      method_(method),
      generator_(std::move(generator)) {
    if (values_.size() != grid_.node_count()) {
        throw DomainError("path length does not match the grid node count");
    }
    if (values_.front() != 0.0) {
        throw DomainError("fBm path must start at 0");
    }
}

double cov(double s, double t, Hurst h) {
    if (s < 0.0 || t < 0.0) {
        throw DomainError("covariance requires nonnegative times");
    }
    const double e = 2.0 * h.value();
    return 0.5 * (std::pow(s, e) + std::pow(t, e) - std::pow(std::abs(t - s), e));
}

double increment_inner_product(double u, double h, double v, double k, Hurst hurst) {
    if (u < 0.0 || v < 0.0) {
        throw DomainError("increment start times must be nonnegative");
    }
    if (!(h > 0.0) || !(k > 0.0)) {
        throw DomainError("increment widths must be positive");
    }
    return cov(u + h, v + k, hurst) - cov(u + h, v, hurst) - cov(u, v + k, hurst) + cov(u, v, hurst);
}

double fgn_autocovariance(std::int64_t lag, Hurst h) {
    const double e = 2.0 * h.value();
    const double k = std::abs(static_cast<double>(lag));
    return 0.5 * (std::pow(k + 1.0, e) - 2.0 * std::pow(k, e) + std::pow(std::abs(k - 1.0), e));
}

FbmPath simulate(const TimeGrid& grid, Hurst h, std::uint64_t seed, Method method) {
    Engine eng = make_engine(seed, 0);
    std::vector<double> x =
        method == Method::cholesky ? sample_cholesky(grid, h, eng) : sample_circulant(grid, h, eng);
    return FbmPath(h, grid, std::move(x), seed, method, std::string(kGeneratorName));
}

FbmPath subsample(const FbmPath& path, std::int64_t factor) {
    if (factor <= 0 || path.grid().n() % factor != 0) {
        std::ostringstream os;
        os << "subsample factor " << factor << " does not divide n = " << path.grid().n();
        throw DomainError(os.str());
    }
    const TimeGrid coarse(path.grid().n() / factor, path.grid().horizon());
    std::vector<double> v(coarse.node_count());
    const auto f = static_cast<std::size_t>(factor);
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = path.values()[i * f];
    }
    return FbmPath(path.hurst(), coarse, std::move(v), path.seed(), path.method(), path.generator());
}

std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t replication) {
    // splitmix64 finalizer over a keyed combination
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (replication + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double conditional_variance(const GaussianConditioning& c) {
    if (!(c.target_time > 0.0)) {
        throw DomainError("conditioning target time must be positive");
    }
    const auto& ts = c.conditioner_times;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (!(ts[i] > 0.0)) {
            throw DomainError("conditioner times must be positive");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (ts[i] == ts[j]) {
                throw DomainError("conditioner times must be distinct");
            }
        }
    }
    const double var = std::pow(c.target_time, 2.0 * c.hurst.value());
    if (ts.empty()) {
        return var;
    }
    Eigen::MatrixXd sigma = covariance_matrix(ts, c.hurst);
    Eigen::VectorXd r(static_cast<Eigen::Index>(ts.size()));
    for (std::size_t i = 0; i < ts.size(); ++i) {
        r(static_cast<Eigen::Index>(i)) = cov(c.target_time, ts[i], c.hurst);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
        sigma.diagonal().array() += kConditionerJitter;
        llt.compute(sigma);
        if (llt.info() != Eigen::Success) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma, Eigen::EigenvaluesOnly);
            const auto& ev = es.eigenvalues();
            std::ostringstream os;
            os << "conditioner covariance is singular: eigenvalues in [" << ev.minCoeff() << ", "
               << ev.maxCoeff() << "], condition number " << ev.maxCoeff() / std::abs(ev.minCoeff());
            throw NumericalError(os.str());
        }
    }
    const double explained = r.dot(llt.solve(r));
    const double result = var - explained;
    if (result < -kClampTolerance * std::max(1.0, var)) {
        std::ostringstream os;
        os << "negative conditional variance " << result;
        throw NumericalError(os.str());
    }
    return std::max(result, 0.0);
}

DetDecomposition det_decomposition(std::span<const double> times, Hurst h) {
    if (times.empty()) {
        throw DomainError("det_decomposition needs at least one time");
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (times[i] == times[j]) {
                throw DomainError("det_decomposition requires distinct times");
            }
        }
    }
    const Eigen::MatrixXd c = covariance_matrix(times, h);
    const double det = c.partialPivLu().determinant();

    double product = 1.0;
    for (std::size_t j = 0; j < times.size(); ++j) {
        GaussianConditioning q{times[j], std::vector<double>(times.begin(), times.begin() + j), h};
        product *= conditional_variance(q);
    }
    return {det, product};
}

}  // namespace fbmlt
