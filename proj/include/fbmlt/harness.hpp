#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace fbmlt {

enum class ExperimentKind { lln, second_order, sup_convergence, holder };

std::string_view to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(std::string_view name);

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::lln;
    double hurst = 0.25;
    int ell = 0;
    /// Defaults to hurst.
    std::optional<double> a;
    std::string kernel = "gaussian(eps=1)";
    double lambda = 0.0;
    double t = 1.0;
    /// Evaluation times for sup_convergence; the horizon is their maximum.
    std::vector<double> t_grid;
    std::vector<std::int64_t> n_values{128, 256, 512, 1024, 2048, 4096};
    std::int64_t n_max = 16384;
    std::size_t replications = 500;
    std::uint64_t seed = 1;
    /// c in eps_ref = c * n_max^{-2H}.
    double epsilon_rule = 1.0;
    std::string method = "circulant";
    /// holder: lags |v - u| and pairs drawn per lag and replication.
    std::vector<double> lags{0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625};
    std::size_t pairs_per_lag = 4;
    /// Keep per-replication raw statistics in the report.
    bool record_raw = false;
    /// Worker threads; 0 means the environment default. Never affects results.
    unsigned threads = 0;
    std::optional<std::string> output;

    double a_value() const { return a.value_or(hurst); }
    double horizon() const;
    bool operator==(const ExperimentConfig&) const = default;
};

/// Throws ConfigError on anything invalid, naming the offending field or value.
void validate(const ExperimentConfig& c);

/// Strict parse: unknown keys and wrong types are ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& file);

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;
    double r_squared = 0.0;
    std::size_t points = 0;
    bool operator==(const RateFit&) const = default;
};

/// Weighted least squares of log(error) on log(x), weights 1/(stderr/error)^2.
/// Falls back to equal weights when any stderr is zero.
RateFit fit_rate(std::span<const double> x, std::span<const double> errors, std::span<const double> stderrs);

struct ErrorRow {
    std::int64_t n = 0;
    double l2_error = 0.0;
    double std_error = 0.0;
    std::size_t replications = 0;
    bool operator==(const ErrorRow&) const = default;
};

struct HolderRow {
    double lag = 0.0;
    /// E|dL|^{2p} for p = 1, 2 and their standard errors.
    double moment2 = 0.0;
    double stderr2 = 0.0;
    double moment4 = 0.0;
    double stderr4 = 0.0;
    bool operator==(const HolderRow&) const = default;
};

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
    bool operator==(const Check&) const = default;
};

struct Report {
    ExperimentConfig config;
    std::vector<ErrorRow> rows;
    std::optional<RateFit> fit;
    /// second_order: sign s in n^a(...) + s mu[g~] L^{(l+1)} selected by smaller RMS at the largest n.
    std::optional<std::string> chosen_sign;
    std::vector<ErrorRow> alternate_rows;
    std::optional<RateFit> alternate_fit;
    std::vector<HolderRow> holder_rows;
    std::map<std::string, RateFit> holder_fits;
    std::map<std::string, double> theory;
    std::string regime;
    std::vector<std::string> warnings;
    std::vector<Check> checks;
    double mu = 0.0;
    std::optional<double> mu_tilde;
    double epsilon_ref = 0.0;
    std::size_t quarantined = 0;
    std::string generator;
    double wall_seconds = 0.0;
    /// raw[i][r]: unnormalized statistic at n_values[i] for replication r (record_raw only).
    std::vector<std::vector<double>> raw;

    bool operator==(const Report&) const = default;
};

/// Hypothesis warnings for a config; violations never stop a run.
std::vector<std::string> hypothesis_warnings(const ExperimentConfig& c);

/// Largest kappa on a 1e-3 grid in (0, 1/2) with H (2l + 2 kappa + offset) < 1; nullopt if none.
std::optional<double> admissible_kappa(double hurst, int ell, int offset);

Report run_experiment(const ExperimentConfig& config);

enum class ReportFormat { json, csv };
ReportFormat report_format_from_string(std::string_view name);

nlohmann::json report_to_json(const Report& r);
Report report_from_json(const nlohmann::json& j);

/// json: one document at `file`. csv: `file` holds n,l2_error,stderr,replications and
/// `file` + ".meta.json" holds the rest of the report.
void emit(const Report& r, ReportFormat format, const std::filesystem::path& file);
Report load_report(const std::filesystem::path& file);

}  // namespace fbmlt
