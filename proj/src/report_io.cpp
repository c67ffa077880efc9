#include <fstream>
#include <set>
#include <sstream>

#include "fbmlt/errors.hpp"
#include "fbmlt/harness.hpp"

namespace fbmlt {

using nlohmann::json;

namespace {

template <class T>
T field(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

json fit_to_json(const RateFit& f) {
    return {{"slope", f.slope},
            {"intercept", f.intercept},
            {"stderr_slope", f.stderr_slope},
            {"r_squared", f.r_squared},
            {"points", f.points}};
}

RateFit fit_from_json(const json& j) {
    return {j.at("slope").get<double>(), j.at("intercept").get<double>(), j.at("stderr_slope").get<double>(),
            j.at("r_squared").get<double>(), j.at("points").get<std::size_t>()};
}

json rows_to_json(const std::vector<ErrorRow>& rows) {
    json a = json::array();
    for (const auto& r : rows) {
        a.push_back({{"n", r.n}, {"l2_error", r.l2_error}, {"stderr", r.std_error}, {"replications", r.replications}});
    }
    return a;
}

std::vector<ErrorRow> rows_from_json(const json& a) {
    std::vector<ErrorRow> rows;
    for (const auto& r : a) {
        rows.push_back({r.at("n").get<std::int64_t>(), r.at("l2_error").get<double>(), r.at("stderr").get<double>(),
                        r.at("replications").get<std::size_t>()});
    }
    return rows;
}

std::string read_file(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) {
        throw ConfigError("cannot open " + file.string());
    }
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& file, const std::string& text) {
    std::ofstream os(file, std::ios::binary);
    if (!os) {
        throw ResourceError("cannot write " + file.string());
    }
    os << text;
    if (!os) {
        throw ResourceError("write failed for " + file.string());
    }
}

}  // namespace

json config_to_json(const ExperimentConfig& c) {
    json j{{"kind", std::string(to_string(c.kind))},
           {"hurst", c.hurst},
           {"ell", c.ell},
           {"kernel", c.kernel},
           {"lambda", c.lambda},
           {"t", c.t},
           {"t_grid", c.t_grid},
           {"n_values", c.n_values},
           {"n_max", c.n_max},
           {"replications", c.replications},
           {"seed", c.seed},
           {"epsilon_rule", c.epsilon_rule},
           {"method", c.method},
           {"lags", c.lags},
           {"pairs_per_lag", c.pairs_per_lag},
           {"record_raw", c.record_raw},
           {"threads", c.threads}};
    if (c.a) {
        j["a"] = *c.a;
    }
    if (c.output) {
        j["output"] = *c.output;
    }
    return j;
}

ExperimentConfig config_from_json(const json& j) {
    static const std::set<std::string> known{"kind",   "hurst",  "ell",          "a",         "kernel",
                                             "lambda", "t",      "t_grid",       "n_values",  "n_max",
                                             "replications", "seed", "epsilon_rule", "method", "lags",
                                             "pairs_per_lag", "record_raw", "threads", "output"};
    if (!j.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    for (const char* key : {"kind", "hurst"}) {
        if (!j.contains(key)) {
            throw ConfigError(std::string("config is missing required key '") + key + "'");
        }
    }
    ExperimentConfig c;
    c.kind = experiment_kind_from_string(field<std::string>(j, "kind"));
    c.hurst = field<double>(j, "hurst");
    if (j.contains("ell")) c.ell = field<int>(j, "ell");
    if (j.contains("a")) c.a = field<double>(j, "a");
    if (j.contains("kernel")) c.kernel = field<std::string>(j, "kernel");
    if (j.contains("lambda")) c.lambda = field<double>(j, "lambda");
    if (j.contains("t")) c.t = field<double>(j, "t");
    if (j.contains("t_grid")) c.t_grid = field<std::vector<double>>(j, "t_grid");
    if (j.contains("n_values")) c.n_values = field<std::vector<std::int64_t>>(j, "n_values");
    if (j.contains("n_max")) c.n_max = field<std::int64_t>(j, "n_max");
    if (j.contains("replications")) c.replications = field<std::size_t>(j, "replications");
    if (j.contains("seed")) c.seed = field<std::uint64_t>(j, "seed");
    if (j.contains("epsilon_rule")) c.epsilon_rule = field<double>(j, "epsilon_rule");
    if (j.contains("method")) c.method = field<std::string>(j, "method");
    if (j.contains("lags")) c.lags = field<std::vector<double>>(j, "lags");
    if (j.contains("pairs_per_lag")) c.pairs_per_lag = field<std::size_t>(j, "pairs_per_lag");
    if (j.contains("record_raw")) c.record_raw = field<bool>(j, "record_raw");
    if (j.contains("threads")) c.threads = field<unsigned>(j, "threads");
    if (j.contains("output")) c.output = field<std::string>(j, "output");
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
    json j;
    try {
        j = json::parse(read_file(file));
    } catch (const json::parse_error& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
    return config_from_json(j);
}

ReportFormat report_format_from_string(std::string_view name) {
    if (name == "json") return ReportFormat::json;
    if (name == "csv") return ReportFormat::csv;
    throw ConfigError("unknown report format '" + std::string(name) + "'");
}

json report_to_json(const Report& r) {
    json j;
    j["format"] = "fbmlt-report v1";
    j["config"] = config_to_json(r.config);
    j["rows"] = rows_to_json(r.rows);
    j["fit"] = r.fit ? fit_to_json(*r.fit) : json(nullptr);
    j["chosen_sign"] = r.chosen_sign ? json(*r.chosen_sign) : json(nullptr);
    j["alternate_rows"] = rows_to_json(r.alternate_rows);
    j["alternate_fit"] = r.alternate_fit ? fit_to_json(*r.alternate_fit) : json(nullptr);
    json holder = json::array();
    for (const auto& h : r.holder_rows) {
        holder.push_back({{"lag", h.lag},
                          {"moment2", h.moment2},
                          {"stderr2", h.stderr2},
                          {"moment4", h.moment4},
                          {"stderr4", h.stderr4}});
    }
    j["holder_rows"] = holder;
    json hf = json::object();
    for (const auto& [k, f] : r.holder_fits) {
        hf[k] = fit_to_json(f);
    }
    j["holder_fits"] = hf;
    j["theory"] = r.theory;
    j["regime"] = r.regime;
    j["warnings"] = r.warnings;
    json checks = json::array();
    for (const auto& c : r.checks) {
        checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    }
    j["checks"] = checks;
    j["mu"] = r.mu;
    j["mu_tilde"] = r.mu_tilde ? json(*r.mu_tilde) : json(nullptr);
    j["epsilon_ref"] = r.epsilon_ref;
    j["quarantined"] = r.quarantined;
    j["generator"] = r.generator;
    j["wall_seconds"] = r.wall_seconds;
    if (!r.raw.empty()) {
        j["raw"] = r.raw;
    }
    return j;
}

Report report_from_json(const json& j) {
    Report r;
    try {
        r.config = config_from_json(j.at("config"));
        r.rows = rows_from_json(j.at("rows"));
        if (!j.at("fit").is_null()) r.fit = fit_from_json(j.at("fit"));
        if (!j.at("chosen_sign").is_null()) r.chosen_sign = j.at("chosen_sign").get<std::string>();
        r.alternate_rows = rows_from_json(j.at("alternate_rows"));
        if (!j.at("alternate_fit").is_null()) r.alternate_fit = fit_from_json(j.at("alternate_fit"));
        for (const auto& h : j.at("holder_rows")) {
            r.holder_rows.push_back({h.at("lag").get<double>(), h.at("moment2").get<double>(),
                                     h.at("stderr2").get<double>(), h.at("moment4").get<double>(),
                                     h.at("stderr4").get<double>()});
        }
        for (const auto& [k, f] : j.at("holder_fits").items()) {
            r.holder_fits[k] = fit_from_json(f);
        }
        r.theory = j.at("theory").get<std::map<std::string, double>>();
        r.regime = j.at("regime").get<std::string>();
        r.warnings = j.at("warnings").get<std::vector<std::string>>();
        for (const auto& c : j.at("checks")) {
            r.checks.push_back(
                {c.at("name").get<std::string>(), c.at("passed").get<bool>(), c.at("detail").get<std::string>()});
        }
        r.mu = j.at("mu").get<double>();
        if (!j.at("mu_tilde").is_null()) r.mu_tilde = j.at("mu_tilde").get<double>();
        r.epsilon_ref = j.at("epsilon_ref").get<double>();
        r.quarantined = j.at("quarantined").get<std::size_t>();
        r.generator = j.at("generator").get<std::string>();
        r.wall_seconds = j.at("wall_seconds").get<double>();
        if (j.contains("raw")) r.raw = j.at("raw").get<std::vector<std::vector<double>>>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed report: ") + e.what());
    }
    return r;
}

void emit(const Report& r, ReportFormat format, const std::filesystem::path& file) {
    if (format == ReportFormat::json) {
        write_file(file, report_to_json(r).dump(2) + "\n");
        return;
    }
    std::ostringstream os;
    os.precision(17);
    os << "n,l2_error,stderr,replications\n";
    for (const auto& row : r.rows) {
        os << row.n << ',' << row.l2_error << ',' << row.std_error << ',' << row.replications << '\n';
    }
    write_file(file, os.str());
    std::filesystem::path meta = file;
    meta += ".meta.json";
    write_file(meta, report_to_json(r).dump(2) + "\n");
}

Report load_report(const std::filesystem::path& file) {
    std::filesystem::path source = file;
    if (file.extension() == ".csv") {
        source += ".meta.json";
    }
    try {
        return report_from_json(json::parse(read_file(source)));
    } catch (const json::parse_error& e) {
        throw ConfigError(source.string() + ": " + e.what());
    }
}

}  // namespace fbmlt
