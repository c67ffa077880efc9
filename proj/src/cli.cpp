#include "fbmlt/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "fbmlt/errors.hpp"
#include "fbmlt/fbm_engine.hpp"
#include "fbmlt/harness.hpp"
#include "fbmlt/kernels.hpp"
#include "fbmlt/local_time.hpp"
#include "fbmlt/oracles.hpp"
#include "fbmlt/parallel.hpp"
#include "fbmlt/path_io.hpp"

namespace fbmlt {

namespace {

using nlohmann::json;

struct Globals {
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    std::string out;
    std::string format;
};

void write_json(const Globals& g, const json& j) {
    if (g.out.empty()) {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream os(g.out);
    if (!os) {
        throw ResourceError("cannot write " + g.out);
    }
    os << j.dump(2) << '\n';
}

void write_lines(const Globals& g, const std::vector<json>& records) {
    std::ofstream file;
    if (!g.out.empty()) {
        file.open(g.out);
        if (!file) {
            throw ResourceError("cannot write " + g.out);
        }
    }
    std::ostream& os = g.out.empty() ? std::cout : file;
    for (const auto& r : records) {
        os << r.dump() << '\n';
    }
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Fractional Brownian motion local-time laboratory", "fbmlt"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Random seed");
    app.add_option("--threads", g.threads, "Worker threads (default: FBMLT_THREADS or hardware)");
    app.add_option("--out", g.out, "Output file (default: stdout where applicable)");
    app.add_option("--format", g.format, "Output format (simulate: csv|binary, experiment: json|csv)");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Sample an fBm path and write it to a file");
    double sim_h = 0.5, sim_t = 1.0;
    std::int64_t sim_n = 1024;
    std::string sim_method = "circulant";
    sim->add_option("--hurst", sim_h)->required();
    sim->add_option("--n", sim_n, "Points per unit time");
    sim->add_option("--horizon", sim_t);
    sim->add_option("--method", sim_method)->check(CLI::IsMember({"cholesky", "circulant"}));

    // moments
    auto* mom = app.add_subcommand("moments", "Kernel moment table");
    std::vector<std::string> mom_kernels{"gaussian(eps=1)", "gaussian_deriv(l=1,eps=1)", "affine_gaussian", "bump",
                                         "bump_deriv"};
    std::vector<double> mom_kappas = kDefaultKappas;
    std::vector<int> mom_ells{0};
    mom->add_option("--kernel", mom_kernels, "Kernel references");
    mom->add_option("--kappa", mom_kappas);
    mom->add_option("--ell", mom_ells);

    // estimate
    auto* est = app.add_subcommand("estimate", "Single-path estimators of derivatives of local time");
    std::string est_path, est_route = "mollified", est_kernel = "gaussian(eps=1)";
    std::vector<double> est_lambdas{0.0};
    int est_ell = 0;
    std::optional<double> est_t, est_a, est_eps, est_cutoff, est_step;
    double est_damping = 0.0;
    bool est_norm = false;
    std::optional<double> occ_lo, occ_hi;
    est->add_option("--path", est_path)->required();
    est->add_option("--route", est_route)->check(CLI::IsMember({"discrete", "mollified", "fourier", "occupation"}));
    est->add_option("--ell", est_ell);
    est->add_option("--lambda", est_lambdas, "One or more levels");
    est->add_option("--t", est_t, "Time (default: path horizon)");
    est->add_option("--kernel", est_kernel);
    est->add_option("--a", est_a, "Scaling exponent (default: path H)");
    est->add_flag("--normalized", est_norm);
    est->add_option("--eps", est_eps, "Mollifier variance (default: n^{-2H})");
    est->add_option("--xi-cutoff", est_cutoff);
    est->add_option("--xi-step", est_step);
    est->add_option("--damping", est_damping);
    est->add_option("--lo", occ_lo);
    est->add_option("--hi", occ_hi);

    // oracle
    auto* ora = app.add_subcommand("oracle", "Quadrature oracles");
    std::string ora_kind = "first";
    int ora_ell = 0;
    double ora_h = 0.5, ora_t = 1.0, ora_eps = 0.05, ora_lambda = 0.0, ora_tol = 1e-6;
    std::optional<double> ora_eta;
    std::vector<double> ora_schedule;
    std::vector<double> ora_matrix;
    ora->add_option("--kind", ora_kind)->check(CLI::IsMember({"first", "second", "divergence", "pair"}));
    ora->add_option("--ell", ora_ell);
    ora->add_option("--hurst", ora_h);
    ora->add_option("--t", ora_t);
    ora->add_option("--eps", ora_eps);
    ora->add_option("--eta", ora_eta);
    ora->add_option("--lambda", ora_lambda);
    ora->add_option("--rel-tol", ora_tol);
    ora->add_option("--schedule", ora_schedule, "Decreasing eps schedule for --kind divergence");
    ora->add_option("--matrix", ora_matrix, "m11 m12 m22 for --kind pair")->expected(3);

    // experiment
    auto* exp = app.add_subcommand("experiment", "Run a Monte Carlo experiment from a config file");
    std::string exp_config;
    exp->add_option("--config", exp_config)->required();

    // audit
    auto* aud = app.add_subcommand("audit", "Covariance-bound and identity audits");
    std::size_t aud_samples = 10000;
    std::vector<double> aud_hurst{0.2, 0.5, 0.8};
    double aud_horizon = 2.0;
    aud->add_option("--samples", aud_samples);
    aud->add_option("--hurst", aud_hurst);
    aud->add_option("--horizon", aud_horizon);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 1;
    }

    try {
        const std::uint64_t seed = g.seed.value_or(1);
        if (*sim) {
            if (g.out.empty()) {
                throw ConfigError("simulate needs --out");
            }
            const std::string fmt = g.format.empty() ? "csv" : g.format;
            if (fmt != "csv" && fmt != "binary") {
                throw ConfigError("simulate --format must be csv or binary");
            }
            const auto path = simulate(TimeGrid(sim_n, sim_t), Hurst(sim_h), seed, method_from_string(sim_method));
            save_path(g.out, path, fmt == "csv" ? PathFormat::csv : PathFormat::binary);
            return 0;
        }
        if (*mom) {
            json table = json::array();
            for (const auto& ref : mom_kernels) {
                const Kernel k = parse_kernel(ref);
                const auto m = compute_moments(k, mom_kappas, mom_ells);
                json row{{"kernel", k.name()},
                         {"max_derivative_order", k.max_derivative_order()},
                         {"mu", m.mu},
                         {"mu_tilde", m.mu_tilde ? json(*m.mu_tilde) : json(nullptr)},
                         {"zero_energy", m.zero_energy},
                         {"achieved_error", m.achieved_error}};
                json wl = json::object();
                for (const auto& [kappa, v] : m.weighted_l1) {
                    wl[std::to_string(kappa)] = v;
                }
                json l2 = json::object();
                for (const auto& [l, v] : m.l2_of_deriv) {
                    l2[std::to_string(l)] = v;
                }
                row["weighted_l1"] = wl;
                row["l2_of_deriv"] = l2;
                table.push_back(row);
            }
            write_json(g, table);
            return 0;
        }
        if (*est) {
            const FbmPath path = load_path(est_path);
            const PathView v = path.view();
            const double t = est_t.value_or(path.grid().horizon());
            const double h = path.hurst().value();
            const double eps = est_eps.value_or(std::pow(static_cast<double>(path.grid().n()), -2.0 * h));
            std::vector<json> records;
            if (est_route == "occupation") {
                if (!occ_lo || !occ_hi) {
                    throw ConfigError("occupation route needs --lo and --hi");
                }
                records.push_back({{"route", "occupation"},
                                   {"lo", *occ_lo},
                                   {"hi", *occ_hi},
                                   {"t", t},
                                   {"value", occupation_time(v, *occ_lo, *occ_hi, t)}});
            } else {
                for (double lambda : est_lambdas) {
                    const StatisticSpec spec{est_ell, est_a.value_or(h), lambda, t};
                    DltEstimate e;
                    if (est_route == "discrete") {
                        e = g_statistic(v, parse_kernel(est_kernel), spec, est_norm);
                    } else if (est_route == "mollified") {
                        e = mollified_dlt(v, spec, eps);
                    } else {
                        const auto xq = default_xi_quadrature(eps);
                        e = fourier_dlt(v, spec, est_cutoff.value_or(xq.cutoff), est_step.value_or(xq.step),
                                        est_damping);
                    }
                    records.push_back(e);
                }
            }
            write_lines(g, records);
            return 0;
        }
        if (*ora) {
            const Hurst h(ora_h);
            json j{{"kind", ora_kind}, {"ell", ora_ell}, {"hurst", ora_h}};
            if (ora_kind == "pair") {
                if (ora_matrix.size() != 3) {
                    throw ConfigError("--kind pair needs --matrix m11 m12 m22");
                }
                j["value"] = gaussian_pair_moment(ora_ell, ora_matrix[0], ora_matrix[1], ora_matrix[2]);
            } else if (ora_kind == "divergence") {
                const auto schedule = ora_schedule.empty() ? default_eps_schedule() : ora_schedule;
                const auto r = divergence_probe(ora_ell, h, ora_t, schedule);
                j["t"] = ora_t;
                j["eps_schedule"] = r.eps_schedule;
                j["second_moments"] = r.second_moments;
                j["growth_ratios"] = r.growth_ratios;
                j["verdict"] = std::string(to_string(r.verdict));
                j["extrapolated"] = r.extrapolated;
            } else {
                const MomentQuery q{ora_ell, h, ora_t, ora_eps, ora_eta, ora_lambda};
                const auto r = ora_kind == "first" ? dlt_first_moment(q) : dlt_second_moment(q, ora_tol);
                j["t"] = ora_t;
                j["eps"] = ora_eps;
                j["eta"] = ora_eta ? json(*ora_eta) : json(nullptr);
                j["lambda"] = ora_lambda;
                j["value"] = r.value;
                j["error_bound"] = r.error_bound;
                j["cells"] = r.cells;
                j["evaluations"] = r.evaluations;
            }
            write_json(g, j);
            return 0;
        }
        if (*exp) {
            ExperimentConfig c = load_config(exp_config);
            if (g.seed) c.seed = *g.seed;
            if (g.threads > 0) c.threads = g.threads;
            const ReportFormat fmt = report_format_from_string(g.format.empty() ? "json" : g.format);
            std::string out = !g.out.empty() ? g.out : c.output.value_or("");
            const Report r = run_experiment(c);
            if (out.empty()) {
                std::cout << report_to_json(r).dump(2) << '\n';
            } else {
                emit(r, fmt, out);
            }
            for (const auto& w : r.warnings) {
                std::cerr << "warning: " << w << '\n';
            }
            return 0;
        }
        if (*aud) {
            const auto rep = covariance_bound_audit(aud_samples, aud_hurst, aud_horizon, seed);
            json entries = json::array();
            for (const auto& e : rep.entries) {
                entries.push_back({{"hurst", e.hurst},
                                   {"increment_ratio", e.increment_ratio},
                                   {"origin_ratio", e.origin_ratio},
                                   {"origin_ratio_sharp", e.origin_ratio_sharp}});
            }
            json nd = json::array();
            for (double hv : aud_hurst) {
                const auto a = local_nondeterminism_audit(aud_samples / 10 + 1, Hurst(hv), seed);
                nd.push_back({{"hurst", a.hurst}, {"min_ratio", a.min_ratio}});
            }
            write_json(g, {{"samples", rep.samples},
                           {"covariance_bound", entries},
                           {"max_ratio", rep.max_ratio},
                           {"passed", rep.passed},
                           {"local_nondeterminism", nd}});
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return 1;
}

}  // namespace fbmlt
