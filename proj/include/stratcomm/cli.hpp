#pragma once

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stratcomm/equilibrium.hpp"
#include "stratcomm/errors.hpp"
#include "stratcomm/gaussian_core.hpp"
#include "stratcomm/json_io.hpp"
#include "stratcomm/noisy_jscc.hpp"
#include "stratcomm/sim.hpp"
#include "stratcomm/solver.hpp"
#include "stratcomm/strategic_rd.hpp"
#include "stratcomm/types.hpp"
#include "stratcomm/version.hpp"

namespace stratcomm {
namespace cliutil {

using jsonio::json;

/// Full round-trip decimal precision for CSV output.
inline std::string fmt17(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const double v = std::stod(item, &used);
            while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError("cannot parse number '" + item + "' in list");
        }
    }
    if (out.empty()) throw ConfigError("numeric list is empty");
    return out;
}

inline json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    return j;
}

inline void emit(const std::string& content, const std::string& out_path, std::ostream& out) {
    if (out_path.empty()) {
        out << content;
        if (!content.empty() && content.back() != '\n') out << '\n';
        return;
    }
    std::ofstream file(out_path);
    if (!file) throw ConfigError("cannot open output file '" + out_path + "'");
    file << content;
    if (!content.empty() && content.back() != '\n') file << '\n';
}

inline double bits_to_nats(double bits) { return bits * std::log(2.0); }

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

/// Gathers the flag/config merge for one subcommand. Flags override config
/// values; unknown config keys are rejected per command.
struct CommandInput {
    json config = json::object();

    CLI::Option* opt_config = nullptr;
    CLI::Option* opt_out = nullptr;
    CLI::Option* opt_threads = nullptr;
    CLI::Option* opt_nats = nullptr;
    std::string config_path;
    std::string out_path;
    int threads = 1;
    bool nats = false;

    CLI::Option* opt_sigma_x2 = nullptr;
    CLI::Option* opt_r = nullptr;
    CLI::Option* opt_rho = nullptr;
    CLI::Option* opt_rho_xw = nullptr;
    CLI::Option* opt_rho_thetaw = nullptr;
    CLI::Option* opt_r_w = nullptr;
    double sigma_x2 = 1.0, r = 1.0, rho = 0.0, rho_xw = 0.0, rho_thetaw = 0.0, r_w = 1.0;

    CLI::Option* opt_p_t = nullptr;
    CLI::Option* opt_sigma_n2 = nullptr;
    double p_t = 1.0, sigma_n2 = 1.0;

    void add_common(CLI::App* cmd) {
        opt_config = cmd->add_option("--config", config_path, "JSON config file; flags override it");
        opt_out = cmd->add_option("--out", out_path, "write the report to a file instead of stdout");
        opt_threads = cmd->add_option("--threads", threads, "worker cap; output is identical for any value");
    }

    void add_model(CLI::App* cmd) {
        opt_sigma_x2 = cmd->add_option("--sigma-x2", sigma_x2, "source variance (default 1)");
        opt_r = cmd->add_option("--r", r, "var(theta)/sigma_x2");
        opt_rho = cmd->add_option("--rho", rho, "cov(X,theta)/sigma_x2 (default 0)");
        opt_rho_xw = cmd->add_option("--rho-xw", rho_xw, "cov(X,W)/sigma_x2");
        opt_rho_thetaw = cmd->add_option("--rho-thetaw", rho_thetaw, "cov(theta,W)/sigma_x2");
        opt_r_w = cmd->add_option("--r-w", r_w, "var(W)/sigma_x2");
    }

    void add_channel(CLI::App* cmd) {
        opt_p_t = cmd->add_option("--p-t", p_t, "transmit power budget");
        opt_sigma_n2 = cmd->add_option("--sigma-n2", sigma_n2, "channel noise variance");
    }

    void add_nats(CLI::App* cmd) {
        opt_nats = cmd->add_flag("--nats", nats, "also report rate quantities in nats");
    }

    void load(const std::vector<const char*>& allowed_config_keys) {
        if (opt_config && opt_config->count()) config = load_config_file(config_path);
        if (!config.is_object()) throw ConfigError("config root must be a JSON object");
        for (auto it = config.begin(); it != config.end(); ++it) {
            bool known = false;
            for (const char* k : allowed_config_keys)
                if (it.key() == k) known = true;
            if (!known) throw ConfigError("unknown key '" + it.key() + "' in config");
        }
    }

    /// Model from config + flags. `need_si`: require the W fields.
    ModelParams model(bool need_si = false) const {
        json mj = config.value("model", json::object());
        jsonio::check_keys(mj, {"sigma_x2", "rho_xtheta", "r_theta", "rho_xw", "rho_thetaw", "r_w"},
                           "model");
        if (opt_sigma_x2 && opt_sigma_x2->count()) mj["sigma_x2"] = sigma_x2;
        if (opt_r && opt_r->count()) mj["r_theta"] = r;
        if (opt_rho && opt_rho->count()) mj["rho_xtheta"] = rho;
        if (opt_rho_xw && opt_rho_xw->count()) mj["rho_xw"] = rho_xw;
        if (opt_rho_thetaw && opt_rho_thetaw->count()) mj["rho_thetaw"] = rho_thetaw;
        if (opt_r_w && opt_r_w->count()) mj["r_w"] = r_w;
        if (!mj.contains("sigma_x2")) mj["sigma_x2"] = 1.0;
        if (!mj.contains("rho_xtheta")) mj["rho_xtheta"] = 0.0;
        if (!mj.contains("r_theta")) throw ConfigError("model requires r_theta (--r)");
        const ModelParams p = jsonio::model_from_json(mj);
        if (need_si && !p.has_si())
            throw ConfigError("this command requires the side-information fields rho_xw, rho_thetaw, r_w");
        return p;
    }

    bool channel_given() const {
        return config.contains("channel") || (opt_p_t && opt_p_t->count()) ||
               (opt_sigma_n2 && opt_sigma_n2->count());
    }

    ChannelParams channel() const {
        json cj = config.value("channel", json::object());
        jsonio::check_keys(cj, {"p_t", "sigma_n2"}, "channel");
        if (opt_p_t && opt_p_t->count()) cj["p_t"] = p_t;
        if (opt_sigma_n2 && opt_sigma_n2->count()) cj["sigma_n2"] = sigma_n2;
        if (!cj.contains("p_t") || !cj.contains("sigma_n2"))
            throw ConfigError("channel requires both p_t (--p-t) and sigma_n2 (--sigma-n2)");
        return jsonio::channel_from_json(cj);
    }

    int thread_count() const {
        if (opt_threads && opt_threads->count()) return std::max(1, threads);
        if (config.contains("threads")) return std::max(1, config.at("threads").get<int>());
        return 1;
    }

    json resolved_base() const {
        json j = json::object();
        j["version"] = kVersion;
        return j;
    }
};

inline std::uint64_t resolve_seed(const CommandInput& in, CLI::Option* opt_seed, std::uint64_t flag_seed) {
    if (opt_seed && opt_seed->count()) return flag_seed;
    if (in.config.contains("seed")) return in.config.at("seed").get<std::uint64_t>();
    if (const char* env = std::getenv("STRATCOMM_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("STRATCOMM_SEED is not a valid unsigned integer");
        }
    }
    return 0;
}

}  // namespace cliutil

/// Runs the command-line front end. Exit codes: 0 success/pass, 2 config
/// error, 3 domain error, 4 consistency or audit failure.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    using cliutil::CommandInput;
    using cliutil::fmt17;
    using cliutil::json;

    CLI::App app{"strategic-communication equilibria, rate-distortion curves, and audits "
                 "for the quadratic-Gaussian setting"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // ---- equilibrium ----------------------------------------------------
    auto* cmd_eq = app.add_subcommand(
        "equilibrium", "noiseless equilibrium: closed form and numeric solve side by side");
    CommandInput in_eq;
    in_eq.add_common(cmd_eq);
    in_eq.add_model(cmd_eq);
    bool eq_si = false;
    cmd_eq->add_flag("--si", eq_si, "solve with receiver side information");

    // ---- rd-curve --------------------------------------------------------
    auto* cmd_rd = app.add_subcommand("rd-curve", "strategic rate-distortion curve as CSV");
    CommandInput in_rd;
    in_rd.add_common(cmd_rd);
    in_rd.add_model(cmd_rd);
    bool rd_si = false;
    cmd_rd->add_flag("--si", rd_si, "rate-dependent side-information curve");
    std::string rd_rates_csv;
    auto* opt_rd_rates = cmd_rd->add_option("--rates", rd_rates_csv, "comma-separated rates in bits");
    double rd_rate_min = 0.25, rd_rate_max = 5.0;
    int rd_rate_count = 20;
    auto* opt_rd_min = cmd_rd->add_option("--rate-min", rd_rate_min, "grid start (default 0.25)");
    auto* opt_rd_max = cmd_rd->add_option("--rate-max", rd_rate_max, "grid end (default 5)");
    auto* opt_rd_count = cmd_rd->add_option("--rate-count", rd_rate_count, "grid size (default 20)");

    // ---- audit -----------------------------------------------------------
    auto* cmd_audit = app.add_subcommand("audit", "invariance, matching, optimality, deviation, "
                                                  "and printed-formula audits");
    std::string audit_kind;
    cmd_audit->add_option("kind", audit_kind, "audit kind")
        ->required()
        ->check(CLI::IsMember({"tx-si", "rate-loss", "match", "optimality", "deviation", "formulas"}));
    CommandInput in_audit;
    in_audit.add_common(cmd_audit);
    in_audit.add_model(cmd_audit);
    in_audit.add_channel(cmd_audit);
    in_audit.add_nats(cmd_audit);
    std::string audit_b_grid_csv, audit_a_grid_csv, audit_offsets_csv, audit_rates_csv;
    auto* opt_b_grid = cmd_audit->add_option("--b-grid", audit_b_grid_csv, "encoder W-coefficients");
    auto* opt_a_grid = cmd_audit->add_option("--a-grid", audit_a_grid_csv, "encoder theta-coefficients");
    auto* opt_offsets = cmd_audit->add_option("--offsets", audit_offsets_csv,
                                              "leader perturbations; must contain 0");
    auto* opt_audit_rates = cmd_audit->add_option("--rates", audit_rates_csv, "rate grid for 'formulas'");
    double audit_rate = 1.0;
    auto* opt_audit_rate = cmd_audit->add_option("--rate", audit_rate, "rate in bits for 'rate-loss'");
    double audit_alpha = 0.0;
    auto* opt_audit_alpha =
        cmd_audit->add_option("--alpha", audit_alpha, "equilibrium coefficient for 'deviation' "
                                                      "(default: solve it)");
    std::int64_t audit_n = 1000000;
    auto* opt_audit_n = cmd_audit->add_option("--n", audit_n, "sample count for 'deviation'");
    std::uint64_t audit_seed = 0;
    auto* opt_audit_seed = cmd_audit->add_option("--seed", audit_seed, "simulation seed");

    // ---- simulate ----------------------------------------------------------
    auto* cmd_sim = app.add_subcommand("simulate", "seeded Monte Carlo run of a strategy pair");
    CommandInput in_sim;
    in_sim.add_common(cmd_sim);
    in_sim.add_model(cmd_sim);
    in_sim.add_channel(cmd_sim);
    std::string sim_strategies = "theorem1";
    cmd_sim->add_option("--strategies", sim_strategies, "strategy pair")
        ->check(CLI::IsMember({"theorem1", "theorem5", "lemma3", "goblick", "custom"}));
    std::int64_t sim_n = 1000000;
    auto* opt_sim_n = cmd_sim->add_option("--n", sim_n, "sample count (default 1e6)");
    std::uint64_t sim_seed = 0;
    auto* opt_sim_seed = cmd_sim->add_option("--seed", sim_seed, "seed (default STRATCOMM_SEED or 0)");
    double c_enc_scale = 1.0, c_enc_alpha = 0.0, c_enc_w = 0.0, c_dec_y = 0.0, c_dec_w = 0.0;
    double sim_dither = 0.0;
    auto* opt_enc_scale = cmd_sim->add_option("--enc-scale", c_enc_scale, "custom encoder gain");
    auto* opt_enc_alpha = cmd_sim->add_option("--enc-alpha", c_enc_alpha, "custom theta-coefficient");
    auto* opt_enc_w = cmd_sim->add_option("--enc-w", c_enc_w, "custom encoder W-coefficient");
    auto* opt_dec_y = cmd_sim->add_option("--dec-y", c_dec_y, "custom decoder Y-coefficient");
    auto* opt_dec_w = cmd_sim->add_option("--dec-w", c_dec_w, "custom decoder W-coefficient");
    auto* opt_dither = cmd_sim->add_option("--dither-var", sim_dither,
                                           "independent encoder dither variance (exploratory)");

    // ---- match-construct ---------------------------------------------------
    auto* cmd_match = app.add_subcommand(
        "match-construct", "build a parameter set satisfying the matching condition");
    CommandInput in_mc;
    in_mc.add_common(cmd_match);
    in_mc.add_model(cmd_match);
    in_mc.add_channel(cmd_match);

    std::vector<const char*> argv_store;
    argv_store.push_back("stratcomm");
    for (const auto& a : args) argv_store.push_back(a.c_str());
    try {
        app.parse(int(argv_store.size()), argv_store.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "argument error: " << e.what() << "\n";
        return 2;
    }

    try {
        // ------------------------------------------------------------- equilibrium
        if (app.got_subcommand(cmd_eq)) {
            in_eq.load({"model"});
            const ModelParams model = in_eq.model(eq_si);
            const EquilibriumReport numeric = solve_stackelberg(model, eq_si);

            json report = in_eq.resolved_base();
            report["config"] = {{"model", jsonio::model_to_json(model)}, {"si", eq_si}};
            report["numeric"] = jsonio::equilibrium_to_json(numeric);
            bool consistent = true;
            json checks = json::object();
            if (!eq_si) {
                const EquilibriumReport closed =
                    closed_form_equilibrium(model.r_theta, model.rho_xtheta, model.sigma_x2);
                report["closed_form"] = jsonio::equilibrium_to_json(closed);
                const double scale = 1e-6 * model.sigma_x2;
                const double alpha_gap = std::abs(closed.alpha - numeric.alpha);
                const double de_gap =
                    detail::relative_gap(closed.distortions.d_e, numeric.distortions.d_e, scale);
                const double dd_gap =
                    detail::relative_gap(closed.distortions.d_d, numeric.distortions.d_d, scale);
                checks["alpha_gap"] = alpha_gap;
                checks["d_e_relative_gap"] = de_gap;
                checks["d_d_relative_gap"] = dd_gap;
                consistent = alpha_gap < 1e-6 && de_gap < 1e-6 && dd_gap < 1e-6;
            } else {
                try {
                    const EquilibriumReport closed =
                        closed_form_equilibrium(model.r_theta, model.rho_xtheta, model.sigma_x2);
                    report["no_si_closed_form_reference"] = jsonio::equilibrium_to_json(closed);
                } catch (const DomainError&) {
                    // reference undefined at r + rho = 0; the numeric report stands alone
                }
                // Leader-optimality spot check on a local grid.
                const CovMatrix base = validate_model(model);
                double best = numeric.distortions.d_e;
                for (int i = 0; i <= 200; ++i) {
                    const double a = numeric.alpha - 1.0 + 0.01 * double(i);
                    best = std::min(best, detail::noiseless_game(base, a, 0.0, true).distortions.d_e);
                }
                checks["local_grid_improvement"] = numeric.distortions.d_e - best;
                consistent = numeric.distortions.d_e - best <= 1e-10;
            }
            report["consistent"] = consistent;
            report["checks"] = checks;
            cliutil::emit(report.dump(2), in_eq.out_path, out);
            if (!consistent) err << "equilibrium consistency checks failed\n";
            return consistent ? 0 : 4;
        }

        // ------------------------------------------------------------- rd-curve
        if (app.got_subcommand(cmd_rd)) {
            in_rd.load({"model", "rates"});
            const ModelParams model = in_rd.model(rd_si);
            std::vector<double> rates;
            if (opt_rd_rates->count()) {
                rates = cliutil::parse_double_list(rd_rates_csv);
            } else if (in_rd.config.contains("rates")) {
                rates = in_rd.config.at("rates").get<std::vector<double>>();
            } else {
                const int count = opt_rd_count->count() ? rd_rate_count : 20;
                const double lo = opt_rd_min->count() ? rd_rate_min : 0.25;
                const double hi = opt_rd_max->count() ? rd_rate_max : 5.0;
                if (count < 1 || !(hi >= lo)) throw ConfigError("invalid rate grid");
                for (int i = 0; i < count; ++i)
                    rates.push_back(count == 1 ? lo : lo + (hi - lo) * double(i) / double(count - 1));
            }
            for (double rate : rates)
                if (!(rate >= 0.0)) throw ConfigError("rates must be nonnegative");

            std::ostringstream csv;
            csv << "R_bits,beta,sigma_s2,D_E,D_D,D_E_paper,D_D_paper,I_YW_bits\n";
            for (double rate : rates) {
                RDPoint pt;
                if (rd_si) {
                    if (rate == 0.0) {
                        const CovMatrix base = validate_model(model);
                        const detail::RdOutcome o =
                            detail::test_channel_distortions(base, 0.0, detail::kInf, true);
                        pt.rate = 0.0;
                        pt.beta = cliutil::kNan;
                        pt.sigma_s2 = detail::kInf;
                        pt.distortions = o.distortions;
                        pt.d_e_paper = model.sigma_x2 *
                                       (1.0 + 2.0 * model.rho_xtheta + model.r_theta);
                        pt.d_d_paper = std::nullopt;
                        pt.i_yw = 0.0;
                    } else {
                        pt = beta_star(model, rate);
                    }
                } else {
                    pt = rd_point_no_si(model.r_theta, model.rho_xtheta, model.sigma_x2, rate);
                }
                csv << fmt17(pt.rate) << ',' << fmt17(pt.beta) << ',' << fmt17(pt.sigma_s2) << ','
                    << fmt17(pt.distortions.d_e) << ',' << fmt17(pt.distortions.d_d) << ','
                    << fmt17(pt.d_e_paper.value_or(cliutil::kNan)) << ','
                    << fmt17(pt.d_d_paper.value_or(cliutil::kNan)) << ',' << fmt17(pt.i_yw) << '\n';
            }
            cliutil::emit(csv.str(), in_rd.out_path, out);
            return 0;
        }

        // ------------------------------------------------------------- audit
        if (app.got_subcommand(cmd_audit)) {
            json report = in_audit.resolved_base();
            bool pass = false;

            if (audit_kind == "tx-si") {
                in_audit.load({"model", "b_grid", "a_grid"});
                const ModelParams model = in_audit.model(true);
                std::vector<double> b_grid{-3.0, -1.0, 1.0, 3.0};
                if (opt_b_grid->count()) b_grid = cliutil::parse_double_list(audit_b_grid_csv);
                else if (in_audit.config.contains("b_grid"))
                    b_grid = in_audit.config.at("b_grid").get<std::vector<double>>();
                std::vector<double> a_grid = default_coefficient_grid();
                if (opt_a_grid->count()) a_grid = cliutil::parse_double_list(audit_a_grid_csv);
                else if (in_audit.config.contains("a_grid"))
                    a_grid = in_audit.config.at("a_grid").get<std::vector<double>>();

                const TxSiAuditReport audit = transmitter_si_audit(model, b_grid, a_grid);
                report["config"] = {{"model", jsonio::model_to_json(model)},
                                    {"b_grid", b_grid},
                                    {"a_grid", a_grid}};
                report["max_deviation"] = audit.max_deviation;
                report["argmin_without_w"] = audit.argmin_without_w;
                report["argmin_with_w"] = audit.argmin_with_w;
                report["argmin_deviation"] = audit.argmin_deviation;
                report["tolerance_distortion"] = audit.tol_distortion;
                report["tolerance_argmin"] = audit.tol_argmin;
                pass = audit.pass;
                err << "encoder W-mixing invariance: max distortion deviation " << audit.max_deviation
                    << ", argmin deviation " << audit.argmin_deviation << "\n";
            } else if (audit_kind == "rate-loss") {
                in_audit.load({"model", "rate", "b_grid", "a_grid"});
                const ModelParams model = in_audit.model(true);
                double rate = 1.0;
                if (opt_audit_rate->count()) rate = audit_rate;
                else if (in_audit.config.contains("rate")) rate = in_audit.config.at("rate").get<double>();
                std::vector<double> b_grid{-3.0, -1.0, 1.0, 3.0};
                if (opt_b_grid->count()) b_grid = cliutil::parse_double_list(audit_b_grid_csv);
                else if (in_audit.config.contains("b_grid"))
                    b_grid = in_audit.config.at("b_grid").get<std::vector<double>>();
                std::vector<double> a_grid{0.25, 0.618, 1.0, 2.0};
                if (opt_a_grid->count()) a_grid = cliutil::parse_double_list(audit_a_grid_csv);
                else if (in_audit.config.contains("a_grid"))
                    a_grid = in_audit.config.at("a_grid").get<std::vector<double>>();

                const RateLossReport audit = rate_loss_audit(model, rate, b_grid, a_grid);
                report["config"] = {{"model", jsonio::model_to_json(model)},
                                    {"rate", rate},
                                    {"b_grid", b_grid},
                                    {"a_grid", a_grid}};
                report["max_deviation"] = audit.max_deviation;
                report["max_mi_route_gap"] = audit.max_mi_route_gap;
                report["tolerance"] = audit.tolerance;
                json rows = json::array();
                for (const auto& row : audit.rows) {
                    json jr{{"a", row.a},
                            {"b", row.b},
                            {"sigma_s2", row.sigma_s2},
                            {"conditional_rate_bits", row.conditional_rate_bits},
                            {"deviation_rate", row.deviation_rate},
                            {"deviation_d_e", row.deviation_d_e},
                            {"deviation_d_d", row.deviation_d_d}};
                    if (in_audit.nats)
                        jr["conditional_rate_nats"] = cliutil::bits_to_nats(row.conditional_rate_bits);
                    rows.push_back(jr);
                }
                report["rows"] = rows;
                pass = audit.pass;
                err << "rate-loss invariance: max deviation " << audit.max_deviation << "\n";
            } else if (audit_kind == "match") {
                in_audit.load({"model", "channel"});
                const ModelParams model = in_audit.model(true);
                const ChannelParams ch = in_audit.channel();
                const MatchReport audit = matching_condition(model, ch);
                report["config"] = {{"model", jsonio::model_to_json(model)},
                                    {"channel", jsonio::channel_to_json(ch)}};
                report["holds"] = audit.holds;
                report["residual"] = audit.residual;
                report["beta_at_capacity"] = audit.beta_at_capacity;
                report["capacity_bits"] = audit.capacity_bits;
                report["i_yw_bits"] = audit.i_yw_bits;
                report["corr_yw"] = audit.corr_yw;
                if (in_audit.nats) {
                    report["capacity_nats"] = cliutil::bits_to_nats(audit.capacity_bits);
                    report["i_yw_nats"] = cliutil::bits_to_nats(audit.i_yw_bits);
                }
                pass = audit.holds;
                err << "matching condition residual " << audit.residual << " (tolerance 1e-9)\n";
            } else if (audit_kind == "optimality") {
                in_audit.load({"model", "channel"});
                const ModelParams model = in_audit.model(true);
                const ChannelParams ch = in_audit.channel();
                const OptimalityReport audit = optimality_audit(model, ch);
                report["config"] = {{"model", jsonio::model_to_json(model)},
                                    {"channel", jsonio::channel_to_json(ch)}};
                report["linear"] = jsonio::distortions_to_json(audit.linear);
                report["rd_at_capacity"] = jsonio::distortions_to_json(audit.rd_at_capacity);
                report["gap_d_e"] = audit.gap_d_e;
                report["gap_d_d"] = audit.gap_d_d;
                report["capacity_bits"] = audit.capacity_bits;
                report["beta_at_capacity"] = audit.beta_at_capacity;
                report["meets_outer_bound"] = audit.meets_outer_bound;
                report["tolerance"] = audit.tolerance;
                pass = audit.meets_outer_bound;
                err << "single-letter vs outer bound gaps: D_E " << audit.gap_d_e << ", D_D "
                    << audit.gap_d_d << "\n";
            } else if (audit_kind == "deviation") {
                in_audit.load({"model", "channel", "alpha", "offsets", "n", "seed", "threads"});
                const ModelParams model = in_audit.model(false);
                std::optional<ChannelParams> channel;
                if (in_audit.channel_given()) channel = in_audit.channel();
                std::vector<double> offsets{0.0, -0.05, 0.05, -0.2, 0.2, -0.5, 0.5};
                if (opt_offsets->count()) offsets = cliutil::parse_double_list(audit_offsets_csv);
                else if (in_audit.config.contains("offsets"))
                    offsets = in_audit.config.at("offsets").get<std::vector<double>>();
                std::int64_t n = 1000000;
                if (opt_audit_n->count()) n = audit_n;
                else if (in_audit.config.contains("n")) n = in_audit.config.at("n").get<std::int64_t>();
                const std::uint64_t seed = cliutil::resolve_seed(in_audit, opt_audit_seed, audit_seed);

                double alpha;
                if (opt_audit_alpha->count()) {
                    alpha = audit_alpha;
                } else if (in_audit.config.contains("alpha")) {
                    alpha = in_audit.config.at("alpha").get<double>();
                } else if (!channel) {
                    alpha = solve_stackelberg(model, model.has_si()).alpha;
                } else if (model.has_si()) {
                    alpha = linear_si_strategies(model, *channel).strategies.enc_alpha;
                } else {
                    alpha = strategic_uncoded_no_si(model.r_theta, model.rho_xtheta, model.sigma_x2,
                                                    *channel)
                                .strategies.enc_alpha;
                }

                const DeviationReport audit =
                    deviation_audit(model, channel, alpha, offsets, n, seed, in_audit.thread_count());
                json cfg{{"model", jsonio::model_to_json(model)},
                         {"alpha", alpha},
                         {"offsets", offsets},
                         {"n", n},
                         {"seed", seed}};
                if (channel) cfg["channel"] = jsonio::channel_to_json(*channel);
                report["config"] = cfg;
                json rows = json::array();
                for (const auto& row : audit.rows)
                    rows.push_back(json{{"offset", row.offset},
                                        {"alpha", row.alpha},
                                        {"d_e_hat", row.sim.d_e_hat},
                                        {"d_e_stderr", row.sim.d_e_stderr},
                                        {"margin", row.margin}});
                report["rows"] = rows;
                report["worst_margin"] = audit.worst_margin;
                pass = audit.pass;
                err << "leader deviation audit: worst margin " << audit.worst_margin
                    << " (negative means an offset improved D_E)\n";
            } else {  // formulas
                in_audit.load({"rates"});
                std::vector<double> rates;
                if (opt_audit_rates->count()) rates = cliutil::parse_double_list(audit_rates_csv);
                else if (in_audit.config.contains("rates"))
                    rates = in_audit.config.at("rates").get<std::vector<double>>();
                else
                    for (int i = 1; i <= 20; ++i) rates.push_back(0.4 * double(i));

                const std::vector<ModelParams> sets = builtin_formula_audit_sets();
                const FormulaAuditReport audit = formula_audit(sets, rates);
                json cfg{{"rates", rates}};
                report["config"] = cfg;
                json jsets = json::array();
                for (const auto& p : sets) jsets.push_back(jsonio::model_to_json(p));
                report["parameter_sets"] = jsets;
                json rows = json::array();
                for (const auto& row : audit.rows) {
                    json jr{{"set_id", row.set_id},
                            {"has_si", row.has_si},
                            {"rate_bits", row.rate},
                            {"beta", row.beta},
                            {"sigma_s2", row.sigma_s2},
                            {"oracle_d_e", row.oracle_d_e},
                            {"oracle_d_d", row.oracle_d_d},
                            {"paper_d_d", jsonio::optional_to_json(row.paper_d_d)},
                            {"paper_d_e", jsonio::optional_to_json(row.paper_d_e)},
                            {"paper_d_e_si_form", row.paper_d_e_si_form},
                            {"gap_d_d", row.gap_d_d},
                            {"gap_d_e", row.gap_d_e},
                            {"gap_d_e_si_form", row.gap_d_e_si_form}};
                    if (in_audit.nats) jr["rate_nats"] = cliutil::bits_to_nats(row.rate);
                    rows.push_back(jr);
                }
                report["rows"] = rows;
                report["discrepancy_flagged"] = audit.discrepancy_flagged;
                report["narrative"] = audit.narrative;
                report["max_gap_d_d"] = audit.max_gap_d_d;
                report["max_gap_d_e"] = audit.max_gap_d_e;
                err << audit.narrative << "\n";
                pass = true;  // the audit reports gaps; no tolerance ties the columns together
            }

            report["pass"] = pass;
            cliutil::emit(report.dump(2), in_audit.out_path, out);
            return pass ? 0 : 4;
        }

        // ------------------------------------------------------------- simulate
        if (app.got_subcommand(cmd_sim)) {
            in_sim.load({"model", "channel", "strategies", "custom", "n", "seed", "threads",
                         "dither_var"});
            std::string kind = sim_strategies;
            if (!cmd_sim->count("--strategies") && in_sim.config.contains("strategies"))
                kind = in_sim.config.at("strategies").get<std::string>();

            const ModelParams model = in_sim.model(kind == "lemma3");
            std::optional<ChannelParams> channel;
            if (in_sim.channel_given()) channel = in_sim.channel();

            LinearStrategyPair pair;
            if (kind == "theorem1") {
                if (channel) throw ConfigError("theorem1 strategies are noiseless; drop the channel");
                const EquilibriumReport eq =
                    closed_form_equilibrium(model.r_theta, model.rho_xtheta, model.sigma_x2);
                pair = {1.0, eq.alpha, 0.0, eq.decoder_y, 0.0};
            } else if (kind == "theorem5") {
                if (!channel) throw ConfigError("theorem5 strategies need a channel");
                pair = strategic_uncoded_no_si(model.r_theta, model.rho_xtheta, model.sigma_x2,
                                               *channel)
                           .strategies;
            } else if (kind == "lemma3") {
                if (!channel) throw ConfigError("lemma3 strategies need a channel");
                pair = linear_si_strategies(model, *channel).strategies;
            } else if (kind == "goblick") {
                if (!channel) throw ConfigError("goblick strategies need a channel");
                pair = goblick_mappings(model.sigma_x2, *channel).strategies;
            } else {  // custom
                json cj = in_sim.config.value("custom", json::object());
                jsonio::check_keys(cj, {"enc_scale", "enc_alpha", "enc_w", "dec_y", "dec_w"},
                                   "custom");
                pair.enc_scale = opt_enc_scale->count() ? c_enc_scale : cj.value("enc_scale", 1.0);
                pair.enc_alpha = opt_enc_alpha->count() ? c_enc_alpha : cj.value("enc_alpha", 0.0);
                pair.enc_w = opt_enc_w->count() ? c_enc_w : cj.value("enc_w", 0.0);
                pair.dec_y = opt_dec_y->count() ? c_dec_y : cj.value("dec_y", 0.0);
                pair.dec_w = opt_dec_w->count() ? c_dec_w : cj.value("dec_w", 0.0);
            }

            std::int64_t n = 1000000;
            if (opt_sim_n->count()) n = sim_n;
            else if (in_sim.config.contains("n")) n = in_sim.config.at("n").get<std::int64_t>();
            const std::uint64_t seed = cliutil::resolve_seed(in_sim, opt_sim_seed, sim_seed);
            double dither = 0.0;
            if (opt_dither->count()) dither = sim_dither;
            else if (in_sim.config.contains("dither_var"))
                dither = in_sim.config.at("dither_var").get<double>();

            const SimResult res =
                simulate_game(model, channel, pair, n, seed, in_sim.thread_count(), dither);
            json report = in_sim.resolved_base();
            json cfg{{"model", jsonio::model_to_json(model)},
                     {"strategies_kind", kind},
                     {"n", n},
                     {"seed", seed},
                     {"dither_var", dither}};
            if (channel) cfg["channel"] = jsonio::channel_to_json(*channel);
            report["config"] = cfg;
            report["strategies"] = jsonio::strategies_to_json(pair);
            report["n_samples"] = res.n_samples;
            report["seed"] = res.seed;
            report["d_e_hat"] = res.d_e_hat;
            report["d_e_stderr"] = res.d_e_stderr;
            report["d_d_hat"] = res.d_d_hat;
            report["d_d_stderr"] = res.d_d_stderr;
            report["power_hat"] = res.power_hat;
            report["power_stderr"] = res.power_stderr;
            cliutil::emit(report.dump(2), in_sim.out_path, out);
            return 0;
        }

        // ------------------------------------------------------------- match-construct
        if (app.got_subcommand(cmd_match)) {
            in_mc.load({"model", "channel"});
            // The X-W coupling is constructed, never supplied.
            if (in_mc.opt_rho_xw->count() ||
                (in_mc.config.contains("model") && in_mc.config.at("model").contains("rho_xw")))
                throw ConfigError("match-construct derives rho_xw; do not supply it");
            json mj = in_mc.config.value("model", json::object());
            const double sigma_x2 = in_mc.opt_sigma_x2->count() ? in_mc.sigma_x2
                                                                : mj.value("sigma_x2", 1.0);
            if (!in_mc.opt_r->count() && !mj.contains("r_theta"))
                throw ConfigError("match-construct requires r_theta (--r)");
            const double r_theta = in_mc.opt_r->count() ? in_mc.r : mj.at("r_theta").get<double>();
            const double rho_xtheta =
                in_mc.opt_rho->count() ? in_mc.rho : mj.value("rho_xtheta", 0.0);
            if (!in_mc.opt_rho_thetaw->count() && !mj.contains("rho_thetaw"))
                throw ConfigError("match-construct requires rho_thetaw (--rho-thetaw)");
            const double rho_thetaw =
                in_mc.opt_rho_thetaw->count() ? in_mc.rho_thetaw : mj.at("rho_thetaw").get<double>();
            const double r_w = in_mc.opt_r_w->count() ? in_mc.r_w : mj.value("r_w", 1.0);
            const ChannelParams ch = in_mc.channel();

            const ModelParams matched =
                construct_matched_params(r_theta, rho_xtheta, rho_thetaw, r_w, sigma_x2, ch);
            const MatchReport verify = matching_condition(matched, ch);
            json report = in_mc.resolved_base();
            report["config"] = {{"channel", jsonio::channel_to_json(ch)},
                                {"r_theta", r_theta},
                                {"rho_xtheta", rho_xtheta},
                                {"rho_thetaw", rho_thetaw},
                                {"r_w", r_w},
                                {"sigma_x2", sigma_x2}};
            report["model"] = jsonio::model_to_json(matched);
            report["alpha"] = closed_form_alpha(r_theta, rho_xtheta);
            report["verification"] = {{"holds", verify.holds},
                                      {"residual", verify.residual},
                                      {"beta_at_capacity", verify.beta_at_capacity},
                                      {"capacity_bits", verify.capacity_bits},
                                      {"i_yw_bits", verify.i_yw_bits}};
            cliutil::emit(report.dump(2), in_mc.out_path, out);
            return verify.holds ? 0 : 4;
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ConsistencyError& e) {
        err << "consistency failure: " << e.what() << "\n";
        return 4;
    } catch (const DomainError& e) {
        err << "domain error: " << e.what() << "\n";
        return 3;
    } catch (const jsonio::json::exception& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    }
    err << "no subcommand handled\n";
    return 2;
}

}  // namespace stratcomm
