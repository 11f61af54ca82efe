#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "switchback/config.hpp"

namespace switchback::cli {

// exit codes: 0 success, 2 config error, 3 numerical failure
constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

struct CommandIO {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed_override;
    std::optional<int> threads_override;
    std::string stream_path;  // estimate / fit-cec inputs
    std::string design_path;
    std::string input_path;
    std::string method = "natural-cubic";
    std::ostream* log = &std::cout;
};

namespace detail {

inline std::filesystem::path outfile(const CommandIO& io, const std::string& name) {
    std::filesystem::create_directories(io.out_dir);
    return std::filesystem::path(io.out_dir) / name;
}

inline RunConfig load_config(const CommandIO& io) {
    if (io.config_path.empty()) throw ConfigError("config: --config PATH is required");
    RunConfig cfg = RunConfig::load(io.config_path);
    if (io.seed_override) cfg.seed = *io.seed_override;
    if (io.threads_override) cfg.threads = *io.threads_override;
    return cfg;
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << j.dump(2) << '\n';
}

struct BuiltPlans {
    AssignmentPlan primary;
    std::vector<Intervention> simuls;
};

inline BuiltPlans build_plans(const RunConfig& cfg, std::uint64_t seed) {
    BuiltPlans out;
    out.primary = draw_plan(cfg.primary_design, cfg.horizon, &cfg.density, derive_seed(seed, 1));
    for (std::size_t l = 0; l < cfg.simuls.size(); ++l) {
        const auto& s = cfg.simuls[l];
        AssignmentPlan plan = s.share_primary_plan
                                  ? out.primary
                                  : draw_plan(s.design, cfg.horizon, &cfg.density,
                                              derive_seed(seed, 100 + l));
        out.simuls.push_back({s.model, std::move(plan), s.delta_compound});
    }
    return out;
}

inline SmootherChoice parse_method(const std::string& m) {
    if (m == "natural-cubic") return SmootherChoice::natural_cubic();
    if (m.rfind("polynomial:", 0) == 0) return SmootherChoice::polynomial(std::stoi(m.substr(11)));
    if (m.rfind("local:", 0) == 0) {
        std::string rest = m.substr(6);
        auto colon = rest.find(':');
        int d = std::stoi(rest.substr(0, colon));
        double span = (colon == std::string::npos) ? 0.75 : std::stod(rest.substr(colon + 1));
        return SmootherChoice::local(d, span);
    }
    throw ConfigError("fit-cec: unknown method '" + m +
                      "' (use natural-cubic | polynomial:D | local:D[:SPAN])");
}

}  // namespace detail

// gen-data: historical-style stream without the primary intervention.
inline int cmd_gen_data(const CommandIO& io) {
    RunConfig cfg = detail::load_config(io);
    AssignmentPlan null_plan;
    null_plan.partition = IntervalPartition({0.0, static_cast<double>(cfg.horizon)}, cfg.horizon);
    null_plan.bits = {0};
    Intervention primary{EffectModel::kernel_const(0.0, 0.0, CarryoverKernel::uniform_window(1.0)),
                         null_plan, 0.0};
    auto plans = detail::build_plans(cfg, derive_seed(cfg.seed, 0xD0));
    EventStream s = simulate_stream(cfg.density, cfg.control, cfg.noise, primary, plans.simuls,
                                    cfg.n_events, cfg.mode, derive_seed(cfg.seed, 0xD1));
    write_stream_csv(s, detail::outfile(io, "stream.csv").string());
    *io.log << "gen-data: wrote " << s.events.size() << " events to "
            << detail::outfile(io, "stream.csv").string() << "\n";
    return kOk;
}

// design: draw the primary plan and serialize it.
inline int cmd_design(const CommandIO& io) {
    RunConfig cfg = detail::load_config(io);
    AssignmentPlan plan =
        draw_plan(cfg.primary_design, cfg.horizon, &cfg.density, derive_seed(cfg.seed, 0xD2));
    detail::write_json(detail::outfile(io, "design.json"), plan.to_json());
    *io.log << "design: " << plan.partition.num_intervals() << " intervals written to "
            << detail::outfile(io, "design.json").string() << "\n";
    return kOk;
}

// simulate: full stream with primary and simultaneous interventions.
inline int cmd_simulate(const CommandIO& io) {
    RunConfig cfg = detail::load_config(io);
    auto plans = detail::build_plans(cfg, derive_seed(cfg.seed, 0xD3));
    Intervention primary{cfg.primary_effect, plans.primary, 0.0};
    EventStream s = simulate_stream(cfg.density, cfg.control, cfg.noise, primary, plans.simuls,
                                    cfg.n_events, cfg.mode, derive_seed(cfg.seed, 0xD4));
    write_stream_csv(s, detail::outfile(io, "stream.csv").string());
    detail::write_json(detail::outfile(io, "design_primary.json"), plans.primary.to_json());
    for (std::size_t l = 0; l < plans.simuls.size(); ++l)
        detail::write_json(detail::outfile(io, "design_simul_" + std::to_string(l) + ".json"),
                           plans.simuls[l].plan.to_json());
    if (s.meta.clamp_warning)
        *io.log << "simulate: warning: binary-mode clamp rate " << s.meta.clamp_rate << "\n";
    *io.log << "simulate: wrote " << s.events.size() << " events\n";
    return kOk;
}

// estimate: HT / burn-in estimates plus optional randomization inference on
// an existing stream and design.
inline int cmd_estimate(const CommandIO& io) {
    RunConfig cfg = detail::load_config(io);
    if (io.stream_path.empty() || io.design_path.empty())
        throw ConfigError("estimate: --stream and --design are required");
    EventStream s = read_stream_csv(io.stream_path);
    std::ifstream din(io.design_path);
    if (!din) throw ConfigError("estimate: cannot open " + io.design_path);
    nlohmann::json dj;
    din >> dj;
    AssignmentPlan plan = AssignmentPlan::from_json(dj);
    nlohmann::json report;
    GateEstimate ht = ht_estimate(s, plan);
    report["ht"] = ht.to_json();
    if (cfg.estimator == EstimatorChoice::ht_burnin) {
        GateEstimate bi = ht_burnin_estimate(s, plan, cfg.burnin_h);
        report["ht_burnin"] = bi.to_json();
    }
    if (cfg.randomization_enabled) {
        RandomizationResult r = randomization_pvalue(s, cfg.primary_design, cfg.density, ht,
                                                     cfg.randomization_J,
                                                     derive_seed(cfg.seed, 0xD5));
        report["randomization"] = {{"p_value", r.p_value}, {"J", r.draws}};
        if (cfg.randomization_ci_enabled) {
            auto ci = randomization_ci(s, plan, cfg.primary_design, cfg.density,
                                       cfg.randomization_J, cfg.randomization_alpha,
                                       derive_seed(cfg.seed, 0xD6));
            report["randomization"]["ci"] = {ci.first, ci.second};
            report["randomization"]["alpha"] = cfg.randomization_alpha;
        }
    }
    detail::write_json(detail::outfile(io, "estimate.json"), report);
    *io.log << "estimate: ht = " << ht.value << "\n";
    return kOk;
}

// decompose: closed-form component sweep over fixed-duration designs.
inline int cmd_decompose(const CommandIO& io) {
    RunConfig cfg = detail::load_config(io);
    if (!cfg.primary_effect.is_kernel())
        throw ConfigError("decompose: closed forms need a kernel primary effect; use the mc command");
    for (const auto& s : cfg.simuls) {
        if (!s.model.is_kernel())
            throw ConfigError("decompose: closed forms need kernel simultaneous effects; use the mc command");
        if (s.delta_compound != 0.0)
            throw ConfigError("decompose: non-additive (compound) effects are out of closed-form "
                              "scope; use the mc command");
    }
    std::vector<SimulInterventionSpec> simuls;
    for (std::size_t l = 0; l < cfg.simuls.size(); ++l) {
        AssignmentPlan plan = draw_plan(cfg.simuls[l].design, cfg.horizon, &cfg.density,
                                        derive_seed(cfg.seed, 300 + l));
        simuls.push_back({cfg.simuls[l].model, plan.partition});
    }
    const double T = cfg.horizon;
    std::ofstream csv(detail::outfile(io, "decompose.csv"));
    csv.precision(17);
    csv << "M,var_meas,bias_sq,var_total_effect,e_simul_sq,cross,total\n";
    nlohmann::json rows = nlohmann::json::array();
    double best = std::numeric_limits<double>::infinity();
    int best_m = 0;
    for (int M : cfg.sweep_M) {
        IntervalPartition part = build_fixed(T, T / M, std::min(cfg.primary_design.offset, T / M * 0.999));
        IntervalStats st = interval_stats(part, cfg.density, cfg.control, cfg.noise,
                                          cfg.primary_effect, simuls);
        MseBreakdown b = mse_closed_form(st, cfg.decomposition_n);
        csv << M << ',' << b.var_meas << ',' << b.bias_carryover * b.bias_carryover << ','
            << b.var_inst_carryover << ',' << b.e_simul_sq << ',' << b.cross_simul << ','
            << b.total_mse << '\n';
        nlohmann::json row = b.to_json();
        row["M"] = M;
        rows.push_back(row);
        if (b.total_mse < best) {
            best = b.total_mse;
            best_m = M;
        }
    }
    nlohmann::json report{{"argmin_M", best_m}, {"argmin_total_mse", best}, {"rows", rows}};
    detail::write_json(detail::outfile(io, "decompose.json"), report);
    *io.log << "decompose: argmin M = " << best_m << " (total mse " << best << ")\n";
    return kOk;
}

// mc: Monte-Carlo bias / MSE of the configured estimator.
inline int cmd_mc(const CommandIO& io) {
    RunConfig cfg = detail::load_config(io);
    McConfig mc;
    mc.f = cfg.density;
    mc.ctrl = cfg.control;
    mc.noise = cfg.noise;
    mc.primary = cfg.primary_effect;
    mc.primary_design = cfg.primary_design;
    mc.simuls = cfg.simuls;
    mc.estimator = cfg.estimator;
    mc.burnin_h = cfg.burnin_h;
    mc.n = cfg.n_events;
    mc.mode = cfg.mode;
    mc.replications = cfg.mc_replications;
    mc.seed = derive_seed(cfg.seed, 0xD7);
    mc.threads = cfg.threads;
    McResult r = mse_monte_carlo(mc);
    detail::write_json(detail::outfile(io, "mc.json"), r.to_json());
    *io.log << "mc: bias = " << r.bias_hat << " mse = " << r.mse_hat << " (R = " << r.replications
            << ")\n";
    return kOk;
}

// fit-cec: constrained natural cubic spline (or baseline smoother) report.
inline int cmd_fit_cec(const CommandIO& io) {
    if (io.input_path.empty()) throw ConfigError("fit-cec: --input CSV is required");
    CecCurve curve = CecCurve::read_csv(io.input_path);
    SmootherChoice method = detail::parse_method(io.method);
    nlohmann::json report;
    report["H"] = curve.horizon;
    report["method"] = io.method;
    if (method.kind == SmootherChoice::Kind::natural_cubic) {
        SplineFit fit = fit_natural_cubic(curve);
        report["fit"] = fit.to_json();
        auto res = fit.constraint_residuals();
        report["constraint_residuals"] = res;
        report["gate"] = fit.gate();
        CecCurve smooth = curve;
        smooth.variances.reset();
        for (int u = 1; u <= curve.horizon; ++u)
            smooth.values[u - 1] = fit.eval(static_cast<double>(u) / curve.horizon);
        smooth.write_csv(detail::outfile(io, "cec_smoothed.csv").string());
    } else {
        report["gate"] = smoothed_gate(curve, method);
    }
    detail::write_json(detail::outfile(io, "cec_fit.json"), report);
    *io.log << "fit-cec: gate = " << report["gate"].dump() << "\n";
    return kOk;
}

// select: the empirical-Bayes design-selection pipeline.
inline int cmd_select(const CommandIO& io) {
    RunConfig cfg = detail::load_config(io);
    if (!cfg.has_eb) throw ConfigError("select: config has no 'eb' section");
    SyntheticConfig sc;
    sc.generator = cfg.generator;
    sc.ensemble = cfg.eb_synth ? synth_cec_ensemble(*cfg.eb_synth, derive_seed(cfg.seed, 0xE0))
                               : read_ensemble(cfg.eb_ensemble_dir);
    sc.candidates = cfg.eb_candidates;
    sc.estimator = cfg.eb_estimator;
    sc.burnin_h = cfg.eb_burnin_h;
    sc.replications = cfg.eb_replications;
    sc.seed = derive_seed(cfg.seed, 0xE1);
    sc.threads = cfg.threads;
    RankingResult r = rank_designs(sc);

    nlohmann::json designs = nlohmann::json::array();
    for (const auto& s : r.scores) designs.push_back(s.to_json());
    nlohmann::json report{{"designs", designs},
                          {"selected", r.scores[r.selected].design.to_json()},
                          {"selected_label", r.scores[r.selected].design.label()},
                          {"replications", cfg.eb_replications},
                          {"ensemble_provenance", sc.ensemble.provenance}};
    detail::write_json(detail::outfile(io, "ranking.json"), report);
    std::ofstream csv(detail::outfile(io, "errors.csv"));
    csv.precision(17);
    for (std::size_t d = 0; d < r.scores.size(); ++d)
        csv << (d ? "," : "") << r.scores[d].design.label();
    csv << '\n';
    for (std::size_t i = 0; i < cfg.eb_replications; ++i) {
        for (std::size_t d = 0; d < r.scores.size(); ++d)
            csv << (d ? "," : "") << r.scores[d].errors[i];
        csv << '\n';
    }
    *io.log << "select: best design = " << r.scores[r.selected].design.label() << "\n";
    return kOk;
}

inline int dispatch(const std::string& cmd, const CommandIO& io) {
    try {
        if (cmd == "gen-data") return cmd_gen_data(io);
        if (cmd == "design") return cmd_design(io);
        if (cmd == "simulate") return cmd_simulate(io);
        if (cmd == "estimate") return cmd_estimate(io);
        if (cmd == "decompose") return cmd_decompose(io);
        if (cmd == "mc") return cmd_mc(io);
        if (cmd == "fit-cec") return cmd_fit_cec(io);
        if (cmd == "select") return cmd_select(io);
        *io.log << "unknown command '" << cmd << "'\n";
        return kConfigError;
    } catch (const ConfigError& e) {
        *io.log << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        *io.log << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const EstimationError& e) {
        *io.log << "numerical failure: " << e.what() << "\n";
        return kNumericalError;
    } catch (const std::exception& e) {
        *io.log << "numerical failure: " << e.what() << "\n";
        return kNumericalError;
    }
}

}  // namespace switchback::cli
