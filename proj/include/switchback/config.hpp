#pragma once

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "switchback/ebdesign.hpp"
#include "switchback/montecarlo.hpp"

namespace switchback {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace cfgdetail {

inline const nlohmann::json& need(const nlohmann::json& j, const std::string& key,
                                  const std::string& where) {
    if (!j.contains(key)) throw ConfigError("config: missing '" + key + "' in " + where);
    return j.at(key);
}

inline MinuteSeries series_from(const nlohmann::json& j, const std::string& where) {
    if (j.is_number()) return MinuteSeries::constant(j.get<double>());
    if (j.is_array()) return MinuteSeries(j.get<std::vector<double>>());
    throw ConfigError("config: " + where + " must be a number or an array of per-minute values");
}

}  // namespace cfgdetail

// One JSON document drives every command; all randomness flows from the
// top-level seed.
struct RunConfig {
    nlohmann::json raw;
    int schema_version = 1;
    std::uint64_t seed = 1;
    int threads = 1;

    int horizon = 1440;
    EventDensity density = EventDensity::uniform(1440);
    ControlProfile control = ControlProfile::constant(0.0);
    NoiseModel noise;

    EffectModel primary_effect =
        EffectModel::kernel_const(0.0, 0.0, CarryoverKernel::uniform_window(1.0));
    DesignSpec primary_design;
    std::vector<McIntervention> simuls;

    std::size_t n_events = 1000;
    OutcomeMode mode = OutcomeMode::continuous;

    EstimatorChoice estimator = EstimatorChoice::ht;
    double burnin_h = 0.0;
    bool randomization_enabled = false;
    bool randomization_ci_enabled = false;
    std::size_t randomization_J = 1000;
    double randomization_alpha = 0.05;

    std::vector<int> sweep_M{4, 8, 12, 16, 20, 24, 32, 40, 48, 64, 80, 96};
    std::size_t decomposition_n = 1000;
    std::size_t mc_replications = 1000;

    // empirical-Bayes section
    bool has_eb = false;
    GeneratorSpec generator;
    std::optional<SynthCecSpec> eb_synth;
    std::string eb_ensemble_dir;
    std::vector<DesignSpec> eb_candidates;
    std::size_t eb_replications = 500;
    EstimatorChoice eb_estimator = EstimatorChoice::ht;
    double eb_burnin_h = 0.0;

    static EffectModel effect_from_json(const nlohmann::json& j, const std::string& where) {
        const std::string type = cfgdetail::need(j, "type", where).get<std::string>();
        if (type == "kernel") {
            auto di = cfgdetail::series_from(cfgdetail::need(j, "delta_inst", where), where);
            auto dc = cfgdetail::series_from(cfgdetail::need(j, "delta_co", where), where);
            auto k = CarryoverKernel::from_json(cfgdetail::need(j, "carryover", where));
            return EffectModel::kernel(std::move(di), std::move(dc), std::move(k));
        }
        if (type == "cec") {
            if (j.contains("csv")) return EffectModel::cec(CecCurve::read_csv(j.at("csv")));
            auto vals = cfgdetail::need(j, "values", where).get<std::vector<double>>();
            return EffectModel::cec(CecCurve(static_cast<int>(vals.size()), std::move(vals)));
        }
        throw ConfigError("config: " + where + ".type must be 'kernel' or 'cec'");
    }

    static RunConfig parse(const nlohmann::json& j) {
        RunConfig c;
        c.raw = j;
        c.schema_version = cfgdetail::need(j, "schema_version", "top level").get<int>();
        if (c.schema_version != 1)
            throw ConfigError("config: unsupported schema_version " +
                              std::to_string(c.schema_version));
        c.seed = cfgdetail::need(j, "seed", "top level").get<std::uint64_t>();
        c.threads = j.value("threads", 1);

        const auto& model = cfgdetail::need(j, "model", "top level");
        c.horizon = cfgdetail::need(model, "horizon_minutes", "model").get<int>();
        if (c.horizon < 1) throw ConfigError("config: model.horizon_minutes must be positive");
        if (model.contains("density")) {
            c.density = EventDensity::from_json(model.at("density"));
            if (c.density.horizon() != c.horizon)
                throw ConfigError("config: density horizon disagrees with model.horizon_minutes");
        } else {
            c.density = EventDensity::uniform(c.horizon);
        }
        if (model.contains("control")) {
            const auto& ctl = model.at("control");
            const std::string type = cfgdetail::need(ctl, "type", "model.control").get<std::string>();
            if (type == "constant")
                c.control = ControlProfile::constant(cfgdetail::need(ctl, "value", "model.control").get<double>());
            else if (type == "daily_sinusoid")
                c.control = ControlProfile::daily_sinusoid(
                    cfgdetail::need(ctl, "mean", "model.control").get<double>(),
                    cfgdetail::need(ctl, "amplitude", "model.control").get<double>(),
                    ctl.value("phase", 0.0));
            else if (type == "per_minute")
                c.control = ControlProfile(
                    MinuteSeries(cfgdetail::need(ctl, "values", "model.control").get<std::vector<double>>()));
            else
                throw ConfigError("config: unknown model.control.type '" + type + "'");
        }
        if (model.contains("covariance"))
            c.noise.covariance = CovarianceKernel::from_json(model.at("covariance"));
        if (model.contains("sigma2"))
            c.noise.sigma2 = cfgdetail::series_from(model.at("sigma2"), "model.sigma2");
        c.noise.validate(c.horizon);

        if (j.contains("designs")) {
            const auto& designs = j.at("designs");
            if (designs.contains("primary"))
                c.primary_design = DesignSpec::from_json(designs.at("primary"));
        }

        if (j.contains("outcomes")) {
            const auto& oc = j.at("outcomes");
            c.n_events = oc.value("n_events", static_cast<std::size_t>(1000));
            if (c.n_events < 1) throw ConfigError("config: outcomes.n_events must be >= 1");
            std::string mode = oc.value("mode", std::string("continuous"));
            if (mode == "continuous") c.mode = OutcomeMode::continuous;
            else if (mode == "binary") c.mode = OutcomeMode::binary;
            else throw ConfigError("config: outcomes.mode must be 'continuous' or 'binary'");
            if (oc.contains("primary_effect"))
                c.primary_effect = effect_from_json(oc.at("primary_effect"), "outcomes.primary_effect");
            if (oc.contains("simultaneous")) {
                for (const auto& s : oc.at("simultaneous")) {
                    McIntervention mi;
                    mi.model = effect_from_json(cfgdetail::need(s, "effect", "outcomes.simultaneous[]"),
                                                "outcomes.simultaneous[].effect");
                    mi.design = DesignSpec::from_json(cfgdetail::need(s, "design", "outcomes.simultaneous[]"));
                    mi.delta_compound = s.value("delta_compound", 0.0);
                    mi.share_primary_plan = s.value("share_primary_plan", false);
                    c.simuls.push_back(std::move(mi));
                }
            }
        }

        if (j.contains("estimator")) {
            const auto& est = j.at("estimator");
            std::string type = est.value("type", std::string("ht"));
            if (type == "ht") c.estimator = EstimatorChoice::ht;
            else if (type == "ht_burnin") c.estimator = EstimatorChoice::ht_burnin;
            else throw ConfigError("config: estimator.type must be 'ht' or 'ht_burnin'");
            c.burnin_h = est.value("burnin_h", 0.0);
            if (c.burnin_h < 0.0) throw ConfigError("config: estimator.burnin_h must be >= 0");
            if (est.contains("randomization")) {
                const auto& rz = est.at("randomization");
                c.randomization_enabled = rz.value("enabled", true);
                c.randomization_ci_enabled = rz.value("ci", false);
                c.randomization_J = rz.value("J", static_cast<std::size_t>(1000));
                c.randomization_alpha = rz.value("alpha", 0.05);
                if (c.randomization_J < 100)
                    throw ConfigError("config: estimator.randomization.J must be >= 100");
                if (!(c.randomization_alpha > 0.0 && c.randomization_alpha < 0.5))
                    throw ConfigError("config: estimator.randomization.alpha must be in (0, 0.5)");
            }
        }

        if (j.contains("decomposition")) {
            const auto& de = j.at("decomposition");
            if (de.contains("sweep_M")) {
                c.sweep_M = de.at("sweep_M").get<std::vector<int>>();
                for (int m : c.sweep_M)
                    if (m < 1) throw ConfigError("config: decomposition.sweep_M entries must be >= 1");
            }
            c.decomposition_n = de.value("n", static_cast<std::size_t>(1000));
        }

        if (j.contains("mc")) {
            c.mc_replications = j.at("mc").value("replications", static_cast<std::size_t>(1000));
            if (c.mc_replications < 1) throw ConfigError("config: mc.replications must be >= 1");
        }

        if (j.contains("eb")) {
            c.has_eb = true;
            const auto& eb = j.at("eb");
            if (eb.contains("generator")) {
                const auto& g = eb.at("generator");
                c.generator.days = g.value("days", 14);
                c.generator.density_day_amp = g.value("density_day_amp", 0.6);
                c.generator.weekend_factor = g.value("weekend_factor", 1.3);
                c.generator.ctrl_mean = g.value("ctrl_mean", 1.0);
                c.generator.ctrl_amp = g.value("ctrl_amp", 0.4);
                c.generator.sigma2 = g.value("sigma2", 0.05);
                c.generator.cov_sigma2 = g.value("cov_sigma2", 0.02);
                c.generator.cov_h = g.value("cov_h", 60.0);
                c.generator.n_events = g.value("n_events", static_cast<std::size_t>(20000));
                std::string sm = g.value("simul_mode", std::string("none"));
                if (sm == "none") c.generator.simul_mode = SimulMode::none;
                else if (sm == "one-concurrent") c.generator.simul_mode = SimulMode::one_concurrent;
                else throw ConfigError("config: eb.generator.simul_mode must be 'none' or 'one-concurrent'");
                c.generator.simul_inst = g.value("simul_inst", 0.02);
                c.generator.simul_co = g.value("simul_co", 0.02);
                c.generator.simul_h = g.value("simul_h", 60.0);
                c.generator.simul_avg_len = g.value("simul_avg_len", 56.0);
                if (c.generator.days < 1) throw ConfigError("config: eb.generator.days must be >= 1");
            }
            const auto& ens = cfgdetail::need(eb, "ensemble", "eb");
            const std::string etype = cfgdetail::need(ens, "type", "eb.ensemble").get<std::string>();
            if (etype == "synthetic") {
                SynthCecSpec s;
                s.count = ens.value("count", static_cast<std::size_t>(200));
                s.H = ens.value("H", 56);
                s.amplitude = ens.value("amplitude", 0.03);
                s.gate_scale = ens.value("gate_scale", 0.005);
                s.sign_change_fraction = ens.value("sign_change_fraction", 0.68);
                s.nonmonotone_fraction = ens.value("nonmonotone_fraction", -1.0);
                c.eb_synth = s;
            } else if (etype == "dir") {
                c.eb_ensemble_dir = cfgdetail::need(ens, "path", "eb.ensemble").get<std::string>();
            } else {
                throw ConfigError("config: eb.ensemble.type must be 'synthetic' or 'dir'");
            }
            for (const auto& cand : cfgdetail::need(eb, "candidates", "eb"))
                c.eb_candidates.push_back(DesignSpec::from_json(cand));
            if (c.eb_candidates.empty()) throw ConfigError("config: eb.candidates must be nonempty");
            c.eb_replications = eb.value("replications", static_cast<std::size_t>(500));
            std::string et = eb.value("estimator", std::string("ht"));
            c.eb_estimator = (et == "ht_burnin") ? EstimatorChoice::ht_burnin : EstimatorChoice::ht;
            c.eb_burnin_h = eb.value("burnin_h", 0.0);
        }
        return c;
    }

    static RunConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("config: cannot open " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("config: JSON parse failure: ") + e.what());
        }
        try {
            return parse(j);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("config: schema violation: ") + e.what());
        }
    }
};

}  // namespace switchback
