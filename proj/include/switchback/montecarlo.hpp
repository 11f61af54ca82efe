#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "switchback/estimators.hpp"
#include "switchback/stats.hpp"

namespace switchback {

enum class EstimatorChoice { ht, ht_burnin };

struct McIntervention {
    EffectModel model;
    DesignSpec design;
    double delta_compound = 0.0;     // non-additive interaction with the primary
    bool share_primary_plan = false; // reuse the primary's partition and bits
};

struct McConfig {
    EventDensity f = EventDensity::uniform(1440);
    ControlProfile ctrl = ControlProfile::constant(0.0);
    NoiseModel noise;
    EffectModel primary = EffectModel::kernel_const(0.0, 0.0, CarryoverKernel::uniform_window(1.0));
    DesignSpec primary_design;
    std::vector<McIntervention> simuls;
    EstimatorChoice estimator = EstimatorChoice::ht;
    double burnin_h = 0.0;
    std::size_t n = 1000;
    OutcomeMode mode = OutcomeMode::continuous;
    std::size_t replications = 1000;
    std::uint64_t seed = 1;
    int threads = 1;
};

struct McResult {
    double bias_hat = 0.0;
    double mse_hat = 0.0;
    std::optional<double> se_bias;
    std::optional<double> se_mse;
    std::size_t replications = 0;
    double true_gate = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j{{"bias_hat", bias_hat}, {"mse_hat", mse_hat},
                         {"replications", replications}, {"true_gate", true_gate}};
        j["se_bias"] = se_bias ? nlohmann::json(*se_bias) : nlohmann::json();
        j["se_mse"] = se_mse ? nlohmann::json(*se_mse) : nlohmann::json();
        return j;
    }
};

// Monte-Carlo bias and MSE of the chosen estimator against the model-implied
// GATE. Every replication redraws designs, event times and noise, so the
// estimate covers the general (non-additive, compound) case that the closed
// forms do not. Replications are sub-seeded and slot-indexed: results are
// identical for any thread count.
inline McResult mse_monte_carlo(const McConfig& cfg) {
    if (cfg.replications < 1) throw std::invalid_argument("mse_monte_carlo: R must be >= 1");
    const double T = static_cast<double>(cfg.f.horizon());
    const double truth = gate_of(cfg.primary, cfg.f);

    // factor the latent covariance once; replications only multiply by it
    std::optional<LatentNoiseProcess> latent;
    if (cfg.mode == OutcomeMode::continuous &&
        cfg.noise.covariance.kind() != CovarianceKind::none)
        latent.emplace(cfg.noise.covariance, cfg.f.horizon());

    std::vector<double> errors(cfg.replications, 0.0);
    parallel_for(cfg.replications, cfg.threads, [&](std::size_t r) {
        std::uint64_t rs = derive_seed(cfg.seed, r);
        AssignmentPlan primary_plan = draw_plan(cfg.primary_design, T, &cfg.f, derive_seed(rs, 1));
        Intervention primary{cfg.primary, primary_plan, 0.0};
        std::vector<Intervention> simuls;
        simuls.reserve(cfg.simuls.size());
        for (std::size_t l = 0; l < cfg.simuls.size(); ++l) {
            const McIntervention& s = cfg.simuls[l];
            AssignmentPlan plan = s.share_primary_plan
                                      ? primary_plan
                                      : draw_plan(s.design, T, &cfg.f, derive_seed(rs, 100 + l));
            simuls.push_back({s.model, std::move(plan), s.delta_compound});
        }
        EventStream stream =
            simulate_stream(cfg.f, cfg.ctrl, cfg.noise, primary, simuls, cfg.n, cfg.mode,
                            derive_seed(rs, 2), latent ? &*latent : nullptr);
        GateEstimate est = (cfg.estimator == EstimatorChoice::ht)
                               ? ht_estimate(stream, primary_plan)
                               : ht_burnin_estimate(stream, primary_plan, cfg.burnin_h);
        errors[r] = est.value - truth;
    });

    // jackknife standard errors; for these plain means the leave-one-out
    // formula reduces to sd/sqrt(R)
    const double R = static_cast<double>(cfg.replications);
    double mean_e = 0.0, mean_e2 = 0.0;
    for (double e : errors) {
        mean_e += e;
        mean_e2 += e * e;
    }
    mean_e /= R;
    mean_e2 /= R;
    McResult out;
    out.replications = cfg.replications;
    out.true_gate = truth;
    out.bias_hat = mean_e;
    out.mse_hat = mean_e2;
    if (cfg.replications > 1) {
        double var_e = 0.0, var_e2 = 0.0;
        for (double e : errors) {
            var_e += (e - mean_e) * (e - mean_e);
            var_e2 += (e * e - mean_e2) * (e * e - mean_e2);
        }
        out.se_bias = std::sqrt(var_e / (R - 1.0) / R);
        out.se_mse = std::sqrt(var_e2 / (R - 1.0) / R);
    }
    return out;
}

}  // namespace switchback
