#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "switchback/cec.hpp"
#include "switchback/estimators.hpp"
#include "switchback/montecarlo.hpp"

namespace switchback {

enum class SimulMode { none, one_concurrent };

// Calibrated stand-in for historical platform data: periodic event density
// and mean control outcome, correlated measurement errors, and (optionally)
// one embedded concurrent intervention on the platform's own balanced
// fixed-duration design. Parameters are qualitative, not fidelity-bearing.
struct GeneratorSpec {
    int days = 14;
    double density_day_amp = 0.6;    // daily sinusoid amplitude of the event density
    double weekend_factor = 1.3;     // Fri/Sat/Sun multiplier
    double ctrl_mean = 1.0;
    double ctrl_amp = 0.4;           // daily sinusoid amplitude of the control outcome
    double sigma2 = 0.05;            // event-level measurement-error variance
    double cov_sigma2 = 0.02;        // covariance kernel scale
    double cov_h = 60.0;             // covariance kernel bandwidth (minutes)
    std::size_t n_events = 20000;
    SimulMode simul_mode = SimulMode::none;
    double simul_inst = 0.02;        // embedded concurrent intervention (kernel form)
    double simul_co = 0.02;
    double simul_h = 60.0;
    double simul_avg_len = 56.0;     // the platform's status-quo design
    OutcomeMode mode = OutcomeMode::continuous;

    int horizon() const { return days * 1440; }

    EventDensity density() const {
        const int T = horizon();
        std::vector<double> w(static_cast<std::size_t>(T));
        for (int k = 0; k < T; ++k) {
            int day = k / 1440;
            int dow = day % 7;  // day 0 is a Monday
            double daily = 1.0 + density_day_amp *
                                     std::sin(2.0 * M_PI * ((k % 1440) + 0.5) / 1440.0 - M_PI / 2.0);
            double wk = (dow == 4 || dow == 5 || dow == 6) ? weekend_factor : 1.0;
            w[k] = daily * wk + 0.05;
        }
        return EventDensity::empirical(std::move(w));
    }

    ControlProfile control() const { return ControlProfile::daily_sinusoid(ctrl_mean, ctrl_amp); }

    NoiseModel noise() const {
        NoiseModel nm;
        if (cov_sigma2 > 0.0) nm.covariance = CovarianceKernel::linear_decay(cov_sigma2, cov_h);
        nm.sigma2 = MinuteSeries::constant(sigma2);
        return nm;
    }
};

// Draws one stream of "historical" data. In one-concurrent mode the stream
// already contains the concurrent intervention's effects; synthetic
// experiments inherit them as observed data.
inline EventStream generate_historical(const GeneratorSpec& spec, std::uint64_t seed,
                                       const LatentNoiseProcess* latent = nullptr) {
    const double T = spec.horizon();
    EventDensity f = spec.density();
    AssignmentPlan null_plan;  // all-control primary
    null_plan.partition = IntervalPartition({0.0, T}, T);
    null_plan.bits = {0};
    Intervention primary{EffectModel::kernel_const(0.0, 0.0, CarryoverKernel::uniform_window(1.0)),
                         null_plan, 0.0};
    std::vector<Intervention> simuls;
    if (spec.simul_mode == SimulMode::one_concurrent) {
        DesignSpec d;
        d.family = DesignFamily::fixed;
        d.avg_length = spec.simul_avg_len;
        d.balanced = true;
        AssignmentPlan plan = draw_plan(d, T, &f, derive_seed(seed, 0x51));
        simuls.push_back({EffectModel::kernel_const(spec.simul_inst, spec.simul_co,
                                                    CarryoverKernel::uniform_window(spec.simul_h)),
                          std::move(plan), 0.0});
    }
    return simulate_stream(f, spec.control(), spec.noise(), primary, simuls, spec.n_events,
                           spec.mode, derive_seed(seed, 0x52), latent);
}

// One synthetic experiment: draw a plan from the design spec, add the
// CEC-implied total effect of the synthetic intervention to every event of
// the historical stream, estimate the GATE, and return the estimation error
// against the drawn curve's own gate.
inline double run_synthetic_experiment(const EventStream& base, const EventDensity& f,
                                       const CecCurve& cec, const DesignSpec& design,
                                       EstimatorChoice estimator, double burnin_h,
                                       std::uint64_t seed) {
    const double T = static_cast<double>(base.meta.horizon);
    AssignmentPlan plan = draw_plan(design, T, &f, seed);
    EffectModel model = EffectModel::cec(cec);
    EventStream synth = base;
    for (auto& e : synth.events) e.y += effect_at(model, f, plan, e.t);
    GateEstimate est = (estimator == EstimatorChoice::ht)
                           ? ht_estimate(synth, plan)
                           : ht_burnin_estimate(synth, plan, burnin_h);
    return est.value - cec.gate();
}

// (mse, trimmed_mse, mean_abs); trimmed removes the ceil(0.01 R) largest
// absolute errors before averaging the squares.
inline std::tuple<double, double, double> summarize(const std::vector<double>& errors) {
    if (errors.empty()) throw std::invalid_argument("summarize: empty error list");
    const std::size_t R = errors.size();
    double mse = 0.0, mean_abs = 0.0;
    for (double e : errors) {
        mse += e * e;
        mean_abs += std::fabs(e);
    }
    mse /= static_cast<double>(R);
    mean_abs /= static_cast<double>(R);
    std::vector<double> absed(R);
    for (std::size_t i = 0; i < R; ++i) absed[i] = std::fabs(errors[i]);
    std::sort(absed.begin(), absed.end());
    std::size_t drop = static_cast<std::size_t>(std::ceil(0.01 * static_cast<double>(R)));
    drop = std::min(drop, R - 1);
    double trimmed = 0.0;
    for (std::size_t i = 0; i + drop < R; ++i) trimmed += absed[i] * absed[i];
    trimmed /= static_cast<double>(R - drop);
    return {mse, trimmed, mean_abs};
}

struct DesignScore {
    DesignSpec design;
    std::vector<double> errors;
    double mse = 0.0;
    double trimmed_mse = 0.0;
    double mean_abs = 0.0;

    nlohmann::json to_json() const {
        auto q = [&](double p) {
            std::vector<double> a(errors.size());
            for (std::size_t i = 0; i < errors.size(); ++i) a[i] = std::fabs(errors[i]);
            std::sort(a.begin(), a.end());
            double idx = p * static_cast<double>(a.size() - 1);
            std::size_t lo = static_cast<std::size_t>(std::floor(idx));
            std::size_t hi = std::min(lo + 1, a.size() - 1);
            return a[lo] + (idx - lo) * (a[hi] - a[lo]);
        };
        nlohmann::json j = design.to_json();
        j["label"] = design.label();
        j["mse"] = mse;
        j["trimmed_mse"] = trimmed_mse;
        j["mean_abs"] = mean_abs;
        j["abs_error_quantiles"] = {{"q50", q(0.5)}, {"q90", q(0.9)}, {"q99", q(0.99)}};
        return j;
    }
};

struct SyntheticConfig {
    GeneratorSpec generator;
    std::vector<EventStream> stream_pool;  // optional: draw streams from files instead
    CecEnsemble ensemble;
    std::vector<DesignSpec> candidates;
    EstimatorChoice estimator = EstimatorChoice::ht;
    double burnin_h = 0.0;
    std::size_t replications = 500;
    std::uint64_t seed = 1;
    int threads = 1;
};

struct RankingResult {
    std::vector<DesignScore> scores;  // in candidate order
    std::size_t selected = 0;         // index into scores
};

// Empirical-Bayes design selection: R paired draws of (historical stream,
// CEC) shared across all candidates, one estimation error per candidate per
// draw, selection by minimal MSE. Plan randomness is seeded by the
// candidate's content, so scores are invariant to candidate order.
inline RankingResult rank_designs(const SyntheticConfig& cfg) {
    if (cfg.candidates.empty()) throw std::invalid_argument("rank_designs: no candidates");
    if (cfg.replications < 1) throw std::invalid_argument("rank_designs: R must be >= 1");
    if (cfg.ensemble.curves.empty()) throw std::invalid_argument("rank_designs: empty ensemble");
    const std::size_t D = cfg.candidates.size();
    const std::size_t R = cfg.replications;
    EventDensity f = cfg.generator.density();
    std::optional<LatentNoiseProcess> latent;
    if (cfg.stream_pool.empty() && cfg.generator.mode == OutcomeMode::continuous &&
        cfg.generator.noise().covariance.kind() != CovarianceKind::none)
        latent.emplace(cfg.generator.noise().covariance, cfg.generator.horizon());

    std::vector<std::vector<double>> errors(D, std::vector<double>(R, 0.0));
    parallel_for(R, cfg.threads, [&](std::size_t r) {
        std::uint64_t rs = derive_seed(cfg.seed, r);
        EventStream base;
        if (!cfg.stream_pool.empty()) {
            Rng rng(derive_seed(rs, 0xB0));
            base = cfg.stream_pool[rng.uniform_index(cfg.stream_pool.size())];
        } else {
            base = generate_historical(cfg.generator, derive_seed(rs, 0xB1),
                                       latent ? &*latent : nullptr);
        }
        CecCurve cec = sample_cec(cfg.ensemble, derive_seed(rs, 0xB2));
        for (std::size_t d = 0; d < D; ++d) {
            std::uint64_t plan_seed = derive_seed(rs, cfg.candidates[d].content_hash());
            errors[d][r] = run_synthetic_experiment(base, f, cec, cfg.candidates[d],
                                                    cfg.estimator, cfg.burnin_h, plan_seed);
        }
    });

    RankingResult out;
    out.scores.resize(D);
    for (std::size_t d = 0; d < D; ++d) {
        DesignScore s;
        s.design = cfg.candidates[d];
        s.errors = std::move(errors[d]);
        std::tie(s.mse, s.trimmed_mse, s.mean_abs) = summarize(s.errors);
        out.scores[d] = std::move(s);
    }
    auto better = [&](std::size_t a, std::size_t b) {
        const DesignScore& x = out.scores[a];
        const DesignScore& y = out.scores[b];
        if (x.mse != y.mse) return x.mse < y.mse;
        if (x.design.avg_length != y.design.avg_length)
            return x.design.avg_length < y.design.avg_length;
        return family_rank(x.design.family) < family_rank(y.design.family);
    };
    std::size_t best = 0;
    for (std::size_t d = 1; d < D; ++d)
        if (better(d, best)) best = d;
    out.selected = best;
    return out;
}

}  // namespace switchback
