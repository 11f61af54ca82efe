#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "switchback/design.hpp"
#include "switchback/outcomes.hpp"

namespace switchback {

struct GateEstimate {
    double value = 0.0;
    std::size_t n_used = 0;
    double pi = 0.5;
    double burnin_h = 0.0;

    nlohmann::json to_json() const {
        return {{"value", value}, {"n_used", n_used}, {"pi", pi}, {"burnin_h", burnin_h}};
    }
};

// Horvitz-Thompson estimator of the GATE from event outcomes.
inline GateEstimate ht_estimate(const EventStream& stream, const AssignmentPlan& plan) {
    if (stream.events.empty()) throw std::invalid_argument("ht_estimate: empty stream");
    const double pi = plan.pi;
    if (!(pi > 0.0 && pi < 1.0)) throw std::invalid_argument("ht_estimate: pi must be in (0,1)");
    double sum = 0.0;
    for (const auto& e : stream.events) {
        if (plan.treatment_at(e.t)) sum += e.y / pi;
        else sum -= e.y / (1.0 - pi);
    }
    GateEstimate g;
    g.value = sum / static_cast<double>(stream.events.size());
    g.n_used = stream.events.size();
    g.pi = pi;
    g.burnin_h = 0.0;
    return g;
}

struct EstimationError : std::runtime_error {
    std::size_t n_treated_qualifying = 0;
    std::size_t n_control_qualifying = 0;
    explicit EstimationError(const std::string& msg, std::size_t nt = 0, std::size_t nc = 0)
        : std::runtime_error(msg), n_treated_qualifying(nt), n_control_qualifying(nc) {}
};

// Burn-in variant: keeps only events whose assignment state has been held for
// at least h minutes, weighting by the exact joint probabilities
// P(W_t = 1, W_{t-h} = 1) and P(W_t = 0, W_{t-h} = 0) from the plan's
// assignment law. The h-minute lag is taken circularly, consistent with the
// carryover convention; events whose lagged state is deterministically
// opposite (possible under balanced plans) carry no usable comparison and
// are excluded from the normalizer.
inline GateEstimate ht_burnin_estimate(const EventStream& stream, const AssignmentPlan& plan,
                                       double h) {
    if (h < 0.0) throw std::invalid_argument("ht_burnin_estimate: h must be >= 0");
    if (stream.events.empty()) throw std::invalid_argument("ht_burnin_estimate: empty stream");
    if (h == 0.0) return ht_estimate(stream, plan);
    const double T = plan.partition.horizon;
    double sum = 0.0;
    std::size_t eligible = 0, used = 0, n_t = 0, n_c = 0;
    for (const auto& e : stream.events) {
        JointProbs jp = joint_lag_probs(plan, e.t, h);
        if (jp.p11 <= 0.0 && jp.p00 <= 0.0) continue;  // no comparison possible at this time
        ++eligible;
        double tl = std::fmod(e.t - h, T);
        if (tl < 0) tl += T;
        int w = plan.treatment_at(e.t);
        int wl = plan.treatment_at(tl);
        if (w != wl) continue;
        ++used;
        if (w) {
            sum += e.y / jp.p11;
            ++n_t;
        } else {
            sum -= e.y / jp.p00;
            ++n_c;
        }
    }
    if (n_t == 0 || n_c == 0)
        throw EstimationError("ht_burnin_estimate: an arm has no qualifying events (treated=" +
                                  std::to_string(n_t) + ", control=" + std::to_string(n_c) + ")",
                              n_t, n_c);
    GateEstimate g;
    g.value = sum / static_cast<double>(eligible);
    g.n_used = used;
    g.pi = plan.pi;
    g.burnin_h = h;
    return g;
}

struct RandomizationResult {
    double p_value = 1.0;
    std::size_t draws = 0;
    std::vector<double> null_distribution;
    std::optional<std::pair<double, double>> ci;
};

// Randomization test of the sharp null: re-draw designs from the spec (fresh
// partitions for random families, fresh bits always), recompute the estimator
// on the fixed observed outcomes, and report the fraction of draws at least
// as extreme as the observed estimate.
inline RandomizationResult randomization_pvalue(const EventStream& stream, const DesignSpec& spec,
                                                const EventDensity& f,
                                                const GateEstimate& observed, std::size_t J,
                                                std::uint64_t seed) {
    if (J < 100) throw std::invalid_argument("randomization_pvalue: J must be >= 100");
    RandomizationResult r;
    r.draws = J;
    r.null_distribution.resize(J);
    const double T = static_cast<double>(stream.meta.horizon);
    std::size_t hits = 0;
    for (std::size_t j = 0; j < J; ++j) {
        AssignmentPlan plan = draw_plan(spec, T, &f, derive_seed(seed, j));
        double v = ht_estimate(stream, plan).value;
        r.null_distribution[j] = v;
        if (std::fabs(v) >= std::fabs(observed.value)) ++hits;
    }
    r.p_value = static_cast<double>(hits) / static_cast<double>(J);
    return r;
}

// Confidence interval by inverting the randomization test over a constant
// additive effect family: candidate delta0 is accepted when the sharp-null
// test on outcomes with delta0 removed from treated times does not reject.
// Requires the observed plan to subtract the candidate effect.
inline std::pair<double, double> randomization_ci(const EventStream& stream,
                                                  const AssignmentPlan& observed_plan,
                                                  const DesignSpec& spec, const EventDensity& f,
                                                  std::size_t J, double alpha, std::uint64_t seed,
                                                  int grid_points = 81,
                                                  std::optional<std::pair<double, double>> grid_range =
                                                      std::nullopt) {
    if (!(alpha > 0.0 && alpha < 0.5))
        throw std::invalid_argument("randomization_ci: alpha must be in (0, 0.5)");
    if (J < 100) throw std::invalid_argument("randomization_ci: J must be >= 100");
    if (grid_points < 1) throw std::invalid_argument("randomization_ci: need >= 1 grid point");
    const double T = static_cast<double>(stream.meta.horizon);

    GateEstimate obs = ht_estimate(stream, observed_plan);
    double lo, hi;
    if (grid_range) {
        lo = grid_range->first;
        hi = grid_range->second;
    } else {
        // center the grid at the point estimate, sized from the null spread
        RandomizationResult base =
            randomization_pvalue(stream, spec, f, obs, std::max<std::size_t>(J, 100),
                                 derive_seed(seed, 0xA11CE));
        double spread = 0.0;
        for (double v : base.null_distribution) spread = std::max(spread, std::fabs(v - obs.value));
        double width = 2.0 * spread;
        lo = obs.value - width;
        hi = obs.value + width;
        if (width == 0.0) { lo = hi = obs.value; grid_points = 1; }
    }

    std::vector<int> treated(stream.events.size());
    for (std::size_t i = 0; i < stream.events.size(); ++i)
        treated[i] = observed_plan.treatment_at(stream.events[i].t);

    double acc_lo = std::numeric_limits<double>::infinity();
    double acc_hi = -std::numeric_limits<double>::infinity();
    std::vector<double> grid;
    for (int g = 0; g < grid_points; ++g) {
        double delta0 = (grid_points == 1) ? lo : lo + (hi - lo) * g / (grid_points - 1);
        grid.push_back(delta0);
        EventStream adj = stream;
        for (std::size_t i = 0; i < adj.events.size(); ++i)
            if (treated[i]) adj.events[i].y -= delta0;
        GateEstimate adj_obs = ht_estimate(adj, observed_plan);
        RandomizationResult r =
            randomization_pvalue(adj, spec, f, adj_obs, J, derive_seed(seed, 7000 + g));
        if (r.p_value > alpha) {
            acc_lo = std::min(acc_lo, delta0);
            acc_hi = std::max(acc_hi, delta0);
        }
    }
    if (!(acc_lo <= acc_hi)) {
        std::string msg = "randomization_ci: empty acceptance region over grid [";
        msg += std::to_string(grid.front()) + ", " + std::to_string(grid.back()) + "] with " +
               std::to_string(grid.size()) + " points";
        throw EstimationError(msg);
    }
    return {acc_lo, acc_hi};
}

}  // namespace switchback
