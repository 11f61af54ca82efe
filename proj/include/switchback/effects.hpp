#pragma once

#include <cmath>
#include <stdexcept>
#include <variant>

#include "switchback/carryover.hpp"
#include "switchback/cec_curve.hpp"
#include "switchback/covariance.hpp"
#include "switchback/design.hpp"
#include "switchback/density.hpp"

namespace switchback {

// Treatment effect model of one intervention. Either the kernel form
// (instantaneous + carryover intensity against a kernel) or a cumulative
// effect curve applied as a linear time-invariant increment convolution.
struct KernelEffect {
    MinuteSeries delta_inst;
    MinuteSeries delta_co;
    CarryoverKernel kernel;
};

struct CecEffect {
    CecCurve curve;
};

class EffectModel {
  public:
    static EffectModel kernel(MinuteSeries delta_inst, MinuteSeries delta_co, CarryoverKernel k) {
        EffectModel m;
        m.model_ = KernelEffect{std::move(delta_inst), std::move(delta_co), std::move(k)};
        return m;
    }
    static EffectModel kernel_const(double delta_inst, double delta_co, CarryoverKernel k) {
        return kernel(MinuteSeries::constant(delta_inst), MinuteSeries::constant(delta_co),
                      std::move(k));
    }
    static EffectModel cec(CecCurve curve) {
        EffectModel m;
        m.model_ = CecEffect{std::move(curve)};
        return m;
    }

    bool is_kernel() const { return std::holds_alternative<KernelEffect>(model_); }
    const KernelEffect& as_kernel() const { return std::get<KernelEffect>(model_); }
    const CecEffect& as_cec() const { return std::get<CecEffect>(model_); }

  private:
    std::variant<KernelEffect, CecEffect> model_;
};

// Fraction of the normalized carryover window that is in the treated state
// under the plan, i.e. ∫ w_{t'} d^co_t(t') f(t') dt'.
inline double treated_window_fraction(const CarryoverKernel& k, const EventDensity& f,
                                      const AssignmentPlan& plan, double t) {
    double num = 0.0, den = 0.0;
    const IntervalPartition& part = plan.partition;
    for_each_lookback_segment(k, f, t, [&](const LookbackSegment& s) {
        den += s.f_value * s.s_mass;
        if (s.f_value == 0.0 || s.s_mass == 0.0) return;
        double lo = std::max(s.src_lo, 0.0);
        int m = part.interval_of(std::min(lo + 1e-12, part.horizon));
        double pos = lo;
        while (pos < s.src_hi - 1e-12) {
            double up = std::min(s.src_hi, part.upper(m));
            if (up > pos && plan.bits[static_cast<std::size_t>(m)]) {
                // map source sub-range back to lags: u = u_lo + (src_hi - x)
                double su_lo = s.u_lo + (s.src_hi - up);
                double su_hi = s.u_lo + (s.src_hi - pos);
                num += s.f_value * k.shape_integral(su_lo, su_hi);
            }
            pos = std::max(pos, up);
            if (pos < s.src_hi - 1e-12) {
                if (m + 1 >= part.num_intervals()) break;
                ++m;
            }
        }
    });
    return (den > 0.0) ? num / den : 0.0;
}

// Effect of the plan's treatment history on the outcome at time t.
//
// Kernel form: w_t * delta_inst_t + delta_co_t * treated fraction of the
// normalized carryover window (lookback wraps circularly, matching the
// interval statistics).
//
// CEC form: sum over integer lags u of w(t - u - 0.5) * increment(u); times
// before the experiment are held at control, so the effect ramps in over the
// first H minutes.
inline double effect_at(const EffectModel& model, const EventDensity& f,
                        const AssignmentPlan& plan, double t) {
    if (t < 0.0 || t > plan.partition.horizon)
        throw std::invalid_argument("effect_at: t outside horizon");
    if (model.is_kernel()) {
        const KernelEffect& ke = model.as_kernel();
        double inst = plan.treatment_at(t) * ke.delta_inst.at_time(t);
        double co = ke.delta_co.at_time(t) * treated_window_fraction(ke.kernel, f, plan, t);
        return inst + co;
    }
    const CecCurve& c = model.as_cec().curve;
    double total = 0.0;
    for (int u = 0; u < c.horizon; ++u) {
        double src = t - u - 0.5;
        if (src < 0.0) break;  // pre-experiment times are control
        if (plan.treatment_at(src)) total += c.increment(u);
    }
    return total;
}

// Global average treatment effect implied by the model: the density-weighted
// total effect under indefinite treatment.
inline double gate_of(const EffectModel& model, const EventDensity& f) {
    if (model.is_kernel()) {
        const KernelEffect& ke = model.as_kernel();
        double total = 0.0;
        for (int k = 0; k < f.horizon(); ++k) {
            double t = k + 0.5;
            total += (ke.delta_inst.at_time(t) + ke.delta_co.at_time(t)) * f.cell_mass(k);
        }
        return total;
    }
    return model.as_cec().curve.gate();
}

}  // namespace switchback
