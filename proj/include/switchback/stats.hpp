#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "switchback/effects.hpp"
#include "switchback/outcomes.hpp"

namespace switchback {

// Interval-level statistics used by the bias and MSE decomposition.
// All per-minute profiles are step functions, and the banded kernels are
// integrated analytically within cells, so the sum identities hold to
// machine precision.
struct IntervalStats {
    int M = 0;
    std::vector<double> mu;            // fraction of events per interval
    std::vector<double> mu_yctrl;      // integrated mean control outcome
    std::vector<double> v;             // integrated measurement-error variance
    std::vector<double> c;             // integrated pairwise error covariance
    std::vector<double> xi;            // integrated total treatment effect
    std::vector<double> xi_inst_dem;   // demeaned integrated instantaneous effect
    std::vector<double> xi_co_dem;     // demeaned integrated carryover effect
    std::vector<double> i_matrix;      // I^(m,k), row-major M x M
    double delta_inst = 0.0;
    double delta_co = 0.0;
    double delta_gate = 0.0;
    double pi = 0.5;

    // simultaneous interventions (additive case):
    // per-interval mass of the summed simultaneous total effects, and
    // per-(intervention, m, m') instantaneous / carryover overlap masses
    std::vector<double> simul_gate_mass;             // size M
    std::vector<std::vector<double>> simul_inst_mass;  // per l: M x Ms row-major
    std::vector<std::vector<double>> simul_co_mass;    // per l: M x Ms row-major
    std::vector<int> simul_M;

    double imat(int m, int k) const { return i_matrix[static_cast<std::size_t>(m) * M + k]; }
};

struct SimulInterventionSpec {
    EffectModel model;  // kernel form required for closed forms
    IntervalPartition partition;
};

namespace detail {

// Per-interval masses of the normalized carryover window of time t:
// out[k] = ∫_{t' in I_k} d^co_t(t') f(t') dt'. Returns the normalizer D(t).
inline double window_interval_masses(const CarryoverKernel& kern, const EventDensity& f,
                                     const IntervalPartition& part, double t,
                                     std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    double den = 0.0;
    for_each_lookback_segment(kern, f, t, [&](const LookbackSegment& s) {
        den += s.f_value * s.s_mass;
        if (s.f_value == 0.0 || s.s_mass == 0.0) return;
        double lo = std::max(s.src_lo, 0.0);
        int m = part.interval_of(std::min(lo + 1e-12, part.horizon));
        double pos = lo;
        while (pos < s.src_hi - 1e-12) {
            double up = std::min(s.src_hi, part.upper(m));
            if (up > pos) {
                double su_lo = s.u_lo + (s.src_hi - up);
                double su_hi = s.u_lo + (s.src_hi - pos);
                out[static_cast<std::size_t>(m)] += s.f_value * kern.shape_integral(su_lo, su_hi);
            }
            pos = std::max(pos, up);
            if (pos < s.src_hi - 1e-12) {
                if (m + 1 >= part.num_intervals()) break;
                ++m;
            }
        }
    });
    if (den > 0.0)
        for (auto& x : out) x /= den;
    return den;
}

// Evaluation segments: minute-cell boundaries joined with every partition
// endpoint and its wrapped image shifted by each kernel support, so that the
// integrands are smooth on every segment.
inline std::vector<double> evaluation_breakpoints(double T,
                                                  const std::vector<const IntervalPartition*>& parts,
                                                  const std::vector<double>& supports) {
    std::vector<double> bp;
    bp.reserve(static_cast<std::size_t>(T) + 64);
    for (double x = 0.0; x < T; x += 1.0) bp.push_back(x);
    bp.push_back(T);
    for (std::size_t p = 0; p < parts.size(); ++p) {
        for (double e : parts[p]->endpoints) {
            bp.push_back(std::clamp(e, 0.0, T));
            double img = std::fmod(e + supports[p], T);
            if (img < 0) img += T;
            bp.push_back(img);
        }
    }
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end(),
                         [](double a, double b) { return std::fabs(a - b) < 1e-12; }),
             bp.end());
    return bp;
}

}  // namespace detail

// Computes every interval-level statistic by quadrature on the minute grid
// with analytic within-cell integration of the banded kernels.
inline IntervalStats interval_stats(const IntervalPartition& partition, const EventDensity& f,
                                    const ControlProfile& ctrl, const NoiseModel& noise,
                                    const EffectModel& primary,
                                    const std::vector<SimulInterventionSpec>& simuls = {}) {
    if (!primary.is_kernel())
        throw std::invalid_argument(
            "interval_stats: closed forms need a kernel-form primary effect; "
            "use mse_monte_carlo for CEC effects");
    for (const auto& s : simuls)
        if (!s.model.is_kernel())
            throw std::invalid_argument(
                "interval_stats: closed forms need kernel-form simultaneous effects; "
                "use mse_monte_carlo instead");
    const double T = partition.horizon;
    if (static_cast<double>(f.horizon()) != T)
        throw std::invalid_argument("interval_stats: density horizon mismatch");
    const KernelEffect& ke = primary.as_kernel();

    IntervalStats st;
    const int M = partition.num_intervals();
    st.M = M;
    st.mu.assign(M, 0.0);
    st.mu_yctrl.assign(M, 0.0);
    st.v.assign(M, 0.0);
    st.c.assign(M, 0.0);
    st.xi.assign(M, 0.0);
    st.xi_inst_dem.assign(M, 0.0);
    st.xi_co_dem.assign(M, 0.0);
    st.i_matrix.assign(static_cast<std::size_t>(M) * M, 0.0);
    st.simul_gate_mass.assign(M, 0.0);
    for (const auto& s : simuls) {
        st.simul_M.push_back(s.partition.num_intervals());
        st.simul_inst_mass.emplace_back(static_cast<std::size_t>(M) * s.partition.num_intervals(),
                                        0.0);
        st.simul_co_mass.emplace_back(static_cast<std::size_t>(M) * s.partition.num_intervals(),
                                      0.0);
    }

    std::vector<const IntervalPartition*> parts{&partition};
    std::vector<double> supports{ke.kernel.support(f.horizon())};
    for (const auto& s : simuls) {
        parts.push_back(&s.partition);
        supports.push_back(s.model.as_kernel().kernel.support(f.horizon()));
    }
    const std::vector<double> bp = detail::evaluation_breakpoints(T, parts, supports);

    std::vector<double> xi_inst(M, 0.0), xi_co(M, 0.0);
    std::vector<double> col(M, 0.0);
    std::vector<std::vector<double>> scol;
    for (const auto& s : simuls) scol.emplace_back(s.partition.num_intervals(), 0.0);

    for (std::size_t b = 0; b + 1 < bp.size(); ++b) {
        const double lo = bp[b], hi = bp[b + 1];
        const double len = hi - lo;
        if (len <= 0.0) continue;
        const double tm = 0.5 * (lo + hi);
        const int m = partition.interval_of(tm);
        const double fv = f.value_at(tm);
        const double w = fv * len;
        if (w == 0.0 && len == 0.0) continue;
        st.mu[m] += w;
        st.mu_yctrl[m] += ctrl.value_at(tm) * w;
        st.v[m] += noise.sigma2.at_time(tm) * w;
        const double dinst = ke.delta_inst.at_time(tm);
        const double dco = ke.delta_co.at_time(tm);
        xi_inst[m] += dinst * w;
        xi_co[m] += dco * w;
        st.delta_inst += dinst * w;
        st.delta_co += dco * w;
        if (w > 0.0 && dco != 0.0) {
            detail::window_interval_masses(ke.kernel, f, partition, tm, col);
            double* row = &st.i_matrix[static_cast<std::size_t>(m) * M];
            for (int k = 0; k < M; ++k) row[k] += dco * w * col[k];
        }
        for (std::size_t l = 0; l < simuls.size(); ++l) {
            const KernelEffect& se = simuls[l].model.as_kernel();
            const double sinst = se.delta_inst.at_time(tm);
            const double sco = se.delta_co.at_time(tm);
            st.simul_gate_mass[m] += (sinst + sco) * w;
            const int Ms = st.simul_M[l];
            const int ms = simuls[l].partition.interval_of(tm);
            st.simul_inst_mass[l][static_cast<std::size_t>(m) * Ms + ms] += sinst * w;
            if (w > 0.0 && sco != 0.0) {
                detail::window_interval_masses(se.kernel, f, simuls[l].partition, tm, scol[l]);
                double* srow = &st.simul_co_mass[l][static_cast<std::size_t>(m) * Ms];
                for (int k = 0; k < Ms; ++k) srow[k] += sco * w * scol[l][k];
            }
        }
    }

    st.delta_gate = st.delta_inst + st.delta_co;
    for (int m = 0; m < M; ++m) {
        st.xi[m] = xi_inst[m] + xi_co[m];
        st.xi_inst_dem[m] = xi_inst[m] - st.delta_inst * st.mu[m];
        st.xi_co_dem[m] = xi_co[m] - st.delta_co * st.mu[m];
    }

    // C^(m): banded double integral with exact box integrals over cell pairs,
    // heteroskedastic scale folded into the per-cell weights
    if (noise.covariance.kind() != CovarianceKind::none) {
        const double band = noise.covariance.window();
        for (int m = 0; m < M; ++m) {
            const double a = partition.lower(m), bnd = partition.upper(m);
            if (bnd <= a) continue;
            int c0 = static_cast<int>(std::floor(a));
            int c1 = static_cast<int>(std::ceil(bnd)) - 1;
            double total = 0.0;
            for (int ci = c0; ci <= c1; ++ci) {
                double a1 = std::max(a, static_cast<double>(ci));
                double b1 = std::min(bnd, static_cast<double>(ci) + 1.0);
                if (b1 <= a1) continue;
                double wi = f.cell_mass(std::min(ci, f.horizon() - 1)) *
                            std::sqrt(noise.covariance.scale_at(ci + 0.5));
                if (wi == 0.0) continue;
                int cj_hi = std::min(c1, static_cast<int>(std::ceil(b1 + band)));
                for (int cj = ci; cj <= cj_hi; ++cj) {
                    double a2 = std::max(a, static_cast<double>(cj));
                    double b2 = std::min(bnd, static_cast<double>(cj) + 1.0);
                    if (b2 <= a2) continue;
                    if (a2 - b1 >= band) break;
                    double wj = f.cell_mass(std::min(cj, f.horizon() - 1)) *
                                std::sqrt(noise.covariance.scale_at(cj + 0.5));
                    if (wj == 0.0) continue;
                    double box = noise.covariance.box_integral(a1, b1, a2, b2);
                    total += (cj == ci ? 1.0 : 2.0) * wi * wj * box;
                }
            }
            st.c[m] = total;
        }
    }
    return st;
}

// Theorem-style bias decomposition: carryover bias is sum_m I^(m) - delta_co;
// the simultaneous-intervention bias is zero under additive effects (the only
// case the closed forms support).
inline std::pair<double, double> bias_closed_form(const IntervalStats& st) {
    double sum_own = 0.0;
    for (int m = 0; m < st.M; ++m) sum_own += st.imat(m, m);
    return {sum_own - st.delta_co, 0.0};
}

struct MseBreakdown {
    double var_meas = 0.0;
    double bias_carryover = 0.0;
    double bias_simul = 0.0;
    double var_inst_carryover = 0.0;
    double e_simul_sq = 0.0;
    double cross_simul = 0.0;
    double total_mse = 0.0;
    std::size_t n = 0;

    nlohmann::json to_json() const {
        return {{"var_meas", var_meas},
                {"bias_carryover", bias_carryover},
                {"bias_simul", bias_simul},
                {"var_inst_carryover", var_inst_carryover},
                {"e_simul_sq", e_simul_sq},
                {"cross_simul", cross_simul},
                {"total_mse", total_mse},
                {"n", n}};
    }
};

// Closed-form MSE assembly:
//   total = var_meas + bias_carryover^2 + var_inst_carryover
//         + e_simul_sq + 2 * cross_simul
// valid for kernel effects, additive interventions and i.i.d. pi = 1/2
// assignment.
inline MseBreakdown mse_closed_form(const IntervalStats& st, std::size_t n) {
    if (n < 1) throw std::invalid_argument("mse_closed_form: n must be >= 1");
    if (std::fabs(st.pi - 0.5) > 1e-12)
        throw std::invalid_argument("mse_closed_form: closed forms assume pi = 1/2");
    MseBreakdown b;
    b.n = n;
    const double nd = static_cast<double>(n);
    for (int m = 0; m < st.M; ++m)
        b.var_meas += 4.0 * (st.v[m] / nd + st.c[m] * (nd - 1.0) / nd);
    auto [bias_co, bias_s] = bias_closed_form(st);
    b.bias_carryover = bias_co;
    b.bias_simul = bias_s;
    for (int m = 0; m < st.M; ++m) {
        double term = st.xi[m] + 2.0 * st.mu_yctrl[m];
        b.var_inst_carryover += term * term;
    }
    for (int m = 0; m < st.M; ++m)
        for (int k = 0; k < st.M; ++k) {
            if (k == m) continue;
            b.var_inst_carryover += st.imat(m, k) * st.imat(m, k) + st.imat(m, k) * st.imat(k, m);
        }
    for (int m = 0; m < st.M; ++m) {
        double g = st.simul_gate_mass[m];
        b.e_simul_sq += g * g;
        b.cross_simul += (st.xi[m] + 2.0 * st.mu_yctrl[m]) * g;
    }
    for (std::size_t l = 0; l < st.simul_inst_mass.size(); ++l) {
        const int Ms = st.simul_M[l];
        for (int m = 0; m < st.M; ++m)
            for (int k = 0; k < Ms; ++k) {
                double x = st.simul_inst_mass[l][static_cast<std::size_t>(m) * Ms + k] +
                           st.simul_co_mass[l][static_cast<std::size_t>(m) * Ms + k];
                b.e_simul_sq += x * x;
            }
    }
    b.total_mse = b.var_meas + b.bias_carryover * b.bias_carryover + b.var_inst_carryover +
                  b.e_simul_sq + 2.0 * b.cross_simul;
    return b;
}

// Variance term of a balanced mirrored design: the mean control outcome
// cancels between complementary halves, leaving
// sum_m Xi^2 + cross-interval carryover terms.
inline double balanced_variance_terms(const IntervalStats& st, const IntervalPartition& partition,
                                      double balance_period) {
    if (!partition.is_mirrored(balance_period > 0.0 ? balance_period : partition.horizon / 2.0))
        throw std::invalid_argument("balanced_variance_terms: plan is not a mirrored design");
    double total = 0.0;
    for (int m = 0; m < st.M; ++m) total += st.xi[m] * st.xi[m];
    for (int m = 0; m < st.M; ++m)
        for (int k = 0; k < st.M; ++k) {
            if (k == m) continue;
            total += st.imat(m, k) * st.imat(m, k) + st.imat(m, k) * st.imat(k, m);
        }
    return total;
}

}  // namespace switchback
