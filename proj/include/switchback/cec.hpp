#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "switchback/cec_curve.hpp"
#include "switchback/outcomes.hpp"
#include "switchback/rng.hpp"
#include "switchback/spline.hpp"

namespace switchback {

// Raw CEC estimate: for each minute-since-switch offset, the difference in
// mean outcomes between treated and control intervals. Offsets are binned by
// floor(t - interval start); bin u feeds curve point dt = u + 1.
inline CecCurve estimate_cec(const EventStream& stream, const AssignmentPlan& plan, int H) {
    if (H < 1) throw std::invalid_argument("estimate_cec: H must be >= 1");
    std::vector<double> sum_t(H, 0.0), sum2_t(H, 0.0), sum_c(H, 0.0), sum2_c(H, 0.0);
    std::vector<std::size_t> n_t(H, 0), n_c(H, 0);
    const IntervalPartition& part = plan.partition;
    for (const auto& e : stream.events) {
        int m = part.interval_of(e.t);
        int off = static_cast<int>(std::floor(e.t - part.lower(m)));
        if (off < 0 || off >= H) continue;
        if (plan.bits[static_cast<std::size_t>(m)]) {
            sum_t[off] += e.y;
            sum2_t[off] += e.y * e.y;
            ++n_t[off];
        } else {
            sum_c[off] += e.y;
            sum2_c[off] += e.y * e.y;
            ++n_c[off];
        }
    }
    std::string missing;
    for (int u = 0; u < H; ++u)
        if (n_t[u] == 0 || n_c[u] == 0) missing += (missing.empty() ? "" : ",") + std::to_string(u + 1);
    if (!missing.empty())
        throw std::runtime_error("estimate_cec: empty treated or control arm at offsets {" +
                                 missing + "}");
    CecCurve curve;
    curve.horizon = H;
    curve.values.resize(H);
    std::vector<double> vars(H, 0.0);
    for (int u = 0; u < H; ++u) {
        double mt = sum_t[u] / n_t[u], mc = sum_c[u] / n_c[u];
        curve.values[u] = mt - mc;
        double vt = (n_t[u] > 1) ? (sum2_t[u] - n_t[u] * mt * mt) / (n_t[u] - 1.0) : 0.0;
        double vc = (n_c[u] > 1) ? (sum2_c[u] - n_c[u] * mc * mc) / (n_c[u] - 1.0) : 0.0;
        vars[u] = vt / n_t[u] + vc / n_c[u];
    }
    curve.variances = std::move(vars);
    return curve;
}

namespace detail {

// CEC restricted to a subset of intervals; bins without both arms are left
// unset (NaN) for the caller to handle.
inline std::vector<double> cec_over_intervals(const EventStream& stream,
                                              const AssignmentPlan& plan,
                                              const std::vector<bool>& use_interval, int H) {
    std::vector<double> sum_t(H, 0.0), sum_c(H, 0.0);
    std::vector<std::size_t> n_t(H, 0), n_c(H, 0);
    const IntervalPartition& part = plan.partition;
    for (const auto& e : stream.events) {
        int m = part.interval_of(e.t);
        if (!use_interval[static_cast<std::size_t>(m)]) continue;
        int off = static_cast<int>(std::floor(e.t - part.lower(m)));
        if (off < 0 || off >= H) continue;
        if (plan.bits[static_cast<std::size_t>(m)]) {
            sum_t[off] += e.y;
            ++n_t[off];
        } else {
            sum_c[off] += e.y;
            ++n_c[off];
        }
    }
    std::vector<double> out(H, std::numeric_limits<double>::quiet_NaN());
    for (int u = 0; u < H; ++u)
        if (n_t[u] > 0 && n_c[u] > 0) out[u] = sum_t[u] / n_t[u] - sum_c[u] / n_c[u];
    return out;
}

}  // namespace detail

// Leave-two-out cross-validation of a smoothing method on a balanced,
// mirrored fixed-duration plan. Each fold holds out one mirrored interval
// pair (opposite assignments), smooths the CEC estimated from the remaining
// intervals, and scores (holdout CEC at H minus smoothed gate)^2. Folds whose
// holdout pair has no events at offset H are skipped.
inline double leave_two_out_cv(const EventStream& stream, const AssignmentPlan& plan,
                               const SmootherChoice& smoother, int H,
                               std::size_t* folds_used = nullptr) {
    if (plan.law != AssignmentLaw::balanced ||
        !plan.partition.is_mirrored(plan.mirror_lag))
        throw std::invalid_argument("leave_two_out_cv: plan must be balanced and mirrored");
    const int M = plan.partition.num_intervals();
    const int half = M / 2;
    double total = 0.0;
    std::size_t used = 0;
    for (int i = 0; i < half; ++i) {
        std::vector<bool> holdout(M, false), training(M, true);
        holdout[static_cast<std::size_t>(i)] = true;
        holdout[static_cast<std::size_t>(i + half)] = true;
        training[static_cast<std::size_t>(i)] = false;
        training[static_cast<std::size_t>(i + half)] = false;
        auto hold = detail::cec_over_intervals(stream, plan, holdout, H);
        if (std::isnan(hold[H - 1])) continue;
        auto train = detail::cec_over_intervals(stream, plan, training, H);
        for (int u = 0; u < H; ++u)
            if (std::isnan(train[u]))
                throw std::runtime_error("leave_two_out_cv: training CEC missing offset " +
                                         std::to_string(u + 1));
        CecCurve c(H, std::move(train));
        double ghat = smoothed_gate(c, smoother);
        double err = hold[H - 1] - ghat;
        total += err * err;
        ++used;
    }
    if (used == 0) throw std::runtime_error("leave_two_out_cv: no usable folds");
    if (folds_used) *folds_used = used;
    return total / static_cast<double>(used);
}

struct CecEnsemble {
    std::vector<CecCurve> curves;
    nlohmann::json provenance;
};

inline CecCurve sample_cec(const CecEnsemble& ens, std::uint64_t seed) {
    if (ens.curves.empty()) throw std::invalid_argument("sample_cec: empty ensemble");
    Rng rng(seed);
    return ens.curves[rng.uniform_index(ens.curves.size())];
}

inline bool curve_changes_sign(const std::vector<double>& v, double tol = 1e-12) {
    bool pos = false, neg = false;
    for (double x : v) {
        if (x > tol) pos = true;
        if (x < -tol) neg = true;
    }
    return pos && neg;
}

inline bool curve_nonmonotone(const std::vector<double>& v, double tol = 1e-12) {
    bool up = false, down = false;
    for (std::size_t i = 1; i < v.size(); ++i) {
        double d = v[i] - v[i - 1];
        if (d > tol) up = true;
        if (d < -tol) down = true;
    }
    return up && down;
}

// Synthetic CEC prior generator: constraint-satisfying piecewise cubics with
// controllable sign-change and non-monotonicity fractions (rejection
// sampling per curve). Stands in for an empirical ensemble of smoothed CECs.
struct SynthCecSpec {
    std::size_t count = 100;
    int H = 56;
    double amplitude = 1.0;              // scale of the curve shapes
    double gate_scale = 0.0;             // sd of an added constant level
    double sign_change_fraction = -1.0;  // target fraction in [0,1]; < 0 leaves it free
    double nonmonotone_fraction = -1.0;  // likewise
};

inline CecEnsemble synth_cec_ensemble(const SynthCecSpec& spec, std::uint64_t seed) {
    if (spec.count < 1) throw std::invalid_argument("synth_cec_ensemble: count must be >= 1");
    if (spec.H < 8) throw std::invalid_argument("synth_cec_ensemble: H must be >= 8");
    auto basis = linalg::nullspace(detail::spline_constraint_matrix(0.5), 4, 8);
    CecEnsemble ens;
    std::size_t realized_sign = 0, realized_nonmono = 0;
    for (std::size_t i = 0; i < spec.count; ++i) {
        Rng rng(derive_seed(seed, i));
        bool want_sign = spec.sign_change_fraction >= 0.0 &&
                         rng.uniform01() < spec.sign_change_fraction;
        bool check_sign = spec.sign_change_fraction >= 0.0 && spec.amplitude > 0.0;
        bool want_nonmono = spec.nonmonotone_fraction >= 0.0 &&
                            rng.uniform01() < spec.nonmonotone_fraction;
        bool check_nonmono = spec.nonmonotone_fraction >= 0.0 && spec.amplitude > 0.0;
        std::vector<double> vals(static_cast<std::size_t>(spec.H), 0.0);
        for (int attempt = 0; attempt < 1000; ++attempt) {
            std::array<double, 8> theta{};
            for (int j = 0; j < 4; ++j) {
                double b = rng.normal();
                for (int c = 0; c < 8; ++c) theta[c] += b * basis[j][c];
            }
            double level = spec.gate_scale * rng.normal();
            double maxabs = 0.0;
            for (int u = 1; u <= spec.H; ++u) {
                double x = static_cast<double>(u) / spec.H;
                const double* co = (x < 0.5) ? theta.data() : theta.data() + 4;
                double g = co[0] + x * (co[1] + x * (co[2] + x * co[3]));
                vals[u - 1] = g;
                maxabs = std::max(maxabs, std::fabs(g));
            }
            double scale = (maxabs > 0.0) ? spec.amplitude / maxabs : 0.0;
            for (auto& x : vals) x = x * scale + level;
            bool ok = true;
            if (check_sign && curve_changes_sign(vals) != want_sign) ok = false;
            if (ok && check_nonmono && curve_nonmonotone(vals) != want_nonmono) ok = false;
            if (ok) break;
        }
        if (curve_changes_sign(vals)) ++realized_sign;
        if (curve_nonmonotone(vals)) ++realized_nonmono;
        ens.curves.emplace_back(spec.H, vals);
    }
    ens.provenance = {{"generator", "synthetic"},
                      {"count", spec.count},
                      {"H", spec.H},
                      {"amplitude", spec.amplitude},
                      {"gate_scale", spec.gate_scale},
                      {"target_sign_change_fraction", spec.sign_change_fraction},
                      {"target_nonmonotone_fraction", spec.nonmonotone_fraction},
                      {"realized_sign_change_fraction",
                       static_cast<double>(realized_sign) / spec.count},
                      {"realized_nonmonotone_fraction",
                       static_cast<double>(realized_nonmono) / spec.count}};
    return ens;
}

inline void write_ensemble(const CecEnsemble& ens, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["count"] = ens.curves.size();
    manifest["provenance"] = ens.provenance;
    std::vector<std::string> files;
    for (std::size_t i = 0; i < ens.curves.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "cec_%05zu.csv", i);
        ens.curves[i].write_csv((fs::path(dir) / name).string());
        files.emplace_back(name);
    }
    manifest["files"] = files;
    std::ofstream out(fs::path(dir) / "manifest.json");
    out << manifest.dump(2) << '\n';
}

inline CecEnsemble read_ensemble(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw std::runtime_error("read_ensemble: no manifest in " + dir);
    nlohmann::json manifest;
    in >> manifest;
    CecEnsemble ens;
    ens.provenance = manifest.value("provenance", nlohmann::json::object());
    for (const auto& f : manifest.at("files"))
        ens.curves.push_back(CecCurve::read_csv((fs::path(dir) / f.get<std::string>()).string()));
    return ens;
}

}  // namespace switchback
