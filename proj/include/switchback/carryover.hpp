#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "switchback/density.hpp"

namespace switchback {

enum class CarryoverKind { uniform_window, linear_decay, geometric };

// Carryover intensity kernel d^co_t(t') parameterized by the lag u = t - t'.
// The unnormalized shape s(u) is supported on [0, h]; normalization against a
// density is numerical (see normalization_mass), so any density/kernel pair
// composes.
//
// Boundary convention: lookback wraps circularly, i.e. a source time below 0
// maps to the end of the horizon. Under this convention the per-t
// normalization integral equals 1 at every t, the interval-statistics sum
// identities hold exactly, and the interior worked-example formulas apply to
// every interval including the first.
class CarryoverKernel {
  public:
    static CarryoverKernel uniform_window(double h) {
        if (!(h > 0.0)) throw std::invalid_argument("CarryoverKernel: h must be positive");
        CarryoverKernel k;
        k.kind_ = CarryoverKind::uniform_window;
        k.h_ = h;
        return k;
    }

    static CarryoverKernel linear_decay(double h) {
        if (!(h > 0.0)) throw std::invalid_argument("CarryoverKernel: h must be positive");
        CarryoverKernel k;
        k.kind_ = CarryoverKind::linear_decay;
        k.h_ = h;
        return k;
    }

    static CarryoverKernel geometric(double rate) {
        if (!(rate > 0.0 && rate < 1.0))
            throw std::invalid_argument("CarryoverKernel: geometric rate must be in (0, 1)");
        CarryoverKernel k;
        k.kind_ = CarryoverKind::geometric;
        k.rate_ = rate;
        // truncate where the weight drops below 1e-12 to bound the support
        k.h_ = std::ceil(std::log(1e-12) / std::log(rate));
        return k;
    }

    CarryoverKind kind() const { return kind_; }
    double window() const { return h_; }
    double rate() const { return rate_; }

    // support actually used against a horizon; a lookback longer than the
    // horizon would overlap itself after wrapping
    double support(int horizon) const { return std::min(h_, static_cast<double>(horizon)); }

    double shape(double u) const {
        if (u < 0.0 || u > h_) return 0.0;
        switch (kind_) {
            case CarryoverKind::uniform_window: return 1.0;
            case CarryoverKind::linear_decay: return (h_ - u) / h_;
            case CarryoverKind::geometric: return std::pow(rate_, u);
        }
        return 0.0;
    }

    // ∫_{u0}^{u1} s(u) du, exact; caller guarantees 0 <= u0 <= u1 <= support
    double shape_integral(double u0, double u1) const {
        if (u1 <= u0) return 0.0;
        switch (kind_) {
            case CarryoverKind::uniform_window:
                return u1 - u0;
            case CarryoverKind::linear_decay:
                return (u1 - u0) * (h_ - 0.5 * (u0 + u1)) / h_;
            case CarryoverKind::geometric: {
                double lr = std::log(rate_);
                return (std::pow(rate_, u1) - std::pow(rate_, u0)) / lr;
            }
        }
        return 0.0;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        switch (kind_) {
            case CarryoverKind::uniform_window:
                j["variant"] = "uniform_window";
                j["h"] = h_;
                break;
            case CarryoverKind::linear_decay:
                j["variant"] = "linear_decay";
                j["h"] = h_;
                break;
            case CarryoverKind::geometric:
                j["variant"] = "geometric";
                j["rate"] = rate_;
                break;
        }
        return j;
    }

    static CarryoverKernel from_json(const nlohmann::json& j) {
        const std::string v = j.at("variant").get<std::string>();
        if (v == "uniform_window") return uniform_window(j.at("h").get<double>());
        if (v == "linear_decay") return linear_decay(j.at("h").get<double>());
        if (v == "geometric") return geometric(j.at("rate").get<double>());
        throw std::invalid_argument("CarryoverKernel: unknown variant '" + v + "'");
    }

  private:
    CarryoverKind kind_ = CarryoverKind::uniform_window;
    double h_ = 0.0;
    double rate_ = 0.0;
};

// One maximal piece of a lookback window on which the wrapped source time
// stays inside a single minute cell.
struct LookbackSegment {
    int cell;         // minute cell of the wrapped source time
    double src_lo;    // wrapped source interval [src_lo, src_hi] within the cell
    double src_hi;
    double u_lo;      // lag interval [u_lo, u_hi]; u_lo maps to src_hi
    double u_hi;
    double f_value;   // density value on the cell
    double s_mass;    // ∫_{u_lo}^{u_hi} s(u) du
};

// Walks the lookback window of time t against the density's minute cells,
// oldest-to-newest lags first in decreasing source position (wrapping 0 -> T).
template <typename Fn>
inline void for_each_lookback_segment(const CarryoverKernel& k, const EventDensity& f, double t,
                                      Fn&& cb) {
    const int T = f.horizon();
    const double support = k.support(T);
    double u_lo = 0.0;
    while (u_lo < support - 1e-12) {
        double src_hi = t - u_lo;
        double wrapped = std::fmod(src_hi, static_cast<double>(T));
        if (wrapped < 0) wrapped += T;
        int cell = static_cast<int>(std::floor(wrapped));
        if (cell >= T) cell = T - 1;
        double dist_to_edge = wrapped - cell;
        double seg_hi = wrapped;
        if (dist_to_edge <= 1e-12) {       // sitting on a cell boundary: step into the cell below
            cell = (cell == 0) ? T - 1 : cell - 1;
            dist_to_edge = 1.0;
            seg_hi = cell + 1.0;
        }
        double u_hi = std::min(support, u_lo + dist_to_edge);
        double len = u_hi - u_lo;
        cb(LookbackSegment{cell, seg_hi - len, seg_hi, u_lo, u_hi, f.cell_mass(cell),
                           k.shape_integral(u_lo, u_hi)});
        u_lo = u_hi;
    }
}

// D(t) = ∫ s(u) f(t-u) du over the (wrapped) window; the per-t normalizer of
// the kernel, so that ∫ d^co_t(t') f(t') dt' = 1.
inline double normalization_mass(const CarryoverKernel& k, const EventDensity& f, double t) {
    double total = 0.0;
    for_each_lookback_segment(k, f, t,
                              [&](const LookbackSegment& s) { total += s.f_value * s.s_mass; });
    return total;
}

// Normalized kernel value d^co_t(t'). Zero for lags outside the window (in
// particular zero for t' ahead of t).
inline double carryover_weight(const CarryoverKernel& k, const EventDensity& f, double t,
                               double t_prime) {
    const int T = f.horizon();
    if (t < 0.0 || t > T || t_prime < 0.0 || t_prime > T)
        throw std::invalid_argument("carryover_weight: times must lie in [0, T]");
    double u = std::fmod(t - t_prime, static_cast<double>(T));
    if (u < 0) u += T;
    if (u > k.support(T)) return 0.0;
    double s = k.shape(u);
    if (s == 0.0) return 0.0;
    double d = normalization_mass(k, f, t);
    if (d <= 0.0) return 0.0;
    return s / d;
}

}  // namespace switchback
