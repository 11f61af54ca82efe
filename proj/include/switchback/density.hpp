#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "switchback/rng.hpp"

namespace switchback {

// All quadrature in the toolkit discretizes onto a 1-minute grid over
// [0, horizon]. Cell k covers [k, k+1).
struct MinuteGrid {
    int horizon = 0;
};

enum class DensityKind { uniform, sinusoid, empirical };

// Event density f(t) on [0, T]. Canonical form is a per-minute step function
// with unit total mass; the sinusoid variant is sampled at cell midpoints at
// construction. Samplers, quadrature and the closed-form statistics all see
// the identical step function, so Monte Carlo and closed forms agree exactly.
class EventDensity {
  public:
    static EventDensity uniform(int horizon) {
        EventDensity d;
        d.kind_ = DensityKind::uniform;
        d.init(std::vector<double>(check_horizon(horizon), 1.0));
        return d;
    }

    static EventDensity sinusoid(int horizon, double a1, double a2, double a3, double a4) {
        if (a4 <= std::fabs(a1))
            throw std::invalid_argument("EventDensity: sinusoid requires a4 > |a1| (positive density)");
        EventDensity d;
        d.kind_ = DensityKind::sinusoid;
        d.a_ = {a1, a2, a3, a4};
        std::vector<double> w(check_horizon(horizon));
        for (int k = 0; k < horizon; ++k) {
            double t = k + 0.5;
            w[k] = a1 * std::sin(a2 * t + a3) + a4;
        }
        d.init(std::move(w));
        return d;
    }

    static EventDensity empirical(std::vector<double> per_minute_weights) {
        check_horizon(static_cast<int>(per_minute_weights.size()));
        double total = 0.0;
        for (double w : per_minute_weights) {
            if (!(w >= 0.0) || !std::isfinite(w))
                throw std::invalid_argument("EventDensity: empirical weights must be finite and nonnegative");
            total += w;
        }
        if (total <= 0.0)
            throw std::invalid_argument("EventDensity: empirical weights must have positive total mass");
        EventDensity d;
        d.kind_ = DensityKind::empirical;
        d.init(std::move(per_minute_weights));
        return d;
    }

    int horizon() const { return static_cast<int>(mass_.size()); }
    DensityKind kind() const { return kind_; }

    // mass of minute cell k; equals the density value on that cell
    double cell_mass(int k) const { return mass_[static_cast<std::size_t>(k)]; }

    // density value at t (per-minute units)
    double value_at(double t) const {
        int k = cell_index(t);
        return mass_[static_cast<std::size_t>(k)];
    }

    // cell index with wrap-around in minutes; the horizon is treated as
    // circular for lookback windows
    int cell_index_wrapped(double t) const {
        int T = horizon();
        double w = std::fmod(t, static_cast<double>(T));
        if (w < 0) w += T;
        int k = static_cast<int>(std::floor(w));
        if (k >= T) k = T - 1;
        return k;
    }

    // ∫_a^b f(t) dt of the step density; exactly additive over partitions
    double mass(double a, double b) const {
        int T = horizon();
        if (!(a <= b) || a < 0.0 || b > static_cast<double>(T))
            throw std::invalid_argument("density_mass: need 0 <= a <= b <= T");
        if (a == b) return 0.0;
        int ka = static_cast<int>(std::floor(a));
        int kb = static_cast<int>(std::ceil(b)) - 1;
        if (kb >= T) kb = T - 1;
        if (ka == kb) return mass_[ka] * (b - a);
        double total = mass_[ka] * (ka + 1 - a);
        total += cum_[kb] - cum_[ka + 1];
        total += mass_[kb] * (b - kb);
        return total;
    }

    // cumulative mass of cells [0, k); cum_[T] == 1
    double cdf_at_cell(int k) const { return cum_[static_cast<std::size_t>(k)]; }

    // n i.i.d. draws via inverse CDF over cells plus uniform jitter within the
    // chosen minute; deterministic given seed, unsorted
    std::vector<double> sample(std::size_t n, std::uint64_t seed) const {
        Rng rng(seed);
        return sample(n, rng);
    }

    std::vector<double> sample(std::size_t n, Rng& rng) const {
        std::vector<double> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(sample_one(rng));
        return out;
    }

    double sample_one(Rng& rng) const {
        double u = rng.uniform01();
        auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
        int k = static_cast<int>(std::distance(cum_.begin(), it)) - 1;
        if (k < 0) k = 0;
        if (k >= horizon()) k = horizon() - 1;
        while (mass_[k] <= 0.0 && k + 1 < horizon()) ++k;  // skip empty cells at ties
        double frac = (u - cum_[k]) / mass_[k];
        frac = std::clamp(frac, 0.0, std::nextafter(1.0, 0.0));
        return k + frac;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        switch (kind_) {
            case DensityKind::uniform:
                j["variant"] = "uniform";
                j["horizon_minutes"] = horizon();
                break;
            case DensityKind::sinusoid:
                j["variant"] = "sinusoid";
                j["horizon_minutes"] = horizon();
                j["a1"] = a_[0];
                j["a2"] = a_[1];
                j["a3"] = a_[2];
                j["a4"] = a_[3];
                break;
            case DensityKind::empirical:
                j["variant"] = "empirical";
                j["weights"] = raw_;
                break;
        }
        return j;
    }

    static EventDensity from_json(const nlohmann::json& j) {
        const std::string v = j.at("variant").get<std::string>();
        if (v == "uniform") return uniform(j.at("horizon_minutes").get<int>());
        if (v == "sinusoid")
            return sinusoid(j.at("horizon_minutes").get<int>(), j.at("a1").get<double>(),
                            j.at("a2").get<double>(), j.at("a3").get<double>(),
                            j.at("a4").get<double>());
        if (v == "empirical") return empirical(j.at("weights").get<std::vector<double>>());
        throw std::invalid_argument("EventDensity: unknown variant '" + v + "'");
    }

  private:
    static int check_horizon(int horizon) {
        if (horizon <= 0) throw std::invalid_argument("EventDensity: horizon must be positive");
        return horizon;
    }

    int cell_index(double t) const {
        int T = horizon();
        if (t < 0.0 || t > static_cast<double>(T))
            throw std::invalid_argument("EventDensity: t outside [0, T]");
        int k = static_cast<int>(std::floor(t));
        if (k >= T) k = T - 1;
        return k;
    }

    void init(std::vector<double> w) {
        raw_ = w;
        double total = 0.0;
        for (double x : w) total += x;
        mass_.resize(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) mass_[i] = w[i] / total;
        cum_.resize(w.size() + 1);
        cum_[0] = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) cum_[i + 1] = cum_[i] + mass_[i];
        cum_.back() = 1.0;
    }

    DensityKind kind_ = DensityKind::uniform;
    std::array<double, 4> a_{};        // sinusoid parameters
    std::vector<double> raw_;          // pre-normalization weights
    std::vector<double> mass_;         // per-minute masses, sum to 1
    std::vector<double> cum_;          // cumulative masses, size T+1
};

inline double density_mass(const EventDensity& f, double a, double b) { return f.mass(a, b); }

inline std::vector<double> sample_event_times(const EventDensity& f, std::size_t n,
                                              std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_event_times: n must be >= 1");
    return f.sample(n, seed);
}

}  // namespace switchback
