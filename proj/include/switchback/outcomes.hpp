#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "switchback/covariance.hpp"
#include "switchback/effects.hpp"

namespace switchback {

// Mean control outcome Y_t(0,...,0), a periodic per-minute profile.
struct ControlProfile {
    MinuteSeries series;

    ControlProfile() = default;
    explicit ControlProfile(MinuteSeries s) : series(std::move(s)) {}
    static ControlProfile constant(double c) { return ControlProfile(MinuteSeries::constant(c)); }
    static ControlProfile daily_sinusoid(double mean, double amplitude, double phase = 0.0,
                                         int period = 1440) {
        std::vector<double> v(static_cast<std::size_t>(period));
        for (int k = 0; k < period; ++k)
            v[k] = mean + amplitude * std::sin(2.0 * M_PI * (k + 0.5) / period + phase);
        return ControlProfile(MinuteSeries(std::move(v)));
    }

    double value_at(double t) const { return series.at_time(t); }
};

struct NoiseModel {
    CovarianceKernel covariance;
    MinuteSeries sigma2 = MinuteSeries::constant(0.0);

    void validate(int horizon) const {
        for (int k = 0; k < horizon; ++k) {
            double t = k + 0.5;
            double v = sigma2.at_time(t);
            double c0 = covariance.eval(t, t);
            if (v < c0 - 1e-12)
                throw std::invalid_argument(
                    "NoiseModel: sigma2(t) must dominate the covariance kernel at lag 0");
        }
    }
};

enum class OutcomeMode { continuous, binary };

inline std::string mode_name(OutcomeMode m) {
    return m == OutcomeMode::continuous ? "continuous" : "binary";
}

struct Event {
    double t;
    double y;
};

struct StreamMeta {
    int horizon = 0;
    std::size_t n = 0;
    OutcomeMode mode = OutcomeMode::continuous;
    std::uint64_t seed = 0;
    double clamp_rate = 0.0;      // fraction of events with |clamp adjustment| > 0.05
    bool clamp_warning = false;   // true when that fraction exceeds 1%

    nlohmann::json to_json() const {
        return {{"horizon_minutes", horizon}, {"n", n},        {"mode", mode_name(mode)},
                {"seed", seed},               {"clamp_rate", clamp_rate},
                {"clamp_warning", clamp_warning}};
    }
    static StreamMeta from_json(const nlohmann::json& j) {
        StreamMeta m;
        m.horizon = j.at("horizon_minutes").get<int>();
        m.n = j.at("n").get<std::size_t>();
        m.mode = j.at("mode").get<std::string>() == "binary" ? OutcomeMode::binary
                                                             : OutcomeMode::continuous;
        m.seed = j.at("seed").get<std::uint64_t>();
        m.clamp_rate = j.value("clamp_rate", 0.0);
        m.clamp_warning = j.value("clamp_warning", false);
        return m;
    }
};

struct EventStream {
    std::vector<Event> events;
    StreamMeta meta;
};

// One intervention applied to the market: an effect model, its assignment
// plan, and an optional compound (non-additive) interaction coefficient with
// the primary intervention.
struct Intervention {
    EffectModel model;
    AssignmentPlan plan;
    double delta_compound = 0.0;
};

// Market outcome mean at time t: control plus the primary effect, the
// simultaneous effects, and the pairwise compound interactions with the
// primary assignment.
inline double market_mean_at(const EventDensity& f, const ControlProfile& ctrl,
                             const Intervention& primary,
                             const std::vector<Intervention>& simuls, double t) {
    double y = ctrl.value_at(t) + effect_at(primary.model, f, primary.plan, t);
    int w = primary.plan.treatment_at(t);
    for (const auto& s : simuls) {
        y += effect_at(s.model, f, s.plan, t);
        if (s.delta_compound != 0.0 && w) y += s.delta_compound * s.plan.treatment_at(t);
    }
    return y;
}

// Generates a synthetic event stream. Continuous mode adds correlated errors
// through a shared latent minute-grid process plus independent idiosyncratic
// noise of variance sigma2(t) - cov(t, t); binary mode draws
// Bernoulli(clamp(mean)) outcomes and records the clamp rate.
inline EventStream simulate_stream(const EventDensity& f, const ControlProfile& ctrl,
                                   const NoiseModel& noise, const Intervention& primary,
                                   const std::vector<Intervention>& simuls, std::size_t n,
                                   OutcomeMode mode, std::uint64_t seed,
                                   const LatentNoiseProcess* latent_factor = nullptr) {
    if (n < 1) throw std::invalid_argument("simulate_stream: n must be >= 1");
    const int T = f.horizon();
    noise.validate(T);
    Rng rng(derive_seed(seed, 0xEE));
    std::vector<double> times = f.sample(n, rng);
    std::sort(times.begin(), times.end());

    std::vector<double> latent;
    if (mode == OutcomeMode::continuous && noise.covariance.kind() != CovarianceKind::none) {
        if (latent_factor != nullptr) {
            latent = latent_factor->sample(rng);
        } else {
            LatentNoiseProcess proc(noise.covariance, T);
            latent = proc.sample(rng);
        }
    }

    EventStream out;
    out.events.reserve(n);
    std::size_t clamped = 0;
    for (double t : times) {
        double mean = market_mean_at(f, ctrl, primary, simuls, t);
        double y;
        if (mode == OutcomeMode::continuous) {
            double l = latent.empty() ? 0.0 : latent[static_cast<std::size_t>(std::floor(t))];
            double c0 = noise.covariance.eval(t, t);
            double idio = noise.sigma2.at_time(t) - c0;
            y = mean + l + (idio > 0.0 ? std::sqrt(idio) * rng.normal() : 0.0);
        } else {
            double p = std::clamp(mean, 0.0, 1.0);
            if (std::fabs(p - mean) > 0.05) ++clamped;
            y = rng.bernoulli(p) ? 1.0 : 0.0;
        }
        out.events.push_back({t, y});
    }
    out.meta.horizon = T;
    out.meta.n = n;
    out.meta.mode = mode;
    out.meta.seed = seed;
    out.meta.clamp_rate = static_cast<double>(clamped) / static_cast<double>(n);
    out.meta.clamp_warning = (mode == OutcomeMode::binary) && out.meta.clamp_rate > 0.01;
    return out;
}

inline void write_stream_csv(const EventStream& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_stream_csv: cannot write " + path);
    out.precision(17);
    out << "t_min,outcome\n";
    for (const auto& e : s.events) out << e.t << ',' << e.y << '\n';
    std::ofstream meta(path + ".meta.json");
    if (meta) meta << s.meta.to_json().dump(2) << '\n';
}

inline EventStream read_stream_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_stream_csv: cannot read " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("t_min,outcome", 0) != 0)
        throw std::runtime_error("read_stream_csv: bad header in " + path);
    EventStream s;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ','))
            throw std::runtime_error("read_stream_csv: bad row in " + path);
        s.events.push_back({std::stod(a), std::stod(b)});
    }
    std::ifstream meta(path + ".meta.json");
    if (meta) {
        nlohmann::json j;
        meta >> j;
        s.meta = StreamMeta::from_json(j);
    } else {
        s.meta.n = s.events.size();
        double tmax = 0.0;
        for (const auto& e : s.events) tmax = std::max(tmax, e.t);
        s.meta.horizon = static_cast<int>(std::ceil(tmax));
    }
    return s;
}

}  // namespace switchback
