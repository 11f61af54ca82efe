#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "switchback/density.hpp"
#include "switchback/rng.hpp"

namespace switchback {

// Interval endpoints iota_0 <= ... <= iota_M = T. The canonical form always
// starts at 0: offset designs carry a leading [0, q] interval. Zero-length
// intervals are legal (Poisson clipping keeps them).
struct IntervalPartition {
    std::vector<double> endpoints;  // size M+1, endpoints[0] == 0, back() == T
    double horizon = 0.0;

    IntervalPartition() = default;
    IntervalPartition(std::vector<double> eps, double T) : endpoints(std::move(eps)), horizon(T) {
        validate();
    }

    int num_intervals() const { return static_cast<int>(endpoints.size()) - 1; }
    double lower(int m) const { return endpoints[static_cast<std::size_t>(m)]; }
    double upper(int m) const { return endpoints[static_cast<std::size_t>(m) + 1]; }
    double length(int m) const { return upper(m) - lower(m); }

    // right-open intervals [iota_{m-1}, iota_m); t == T belongs to the last
    // interval
    int interval_of(double t) const {
        if (t < 0.0 || t > horizon)
            throw std::invalid_argument("IntervalPartition: t outside horizon");
        auto it = std::upper_bound(endpoints.begin(), endpoints.end(), t);
        int m = static_cast<int>(std::distance(endpoints.begin(), it)) - 1;
        return std::clamp(m, 0, num_intervals() - 1);
    }

    void validate() const {
        if (endpoints.size() < 2) throw std::invalid_argument("IntervalPartition: need >= 1 interval");
        if (endpoints.front() != 0.0)
            throw std::invalid_argument("IntervalPartition: first endpoint must be 0");
        for (std::size_t i = 1; i < endpoints.size(); ++i)
            if (endpoints[i] < endpoints[i - 1])
                throw std::invalid_argument("IntervalPartition: endpoints must be nondecreasing");
        if (std::fabs(endpoints.back() - horizon) > 1e-9 || horizon <= 0.0)
            throw std::invalid_argument("IntervalPartition: last endpoint must equal horizon");
    }

    // true when intervals pair one-to-one between the halves by translation:
    // interval i + M/2 is interval i shifted by `half`
    bool is_mirrored(double half) const {
        const double tol = 1e-9;
        int M = num_intervals();
        if (M % 2 != 0) return false;
        int half_m = M / 2;
        if (std::fabs(endpoints[static_cast<std::size_t>(half_m)] - half) > tol) return false;
        for (int i = 0; i < half_m; ++i) {
            if (std::fabs(lower(i) + half - lower(i + half_m)) > tol) return false;
            if (std::fabs(upper(i) + half - upper(i + half_m)) > tol) return false;
        }
        return true;
    }
};

enum class AssignmentLaw { iid, balanced };

struct AssignmentPlan {
    IntervalPartition partition;
    std::vector<int> bits;  // one per interval
    double pi = 0.5;
    AssignmentLaw law = AssignmentLaw::iid;
    double mirror_lag = 0.0;  // T/2 for balanced plans

    int treatment_at(double t) const { return bits[static_cast<std::size_t>(partition.interval_of(t))]; }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["endpoints"] = partition.endpoints;
        j["bits"] = bits;
        j["pi"] = pi;
        j["law"] = (law == AssignmentLaw::iid) ? "iid" : "balanced";
        if (law == AssignmentLaw::balanced) j["mirror_lag"] = mirror_lag;
        return j;
    }

    static AssignmentPlan from_json(const nlohmann::json& j) {
        AssignmentPlan p;
        auto eps = j.at("endpoints").get<std::vector<double>>();
        p.partition = IntervalPartition(eps, eps.back());
        p.bits = j.at("bits").get<std::vector<int>>();
        p.pi = j.at("pi").get<double>();
        std::string law = j.value("law", "iid");
        p.law = (law == "balanced") ? AssignmentLaw::balanced : AssignmentLaw::iid;
        p.mirror_lag = j.value("mirror_lag", 0.0);
        if (p.bits.size() + 1 != p.partition.endpoints.size())
            throw std::invalid_argument("AssignmentPlan: bits/endpoints size mismatch");
        return p;
    }
};

inline int treatment_at(const AssignmentPlan& plan, double t) { return plan.treatment_at(t); }

// Fixed duration switchback: endpoints q, p+q, 2p+q, ... clipped at T.
inline IntervalPartition build_fixed(double T, double p, double q) {
    if (!(p > 0.0) || p > T) throw std::invalid_argument("build_fixed: need 0 < p <= T");
    if (q < 0.0 || q >= p) throw std::invalid_argument("build_fixed: need 0 <= q < p");
    std::vector<double> eps{0.0};
    if (q > 0.0) eps.push_back(q);
    for (double e = q + p; e < T - 1e-12; e += p) eps.push_back(e);
    eps.push_back(T);
    return IntervalPartition(std::move(eps), T);
}

// Poisson duration switchback: i.i.d. Poisson(lambda) lengths accumulated
// from q; an endpoint crossing T is clipped to T (keeping whatever
// zero-length tail the clipping produces).
inline IntervalPartition build_poisson(double T, double lambda, double q, std::uint64_t seed) {
    if (!(lambda > 0.0)) throw std::invalid_argument("build_poisson: lambda must be positive");
    if (q < 0.0 || q >= T) throw std::invalid_argument("build_poisson: need 0 <= q < T");
    Rng rng(seed);
    std::vector<double> eps{0.0};
    if (q > 0.0) eps.push_back(q);
    double e = q;
    std::size_t guard = static_cast<std::size_t>(T) * 4 + 64;
    while (e < T && eps.size() < guard) {
        e += static_cast<double>(rng.poisson(lambda));
        eps.push_back(std::min(e, T));
    }
    if (eps.back() != T) eps.push_back(T);
    return IntervalPartition(std::move(eps), T);
}

// Change-of-measure switchback: after the offset, every interval carries
// density mass 1/M. Endpoints invert the piecewise-linear CDF exactly.
inline IntervalPartition build_change_of_measure(double T, int M, double q,
                                                 const EventDensity& f) {
    if (M < 1) throw std::invalid_argument("build_change_of_measure: M must be >= 1");
    if (q < 0.0 || q >= T) throw std::invalid_argument("build_change_of_measure: need 0 <= q < T");
    if (static_cast<double>(f.horizon()) != T)
        throw std::invalid_argument("build_change_of_measure: density horizon mismatch");
    const double target = 1.0 / M;
    double off_mass = f.mass(0.0, q);
    if (off_mass >= target)
        throw std::invalid_argument("build_change_of_measure: offset mass must be < 1/M");
    std::vector<double> eps{0.0};
    if (q > 0.0) eps.push_back(q);
    for (int j = 1; j < M; ++j) {
        double want = off_mass + j * target;
        if (want >= 1.0 - 1e-15) break;
        int lo = 0, hi = f.horizon() - 1;
        while (lo < hi) {  // first cell whose cumulative end mass reaches `want`
            int mid = (lo + hi) / 2;
            if (f.cdf_at_cell(mid + 1) >= want) hi = mid;
            else lo = mid + 1;
        }
        double base = f.cdf_at_cell(lo);
        double cellmass = f.cell_mass(lo);
        double e = lo + (cellmass > 0.0 ? (want - base) / cellmass : 0.0);
        eps.push_back(std::min(e, T));
    }
    eps.push_back(T);
    return IntervalPartition(std::move(eps), T);
}

// i.i.d. Bernoulli(pi) bits per interval
inline AssignmentPlan assign_iid(const IntervalPartition& partition, double pi,
                                 std::uint64_t seed) {
    if (!(pi > 0.0 && pi < 1.0)) throw std::invalid_argument("assign_iid: pi must be in (0, 1)");
    Rng rng(seed);
    AssignmentPlan plan;
    plan.partition = partition;
    plan.pi = pi;
    plan.law = AssignmentLaw::iid;
    plan.bits.resize(static_cast<std::size_t>(partition.num_intervals()));
    for (auto& b : plan.bits) b = rng.bernoulli(pi) ? 1 : 0;
    return plan;
}

// Balanced (mirrored) assignment: first-half bits i.i.d. Bernoulli(1/2),
// second-half bits are the complement of the aligned first-half interval, so
// W_t = 1 - W_{t - T/2}.
inline AssignmentPlan assign_balanced(const IntervalPartition& partition, double balance_period,
                                      std::uint64_t seed) {
    const double T = partition.horizon;
    if (std::fabs(2.0 * balance_period - T) > 1e-9)
        throw std::invalid_argument("assign_balanced: balance_period must split the horizon in two halves");
    if (!partition.is_mirrored(balance_period))
        throw std::invalid_argument("assign_balanced: partition is not mirrored across the halves");
    Rng rng(seed);
    AssignmentPlan plan;
    plan.partition = partition;
    plan.pi = 0.5;
    plan.law = AssignmentLaw::balanced;
    plan.mirror_lag = balance_period;
    int half_m = partition.num_intervals() / 2;
    plan.bits.assign(static_cast<std::size_t>(partition.num_intervals()), 0);
    for (int i = 0; i < half_m; ++i) {
        int b = rng.bernoulli(0.5) ? 1 : 0;
        plan.bits[static_cast<std::size_t>(i)] = b;
        plan.bits[static_cast<std::size_t>(i + half_m)] = 1 - b;
    }
    return plan;
}

enum class DesignFamily { fixed, poisson, change_of_measure };

inline int family_rank(DesignFamily f) {
    switch (f) {
        case DesignFamily::fixed: return 0;
        case DesignFamily::poisson: return 1;
        case DesignFamily::change_of_measure: return 2;
    }
    return 3;
}

inline std::string family_name(DesignFamily f) {
    switch (f) {
        case DesignFamily::fixed: return "fixed";
        case DesignFamily::poisson: return "poisson";
        case DesignFamily::change_of_measure: return "change_of_measure";
    }
    return "?";
}

inline DesignFamily family_from_name(const std::string& s) {
    if (s == "fixed") return DesignFamily::fixed;
    if (s == "poisson") return DesignFamily::poisson;
    if (s == "change_of_measure") return DesignFamily::change_of_measure;
    throw std::invalid_argument("DesignSpec: unknown family '" + s + "'");
}

struct DesignSpec {
    DesignFamily family = DesignFamily::fixed;
    double avg_length = 56.0;  // p for fixed, lambda for Poisson, mass*T for change-of-measure
    double offset = 0.0;       // q
    bool balanced = false;
    double balance_period = 0.0;  // 0 -> T/2
    double pi = 0.5;

    void validate() const {
        if (!(avg_length > 0.0)) throw std::invalid_argument("DesignSpec: avg_length must be positive");
        if (offset < 0.0) throw std::invalid_argument("DesignSpec: offset must be >= 0");
        if (family == DesignFamily::fixed && offset >= avg_length)
            throw std::invalid_argument("DesignSpec: fixed design needs 0 <= q < avg_length");
        if (!(pi > 0.0 && pi < 1.0)) throw std::invalid_argument("DesignSpec: pi must be in (0, 1)");
    }

    std::string label() const {
        std::string s = family_name(family) + "-" + std::to_string(static_cast<int>(avg_length));
        if (balanced) s = "bal_" + s;
        return s;
    }

    nlohmann::json to_json() const {
        return {{"family", family_name(family)}, {"avg_length", avg_length},
                {"offset", offset},             {"balanced", balanced},
                {"balance_period", balance_period}, {"pi", pi}};
    }

    static DesignSpec from_json(const nlohmann::json& j) {
        DesignSpec s;
        s.family = family_from_name(j.at("family").get<std::string>());
        s.avg_length = j.at("avg_length").get<double>();
        s.offset = j.value("offset", 0.0);
        s.balanced = j.value("balanced", false);
        s.balance_period = j.value("balance_period", 0.0);
        s.pi = j.value("pi", 0.5);
        s.validate();
        return s;
    }

    // content hash, used for common-random-number plan seeding so that scores
    // do not depend on the candidate's position in a list
    std::uint64_t content_hash() const {
        auto mix = [](std::uint64_t h, std::uint64_t x) {
            h ^= x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
            return h;
        };
        std::uint64_t h = 0x5bd1e995ULL;
        h = mix(h, static_cast<std::uint64_t>(family_rank(family)));
        h = mix(h, std::bit_cast<std::uint64_t>(avg_length));
        h = mix(h, std::bit_cast<std::uint64_t>(offset));
        h = mix(h, balanced ? 1u : 0u);
        h = mix(h, std::bit_cast<std::uint64_t>(balance_period));
        h = mix(h, std::bit_cast<std::uint64_t>(pi));
        return h;
    }
};

namespace detail {
// Endpoints strictly inside one segment [lo, hi], partitioned by the family
// rule with offsets applied within the segment.
inline std::vector<double> segment_endpoints(const DesignSpec& spec, double lo, double hi,
                                             const EventDensity* f, Rng& rng) {
    std::vector<double> eps;
    const double len = hi - lo;
    switch (spec.family) {
        case DesignFamily::fixed: {
            double q = spec.offset;
            if (q > 0.0 && q < len) eps.push_back(lo + q);
            for (double e = q + spec.avg_length; e < len - 1e-12; e += spec.avg_length)
                eps.push_back(lo + e);
            break;
        }
        case DesignFamily::poisson: {
            double e = spec.offset;
            if (e > 0.0 && e < len) eps.push_back(lo + e);
            std::size_t guard = static_cast<std::size_t>(len) * 4 + 64;
            while (e < len && eps.size() < guard) {
                e += static_cast<double>(rng.poisson(spec.avg_length));
                if (e >= len) break;  // the segment boundary provides the final endpoint
                eps.push_back(lo + e);
            }
            break;
        }
        case DesignFamily::change_of_measure: {
            if (f == nullptr)
                throw std::invalid_argument("draw_plan: change-of-measure needs a density");
            double seg_mass = f->mass(lo, hi);
            double target = spec.avg_length / f->horizon();  // mass per interval
            int M = std::max(1, static_cast<int>(std::llround(seg_mass / target)));
            double q = std::min(spec.offset, len);
            double off_mass = (q > 0.0 && q < len) ? f->mass(lo, lo + q) : 0.0;
            if (q > 0.0 && q < len) eps.push_back(lo + q);
            for (int j = 1; j < M; ++j) {
                double want = f->mass(0.0, lo) + off_mass + j * (seg_mass - off_mass) / M;
                int a = static_cast<int>(std::floor(lo)), b = f->horizon() - 1;
                while (a < b) {
                    int mid = (a + b) / 2;
                    if (f->cdf_at_cell(mid + 1) >= want) b = mid;
                    else a = mid + 1;
                }
                double basec = f->cdf_at_cell(a);
                double cm = f->cell_mass(a);
                double e = a + (cm > 0.0 ? (want - basec) / cm : 0.0);
                eps.push_back(std::clamp(e, lo, hi));
            }
            break;
        }
    }
    return eps;
}
}  // namespace detail

// Draw a concrete plan from a design spec. Unbalanced plans use the global
// family builders over [0, T]. Balanced plans build the first half with
// independent randomness per day, reflect the partition into the second half,
// and assign complemented bits.
inline AssignmentPlan draw_plan(const DesignSpec& spec, double T, const EventDensity* f,
                                std::uint64_t seed) {
    spec.validate();
    if (!spec.balanced) {
        IntervalPartition part;
        switch (spec.family) {
            case DesignFamily::fixed:
                part = build_fixed(T, spec.avg_length, spec.offset);
                break;
            case DesignFamily::poisson:
                part = build_poisson(T, spec.avg_length, spec.offset, derive_seed(seed, 1));
                break;
            case DesignFamily::change_of_measure: {
                if (f == nullptr)
                    throw std::invalid_argument("draw_plan: change-of-measure needs a density");
                int M = std::max(1, static_cast<int>(std::llround(T / spec.avg_length)));
                part = build_change_of_measure(T, M, spec.offset, *f);
                break;
            }
        }
        return assign_iid(part, spec.pi, derive_seed(seed, 2));
    }
    const double half = (spec.balance_period > 0.0) ? spec.balance_period : T / 2.0;
    if (std::fabs(2.0 * half - T) > 1e-9)
        throw std::invalid_argument("draw_plan: balanced designs need balance_period == T/2");
    const double day = std::min(1440.0, half);
    std::vector<double> eps{0.0};
    int chunk = 0;
    for (double lo = 0.0; lo < half - 1e-9; lo += day, ++chunk) {
        double hi = std::min(lo + day, half);
        Rng rng(derive_seed(seed, 100 + chunk));
        for (double e : detail::segment_endpoints(spec, lo, hi, f, rng)) eps.push_back(e);
        eps.push_back(hi);
    }
    std::size_t first_cnt = eps.size();
    for (std::size_t i = 1; i < first_cnt; ++i) eps.push_back(eps[i] + half);
    IntervalPartition part(std::move(eps), T);
    return assign_balanced(part, half, derive_seed(seed, 3));
}

// Joint assignment probabilities P(W_t = 1, W_lagged = 1) and P(0, 0) under
// the plan's generative law, with the lag taken circularly. Used by the
// burn-in estimator, which needs exact inverse-probability weights.
struct JointProbs {
    double p11 = 0.0;
    double p00 = 0.0;
};

inline JointProbs joint_lag_probs(const AssignmentPlan& plan, double t, double lag) {
    const double T = plan.partition.horizon;
    double tl = std::fmod(t - lag, T);
    if (tl < 0) tl += T;
    int m1 = plan.partition.interval_of(t);
    int m2 = plan.partition.interval_of(tl);
    const double pi = plan.pi;
    if (plan.law == AssignmentLaw::iid) {
        if (m1 == m2) return {pi, 1.0 - pi};
        return {pi * pi, (1.0 - pi) * (1.0 - pi)};
    }
    // balanced: interval i + M/2 carries the complement of interval i's bit
    int half_m = plan.partition.num_intervals() / 2;
    int r1 = m1 % half_m, r2 = m2 % half_m;
    int s1 = m1 / half_m, s2 = m2 / half_m;
    if (r1 != r2) return {0.25, 0.25};
    if (s1 == s2) return {0.5, 0.5};
    return {0.0, 0.0};
}

}  // namespace switchback
