#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace switchback;

TEST_CASE("fixed design endpoints") {
    auto p = build_fixed(1440, 60, 0);
    CHECK(p.num_intervals() == 24);
    for (int m = 0; m < 24; ++m) CHECK(p.length(m) == Catch::Approx(60.0));

    // 1440 = 25 * 56 + 40
    auto q = build_fixed(1440, 56, 0);
    CHECK(q.num_intervals() == 26);
    for (int m = 0; m < 25; ++m) CHECK(q.length(m) == Catch::Approx(56.0));
    CHECK(q.length(25) == Catch::Approx(40.0));

    auto r = build_fixed(240, 60, 30);
    CHECK(r.endpoints == std::vector<double>{0, 30, 90, 150, 210, 240});

    CHECK_THROWS_AS(build_fixed(1440, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(build_fixed(1440, 60, 60), std::invalid_argument);
}

TEST_CASE("poisson design determinism and clipping") {
    auto a = build_poisson(1440, 56, 0, 42);
    auto b = build_poisson(1440, 56, 0, 42);
    CHECK(a.endpoints == b.endpoints);
    CHECK(a.endpoints.back() == 1440.0);

    // lambda far above T: single draw crosses the horizon immediately
    auto c = build_poisson(1440, 2000, 10, 7);
    REQUIRE(c.num_intervals() >= 2);
    CHECK(c.endpoints[0] == 0.0);
    CHECK(c.endpoints[1] == 10.0);
    CHECK(c.endpoints.back() == 1440.0);
    CHECK(c.length(1) == Catch::Approx(1430.0));

    CHECK_THROWS_AS(build_poisson(1440, 0.0, 0, 1), std::invalid_argument);
}

TEST_CASE("poisson first-interval length is unbiased") {
    // the first (never length-biased) draw has mean lambda exactly
    const int R = 10000;
    std::vector<double> first;
    first.reserve(R);
    for (int r = 0; r < R; ++r) {
        auto p = build_poisson(1440, 56, 0, 1000 + r);
        first.push_back(p.length(0));
    }
    double se = std::sqrt(56.0 / R);  // Poisson variance = mean
    CHECK(oracle::mean(first) == Catch::Approx(56.0).margin(3 * se));
}

TEST_CASE("change of measure: uniform density reduces to fixed") {
    auto f = EventDensity::uniform(1440);
    auto cm = build_change_of_measure(1440, 24, 0, f);
    auto fx = build_fixed(1440, 60, 0);
    REQUIRE(cm.num_intervals() == fx.num_intervals());
    for (std::size_t i = 0; i < cm.endpoints.size(); ++i)
        CHECK(cm.endpoints[i] == Catch::Approx(fx.endpoints[i]).margin(1e-9));
}

TEST_CASE("change of measure equalizes interval masses") {
    auto f = EventDensity::sinusoid(1440, 0.5, 2 * M_PI / 1440, 0.3, 1.0);
    auto cm = build_change_of_measure(1440, 24, 0, f);
    REQUIRE(cm.num_intervals() == 24);
    for (int m = 0; m < cm.num_intervals(); ++m)
        CHECK(density_mass(f, cm.lower(m), cm.upper(m)) ==
              Catch::Approx(1.0 / 24).margin(1e-9));

    auto single = build_change_of_measure(1440, 1, 0, f);
    CHECK(single.endpoints == std::vector<double>{0.0, 1440.0});

    // offset mass >= 1/M is rejected
    CHECK_THROWS_AS(build_change_of_measure(1440, 24, 720, f), std::invalid_argument);
}

TEST_CASE("iid assignment basics") {
    auto part = build_fixed(10000, 1, 0);
    REQUIRE(part.num_intervals() == 10000);
    auto plan = assign_iid(part, 0.5, 11);
    double frac = 0.0;
    for (int b : plan.bits) frac += b;
    frac /= plan.bits.size();
    CHECK(std::fabs(frac - 0.5) <= 3 * std::sqrt(0.25 / 10000.0));
    CHECK(plan.pi == 0.5);

    auto plan2 = assign_iid(part, 0.5, 11);
    CHECK(plan.bits == plan2.bits);

    auto plan3 = assign_iid(part, 0.25, 3);
    CHECK(plan3.pi == 0.25);
    CHECK_THROWS_AS(assign_iid(part, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(assign_iid(part, 1.0, 1), std::invalid_argument);
}

TEST_CASE("balanced assignment complements the mirrored half") {
    auto part = build_fixed(1440, 60, 0);
    auto plan = assign_balanced(part, 720, 99);
    for (int i = 0; i < 12; ++i)
        CHECK(plan.bits[i] + plan.bits[i + 12] == 1);
    // complement identity at arbitrary probe times
    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
        double t = rng.uniform(720.0, 1440.0);
        CHECK(plan.treatment_at(t) + plan.treatment_at(t - 720.0) == 1);
    }
}

TEST_CASE("balanced marginal treatment probability is one half") {
    auto part = build_fixed(1440, 60, 0);
    const int R = 10000;
    std::array<double, 3> probes{15.0, 715.0, 1405.0};
    std::array<int, 3> treated{};
    for (int r = 0; r < R; ++r) {
        auto plan = assign_balanced(part, 720, 5000 + r);
        for (std::size_t j = 0; j < probes.size(); ++j) treated[j] += plan.treatment_at(probes[j]);
    }
    double se = std::sqrt(0.25 / R);
    for (int c : treated) CHECK(std::fabs(static_cast<double>(c) / R - 0.5) <= 3 * se);
}

TEST_CASE("balanced assignment rejects non-mirrored partitions") {
    auto part = build_fixed(1440, 56, 0);  // 26 intervals, remainder breaks the mirror
    CHECK_THROWS_AS(assign_balanced(part, 720, 1), std::invalid_argument);
    auto ok = build_fixed(1440, 60, 0);
    CHECK_THROWS_AS(assign_balanced(ok, 700, 1), std::invalid_argument);
}

TEST_CASE("two-week mirrored draw has weekly complement pattern") {
    DesignSpec spec;
    spec.family = DesignFamily::poisson;
    spec.avg_length = 56;
    spec.balanced = true;
    const double T = 14 * 1440.0;
    auto f = EventDensity::uniform(static_cast<int>(T));
    auto plan = draw_plan(spec, T, &f, 31);
    CHECK(plan.partition.is_mirrored(T / 2));
    Rng rng(8);
    for (int i = 0; i < 300; ++i) {
        double t = rng.uniform(T / 2, T);
        CHECK(plan.treatment_at(t) + plan.treatment_at(t - T / 2) == 1);
    }
}

TEST_CASE("treatment_at interval conventions") {
    auto part = build_fixed(240, 60, 0);
    AssignmentPlan plan;
    plan.partition = part;
    plan.bits = {0, 1, 0, 1};
    CHECK(treatment_at(plan, 30.0) == 0);
    CHECK(treatment_at(plan, 90.0) == 1);
    // shared endpoint belongs to the right interval
    CHECK(treatment_at(plan, 60.0) == 1);
    CHECK(treatment_at(plan, 120.0) == 0);
    // horizon belongs to the last interval
    CHECK(treatment_at(plan, 240.0) == 1);
    CHECK_THROWS_AS(treatment_at(plan, -0.5), std::invalid_argument);
    CHECK_THROWS_AS(treatment_at(plan, 240.5), std::invalid_argument);
}

TEST_CASE("every builder yields nondecreasing endpoints ending at T") {
    auto f = EventDensity::sinusoid(1440, 0.4, 2 * M_PI / 1440, 0.0, 1.0);
    Rng rng(21);
    for (int rep = 0; rep < 40; ++rep) {
        std::uint64_t seed = rng.next_u64();
        IntervalPartition parts[3] = {
            build_fixed(1440, 30 + 7 * (rep % 5), rep % 3 == 0 ? 0.0 : 5.0),
            build_poisson(1440, 40 + rep, 0, seed),
            build_change_of_measure(1440, 10 + rep % 20, 2, f)};
        for (const auto& p : parts) {
            CHECK(p.endpoints.front() == 0.0);
            CHECK(p.endpoints.back() == Catch::Approx(1440.0));
            for (std::size_t i = 1; i < p.endpoints.size(); ++i)
                CHECK(p.endpoints[i] >= p.endpoints[i - 1]);
        }
    }
}

TEST_CASE("plan JSON round trip is exact") {
    auto part = build_poisson(1440, 70, 3, 17);
    auto plan = assign_iid(part, 0.5, 23);
    auto j = plan.to_json();
    auto back = AssignmentPlan::from_json(j);
    CHECK(back.partition.endpoints == plan.partition.endpoints);
    CHECK(back.bits == plan.bits);
    CHECK(back.pi == plan.pi);
    CHECK(back.law == plan.law);

    auto bal = assign_balanced(build_fixed(1440, 60, 0), 720, 9);
    auto back2 = AssignmentPlan::from_json(bal.to_json());
    CHECK(back2.law == AssignmentLaw::balanced);
    CHECK(back2.mirror_lag == 720.0);
    CHECK(back2.bits == bal.bits);
}

TEST_CASE("design spec JSON and hash") {
    DesignSpec s;
    s.family = DesignFamily::change_of_measure;
    s.avg_length = 112;
    s.offset = 4;
    s.balanced = true;
    auto s2 = DesignSpec::from_json(s.to_json());
    CHECK(s2.family == s.family);
    CHECK(s2.avg_length == s.avg_length);
    CHECK(s2.balanced == s.balanced);
    CHECK(s.content_hash() == s2.content_hash());
    s2.avg_length = 56;
    CHECK(s.content_hash() != s2.content_hash());
}

TEST_CASE("joint lag probabilities follow the assignment law") {
    auto part = build_fixed(1440, 120, 0);
    auto plan = assign_iid(part, 0.5, 3);
    // same interval
    auto jp = joint_lag_probs(plan, 100.0, 50.0);
    CHECK(jp.p11 == Catch::Approx(0.5));
    CHECK(jp.p00 == Catch::Approx(0.5));
    // different intervals
    jp = joint_lag_probs(plan, 130.0, 50.0);
    CHECK(jp.p11 == Catch::Approx(0.25));
    // wrapped lag lands in the last interval
    jp = joint_lag_probs(plan, 10.0, 50.0);
    CHECK(jp.p11 == Catch::Approx(0.25));

    auto bal = assign_balanced(part, 720, 4);
    // cross-half lag onto the mirror partner: deterministic complement
    jp = joint_lag_probs(bal, 725.0, 10.0);
    CHECK(jp.p11 == Catch::Approx(0.25));
    jp = joint_lag_probs(bal, 730.0, 720.0);
    CHECK(jp.p11 == 0.0);
    CHECK(jp.p00 == 0.0);
}
