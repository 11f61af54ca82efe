#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace switchback;

namespace {
std::vector<EventDensity> test_densities() {
    std::vector<double> w(1440, 1.0);
    for (int i = 300; i < 600; ++i) w[i] = 4.0;
    for (int i = 1000; i < 1100; ++i) w[i] = 0.2;
    return {EventDensity::uniform(1440),
            EventDensity::sinusoid(1440, 0.5, 2 * M_PI / 1440, 0.7, 1.0),
            EventDensity::empirical(w)};
}
}  // namespace

TEST_CASE("carryover normalization integral is one for every grid time") {
    auto kernels = {CarryoverKernel::uniform_window(60), CarryoverKernel::linear_decay(45),
                    CarryoverKernel::geometric(0.9)};
    for (const auto& f : test_densities()) {
        for (const auto& k : kernels) {
            // ∫ d^co_t(t') f(t') dt' over the wrapped window; with the weight
            // d = s/D this is exactly window-mass / D and must equal 1
            for (int cell = 0; cell < 1440; cell += 97) {
                double t = cell + 0.5;
                double d = normalization_mass(k, f, t);
                REQUIRE(d > 0.0);
                double integral = 0.0;
                for_each_lookback_segment(k, f, t, [&](const LookbackSegment& s) {
                    integral += s.f_value * s.s_mass;
                });
                CHECK(integral / d == Catch::Approx(1.0).margin(1e-9));
            }
        }
    }
}

TEST_CASE("uniform window weight equals inverse window mass") {
    auto f = EventDensity::uniform(1440);
    auto k = CarryoverKernel::uniform_window(60);
    // interior t: normalized weight is 1 / (mass of f on [t-h, t])
    double expect = 1.0 / density_mass(f, 40, 100);
    CHECK(carryover_weight(k, f, 100, 50) == Catch::Approx(expect).epsilon(1e-12));
    // and ∫ d(t') f(t') dt' over the window is 1
    double integral = carryover_weight(k, f, 100, 50) * density_mass(f, 40, 100);
    CHECK(integral == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("non-anticipation: next-minute weight is zero") {
    auto f = EventDensity::uniform(1440);
    for (const auto& k : {CarryoverKernel::uniform_window(60), CarryoverKernel::linear_decay(60),
                          CarryoverKernel::geometric(0.5)}) {
        CHECK(carryover_weight(k, f, 100.0, 101.0) == 0.0);
        CHECK(carryover_weight(k, f, 700.0, 705.0) == 0.0);
    }
}

TEST_CASE("windowed kernels vanish outside the lookback window") {
    auto f = EventDensity::uniform(1440);
    auto lin = CarryoverKernel::linear_decay(60);
    CHECK(carryover_weight(lin, f, 500.0, 440.0) == 0.0);   // t' = t - h
    CHECK(carryover_weight(lin, f, 500.0, 439.0) == 0.0);   // beyond the window
    CHECK(carryover_weight(lin, f, 500.0, 441.0) > 0.0);
    auto uni = CarryoverKernel::uniform_window(60);
    CHECK(carryover_weight(uni, f, 500.0, 439.0) == 0.0);
    CHECK(carryover_weight(uni, f, 500.0, 441.0) > 0.0);
}

TEST_CASE("linear decay shape decreases in the lag") {
    auto k = CarryoverKernel::linear_decay(60);
    CHECK(k.shape(0.0) == 1.0);
    CHECK(k.shape(30.0) == Catch::Approx(0.5));
    CHECK(k.shape(60.0) == 0.0);
}

TEST_CASE("geometric kernel truncates tiny weights") {
    auto k = CarryoverKernel::geometric(0.5);
    CHECK(k.shape(k.window() + 1.0) == 0.0);
    CHECK(k.shape(1.0) == Catch::Approx(0.5));
    CHECK(std::pow(0.5, k.window()) <= 1e-12);
    CHECK_THROWS_AS(CarryoverKernel::geometric(1.0), std::invalid_argument);
    CHECK_THROWS_AS(CarryoverKernel::geometric(0.0), std::invalid_argument);
}

TEST_CASE("carryover kernel JSON round trip") {
    for (const auto& k : {CarryoverKernel::uniform_window(45), CarryoverKernel::linear_decay(30),
                          CarryoverKernel::geometric(0.8)}) {
        auto k2 = CarryoverKernel::from_json(k.to_json());
        CHECK(k2.kind() == k.kind());
        CHECK(k2.shape(7.25) == k.shape(7.25));
    }
}

TEST_CASE("covariance closed-form values") {
    auto c = CovarianceKernel::linear_decay(1.0, 60);
    CHECK(covariance_eval(c, 100.0, 130.0) == Catch::Approx(0.5));
    CHECK(covariance_eval(c, 130.0, 100.0) == covariance_eval(c, 100.0, 130.0));
    CHECK(covariance_eval(c, 100.0, 160.0) == 0.0);  // window boundary
    auto none = CovarianceKernel::none();
    CHECK(covariance_eval(none, 50.0, 50.0) == 0.0);
}

TEST_CASE("covariance symmetry is exact") {
    auto scale = MinuteSeries(std::vector<double>{1.0, 2.0, 0.5, 1.5});
    auto c = CovarianceKernel::linear_decay(0.7, 25, scale);
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        double a = rng.uniform(0, 1440), b = rng.uniform(0, 1440);
        CHECK(covariance_eval(c, a, b) == covariance_eval(c, b, a));
    }
}

TEST_CASE("covariance box integral matches brute force") {
    auto c = CovarianceKernel::linear_decay(1.3, 7.5);
    // brute-force 2-D midpoint on a very fine mesh
    auto brute = [&](double a1, double b1, double a2, double b2) {
        const int n = 400;
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double u = a1 + (b1 - a1) * (i + 0.5) / n;
                double v = a2 + (b2 - a2) * (j + 0.5) / n;
                s += c.base(u - v);
            }
        return s * (b1 - a1) * (b2 - a2) / (static_cast<double>(n) * n);
    };
    CHECK(c.box_integral(0, 1, 0, 1) == Catch::Approx(brute(0, 1, 0, 1)).margin(1e-5));
    CHECK(c.box_integral(0, 1, 4, 5) == Catch::Approx(brute(0, 1, 4, 5)).margin(1e-5));
    CHECK(c.box_integral(0, 3, 2, 9) == Catch::Approx(brute(0, 3, 2, 9)).margin(1e-4));
    CHECK(c.box_integral(0, 1, 30, 31) == 0.0);
}

TEST_CASE("latent process reproduces the covariance kernel") {
    auto c = CovarianceKernel::linear_decay(0.8, 20);
    LatentNoiseProcess proc(c, 200);
    const int R = 4000;
    Rng rng(11);
    double s00 = 0.0, s05 = 0.0, s0x = 0.0;
    for (int r = 0; r < R; ++r) {
        auto l = proc.sample(rng);
        s00 += l[40] * l[40];
        s05 += l[40] * l[45];
        s0x += l[40] * l[90];
    }
    CHECK(s00 / R == Catch::Approx(c.eval(40.5, 40.5)).margin(0.06));
    CHECK(s05 / R == Catch::Approx(c.eval(40.5, 45.5)).margin(0.06));
    CHECK(s0x / R == Catch::Approx(0.0).margin(0.06));
}
