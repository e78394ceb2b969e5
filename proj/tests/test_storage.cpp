#include "doctest.h"

#include "kehsim/errors.hpp"
#include "kehsim/storage.hpp"

using namespace kehsim;

TEST_CASE("capacitor energy hand values") {
    CHECK(cap_energy(220e-6, 0.0) == 0.0);
    CHECK(cap_energy(220e-6, 3.0) == doctest::Approx(990e-6).epsilon(1e-12));
    // 0.5 * 220e-6 * (3.38^2 - 2.18^2) = 110e-6 * 6.672
    const double expected = 110e-6 * 6.672;
    CHECK(expected == doctest::Approx(733.92e-6).epsilon(1e-12));
    CHECK(std::abs(cap_energy(220e-6, 3.38) - cap_energy(220e-6, 2.18) - expected) < 1e-9);
}

TEST_CASE("energy per load cycle") {
    CHECK(load_energy_per_cycle(220e-6, 3.0, 3.0) == 0.0);
    CHECK(std::abs(load_energy_per_cycle(220e-6, 3.38, 2.18) - 733.92e-6) < 1e-9);
    CHECK(load_energy_per_cycle(440e-6, 3.38, 2.18) ==
          doctest::Approx(2.0 * load_energy_per_cycle(220e-6, 3.38, 2.18)));
    CHECK_THROWS_AS((void)load_energy_per_cycle(220e-6, 2.0, 3.0), ArgumentError);
}

TEST_CASE("idle capacitor keeps its voltage") {
    CapLoadState s;
    s.v_cap_v = 2.9;
    const CapLoadState next = step_cap_load(s, 0.0, 0.0, 1e-3);
    CHECK(next.v_cap_v == doctest::Approx(2.9).epsilon(1e-15));
    CHECK_FALSE(next.load_on);
}

TEST_CASE("load switches on at the upper threshold") {
    CapLoadState s;
    s.v_cap_v = 3.37;
    const double e_in = cap_energy(s.c_farad, 3.39) - s.energy();
    const CapLoadState next = step_cap_load(s, e_in, 0.0, 1e-5);
    CHECK(next.load_on);
    CHECK(next.activations == 1);
    CHECK(next.v_cap_v == doctest::Approx(3.39));
}

TEST_CASE("one discharge delivers the hysteresis energy") {
    CapLoadState s;
    s.v_cap_v = 3.38;
    s.load_on = true;
    const double dt = 1e-5;
    long long steps = 0;
    while (s.load_on) {
        s = step_cap_load(s, 0.0, 0.0, dt);
        ++steps;
        REQUIRE(steps < 10'000'000);
    }
    CHECK(s.v_cap_v <= s.v_off_v);
    const double expected = load_energy_per_cycle(220e-6, 3.38, 2.18);
    CHECK(std::abs(s.e_delivered_j - expected) <= s.p_load_w * dt);
}

TEST_CASE("draws never take more than is stored") {
    CapLoadState s;
    s.v_cap_v = 1e-3;
    s.load_on = true;
    CapStepFlows flows;
    const CapLoadState next = step_cap_load(s, 0.0, 1.0, 1.0, &flows);
    CHECK(next.v_cap_v == 0.0);
    CHECK(flows.quiescent_j == doctest::Approx(s.energy()));
    CHECK(flows.load_j == 0.0);
}

TEST_CASE("cap state validation") {
    CapLoadState s;
    s.v_on_v = 2.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = {};
    s.c_farad = 0.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
}
