#include "doctest.h"

#include "kehsim/errors.hpp"
#include "kehsim/frontend.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <vector>

using namespace kehsim;

namespace {

/// Mean rectified current of the converter-less frontend with v_cap held fixed.
double held_cap_current(const PiezoModel& m, const VibrationProfile& p, double v_cap, double vd,
                        double settle_s, double average_s) {
    const double dt = 1e-5;
    const Forcing f = Forcing::from(p);
    Topology topo = Topology::converter_less(RectifierParams{vd});
    CapLoadState cap;
    cap.v_cap_v = v_cap;
    BridgeState b;
    const auto settle = std::llround(settle_s / dt);
    const auto total = settle + std::llround(average_s / dt);
    double q = 0.0;
    for (long long n = 0; n < total; ++n) {
        const FrontendFlows flows = converterless_step(m, b, f, n * dt, topo, cap, dt);
        if (n >= settle) {
            q += flows.charge_c();
        }
    }
    return q / average_s;
}

}  // namespace

TEST_CASE("rectifier conduction law") {
    const RectifierParams schottky{0.35};
    CHECK(rectifier_conduction(3.0, 3.0, schottky) == Conduction::Blocked);
    CHECK(rectifier_conduction(4.0, 3.0, schottky) == Conduction::Forward);
    CHECK(rectifier_conduction(-4.0, 3.0, schottky) == Conduction::Reverse);
    CHECK(rectifier_conduction(3.7, 3.0, schottky) == Conduction::Blocked);
    CHECK(rectifier_conduction(0.0, 0.0, RectifierParams{0.0}) == Conduction::Blocked);
}

TEST_CASE("no charge flows below the capacitor voltage plus two drops") {
    PiezoModel m;
    VibrationProfile p;
    p.amplitude_mvpp = 400.0;  // open-circuit peak well under 3.7 V
    CHECK(open_circuit_amplitude(m, p) < 3.7);
    CHECK(held_cap_current(m, p, 3.0, 0.35, 0.0, 10.0) == 0.0);
}

TEST_CASE("short-circuit current matches the IV sweep") {
    PiezoModel m;
    VibrationProfile p;
    const std::vector<double> zero = {0.0};
    IVOptions opts;
    opts.diode_drop_v = 0.0;
    opts.average_cycles = 50;
    const IVCurve curve = measure_iv_curve(m, p, zero, 150, opts);
    const double i_sc = held_cap_current(m, p, 0.0, 0.0, 6.0, 2.0);
    CHECK(i_sc == doctest::Approx(curve.samples[0].current_a).epsilon(0.02));
}

TEST_CASE("forward conduction moves i dt of charge") {
    // A very heavy mass keeps the velocity, and thus the source current, fixed.
    PiezoModel m;
    m.mass_kg = 1e6;
    m.rp_ohm = 1e12;
    const double clamp = 1.0;
    BridgeState b;
    b.mode = Conduction::Forward;
    b.piezo.vp_v = clamp;
    b.piezo.v_mps = (1e-3 + clamp / m.rp_ohm) / m.coupling_n_per_v;
    TransducerFlows flows;
    bridge_step(m, b, Forcing::constant(0.0), 0.0, clamp, 1e-5, flows);
    CHECK(flows.charge_c == doctest::Approx(10e-9).epsilon(1e-6));
}

TEST_CASE("quiescent draw is 4.2 uJ per second") {
    PiezoModel m;
    VibrationProfile p;
    p.amplitude_mvpp = 0.0;
    const Topology topo = Topology::converter_based();
    const Forcing f = Forcing::from(p);
    CapLoadState cap;
    cap.v_cap_v = 3.0;
    const double e0 = cap.energy();
    BridgeState b;
    const double dt = 1e-5;
    for (long long n = 0; n < 100000; ++n) {
        const FrontendFlows flows =
            converter_step(m, b, f, n * dt, topo, cap, {1.0, true}, dt);
        CHECK(flows.charge_c() == 0.0);
        cap = step_cap_load(cap, flows.energy_to_cap_j, flows.quiescent_j, dt);
    }
    CHECK(e0 - cap.energy() == doctest::Approx(4.2e-6).epsilon(1e-9));
}

TEST_CASE("lossless converter passes threshold times charge") {
    PiezoModel m;
    VibrationProfile p;
    ConverterParams conv;
    conv.efficiency = EfficiencyTable({{1.0, 1e-3, 1.0}});
    const Topology topo = Topology::converter_based(conv, RectifierParams{0.0});
    const Forcing f = Forcing::from(p);
    CapLoadState cap;
    BridgeState b;
    double to_cap = 0.0;
    double q = 0.0;
    for (long long n = 0; n < 200000; ++n) {
        const FrontendFlows flows = converter_step(m, b, f, n * 1e-5, topo, cap, {1.3, true}, 1e-5);
        to_cap += flows.energy_to_cap_j;
        q += flows.charge_c();
        CHECK(flows.converter_loss_j == 0.0);
    }
    CHECK(q > 0.0);
    CHECK(to_cap == doctest::Approx(1.3 * q).epsilon(1e-12));
}

TEST_CASE("efficiency table") {
    const EfficiencyTable table;
    CHECK(table.eta(1.0, 100e-6) >= 0.80);
    CHECK(table.eta(1.0, 100e-6) == doctest::Approx(0.80));
    for (double v : {0.2, 0.5, 1.5, 2.5, 5.0}) {
        for (double i : {1e-7, 1e-5, 3e-4, 1e-2, 1.0}) {
            const double e = table.eta(v, i);
            CHECK(e > 0.0);
            CHECK(e <= 1.0);
        }
    }
    // Bilinear in log current: halfway between 100 uA and 1 mA in decades.
    CHECK(table.eta(1.0, std::sqrt(100e-6 * 1e-3)) == doctest::Approx(0.83));
    CHECK(table.eta(0.0, 0.0) == doctest::Approx(0.55));

    std::istringstream csv("v_in_v,i_in_a,eta\n1,1e-4,0.5\n1,1e-3,0.7\n2,1e-4,0.6\n2,1e-3,0.8\n");
    const EfficiencyTable loaded = EfficiencyTable::from_csv(csv);
    CHECK(loaded.eta(1.5, std::sqrt(1e-7)) == doctest::Approx(0.65));

    std::istringstream bad_header("v,i,eta\n1,1,1\n");
    CHECK_THROWS_AS((void)EfficiencyTable::from_csv(bad_header), ConfigError);
    std::istringstream ragged("v_in_v,i_in_a,eta\n1,1e-4,0.5\n2,1e-3,0.8\n");
    CHECK_THROWS_AS((void)EfficiencyTable::from_csv(ragged), ConfigError);
    CHECK_THROWS_AS(EfficiencyTable({{1.0, 1e-4, 1.5}}), ConfigError);
}

TEST_CASE("converter input does not see the capacitor") {
    PiezoModel m;
    VibrationProfile p;
    const Topology topo = Topology::converter_based();
    const Forcing f = Forcing::from(p);
    CapLoadState low;
    low.v_cap_v = 2.2;
    CapLoadState high;
    high.v_cap_v = 3.3;
    BridgeState a;
    BridgeState b;
    for (long long n = 0; n < 100000; ++n) {
        const FrontendFlows fa = converter_step(m, a, f, n * 1e-5, topo, low, {1.2, true}, 1e-5);
        const FrontendFlows fb = converter_step(m, b, f, n * 1e-5, topo, high, {1.2, true}, 1e-5);
        REQUIRE(std::memcmp(&a.piezo, &b.piezo, sizeof(PiezoState)) == 0);
        REQUIRE(fa.charge_c() == fb.charge_c());
    }
}

TEST_CASE("converter-less current falls as the capacitor charges") {
    PiezoModel m;
    VibrationProfile p;
    double prev = std::numeric_limits<double>::infinity();
    for (double v : {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0}) {
        const double i = held_cap_current(m, p, v, 0.35, 3.0, 1.0);
        CHECK(i <= prev);
        prev = i;
    }
    CHECK(prev == 0.0);
}

TEST_CASE("topology validation") {
    Topology t = Topology::converter_less();
    CHECK_NOTHROW(t.validate());
    t.converter = ConverterParams{};
    CHECK_THROWS_AS(t.validate(), ConfigError);

    Topology cb = Topology::converter_based();
    cb.converter.reset();
    CHECK_THROWS_AS(cb.validate(), ConfigError);

    ConverterParams low;
    low.v_threshold_v = 0.6;
    const Topology degenerate = Topology::converter_based(low);
    CHECK_NOTHROW(degenerate.validate());
    CHECK(degenerate.warning().has_value());
    CHECK_FALSE(Topology::converter_based().warning().has_value());

    CHECK(topology_kind_from("ConverterLess") == TopologyKind::ConverterLess);
    CHECK_THROWS_AS((void)topology_kind_from("Buck"), ConfigError);
}
