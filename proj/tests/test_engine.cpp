#include "doctest.h"

#include "kehsim/engine.hpp"
#include "kehsim/errors.hpp"
#include "kehsim/io.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

using namespace kehsim;

namespace {

SimConfig quiet(TopologyKind kind, double duration_s) {
    SimConfig c;
    c.profile.amplitude_mvpp = 0.0;
    c.profile.duration_s = duration_s;
    c.cap_load.v_cap_v = 3.0;
    c.topology = kind == TopologyKind::ConverterLess ? Topology::converter_less()
                                                     : Topology::converter_based();
    return c;
}

std::string trace_csv(const SimTrace& t) {
    std::ostringstream out;
    write_trace_csv(out, t.samples);
    return out.str();
}

}  // namespace

TEST_CASE("converter-less capacitor is untouched without vibration") {
    const SimTrace t = run_sim(quiet(TopologyKind::ConverterLess, 5.0));
    CHECK(t.summary.avg_harvest_power_w == 0.0);
    for (const auto& s : t.samples) {
        REQUIRE(s.v_cap_v == 3.0);
    }
}

TEST_CASE("converter-based standby drains 42 uJ in 10 s") {
    const SimTrace t = run_sim(quiet(TopologyKind::ConverterBased, 10.0));
    const RunLedger& l = t.summary.total;
    CHECK(l.cap_start_j - l.cap_end_j == doctest::Approx(42e-6).epsilon(0.01));
    CHECK(l.quiescent_j == doctest::Approx(42e-6).epsilon(1e-9));
}

TEST_CASE("config validation") {
    SimConfig c;
    c.dt_s = 1e-3;
    try {
        c.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.key() == "sim.dt_s");
    }
    c = {};
    c.transient_skip_s = 60.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.topology = Topology::converter_less();
    c.tracker.kind = TrackerKind::FractionalOCV;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("transient skip defaults") {
    SimConfig c;
    CHECK(c.effective_skip_s() == doctest::Approx(28.0));
    c.profile.duration_s = 10.0;
    CHECK(c.effective_skip_s() == doctest::Approx(5.0));
    c.transient_skip_s = 1.5;
    CHECK(c.effective_skip_s() == 1.5);
}

TEST_CASE("runs are bitwise deterministic") {
    SimConfig c;
    c.profile.duration_s = 4.0;
    c.tracker.kind = TrackerKind::FractionalOCV;
    c.tracker.f_t_hz = 1.0;
    const SimTrace a = run_sim(c);
    const SimTrace b = run_sim(c);
    CHECK(trace_csv(a) == trace_csv(b));
    CHECK(std::memcmp(&a.summary.total, &b.summary.total, sizeof(RunLedger)) == 0);
}

TEST_CASE("trace decimation and series") {
    SimConfig c;
    c.profile.duration_s = 3.0;
    const SimTrace t = run_sim(c);
    REQUIRE(t.samples.size() == 300);
    CHECK(t.samples.front().t_s == doctest::Approx(0.01));
    CHECK(t.samples.back().t_s == doctest::Approx(3.0));
    c.record_trace = false;
    CHECK(run_sim(c).samples.empty());
}

TEST_CASE("ledger closes for both topologies") {
    for (TopologyKind kind : {TopologyKind::ConverterLess, TopologyKind::ConverterBased}) {
        SimConfig c;
        c.profile.duration_s = 20.0;
        c.cap_load.v_cap_v = kind == TopologyKind::ConverterLess ? 0.0 : 3.3;
        if (kind == TopologyKind::ConverterLess) {
            c.topology = Topology::converter_less();
        }
        const SimTrace t = run_sim(c);
        CHECK(t.summary.total.closure_error() < 1e-3);
        CHECK(t.summary.window.closure_error() < 1e-3);
        CHECK(t.summary.total.transducer_out_j > 0.0);
    }
}

TEST_CASE("load cycles pass through the ledger") {
    SimConfig c;
    c.profile.duration_s = 20.0;
    c.cap_load.v_cap_v = 3.37;
    const SimTrace t = run_sim(c);
    CHECK(t.summary.activations >= 1);
    CHECK(t.summary.total.load_j > 0.0);
    CHECK(t.summary.total.closure_error() < 1e-3);
}

TEST_CASE("harvested power is recomputable and additive") {
    SimConfig c;
    c.profile.duration_s = 12.0;
    c.transient_skip_s = 4.0;
    const SimTrace t = run_sim(c);
    const SimSummary& s = t.summary;
    CHECK(s.window_s == doctest::Approx(8.0));
    CHECK(s.avg_harvest_power_w ==
          doctest::Approx(s.window.harvested_j() / s.window_s).epsilon(1e-3));
    // Summing the decimated sub-intervals gives back the window energy.
    double energy = 0.0;
    for (const auto& sample : t.samples) {
        if (sample.t_s > 4.0 + 1e-9) {
            energy += sample.p_harvest_w * 0.01;
        }
    }
    CHECK(energy == doctest::Approx(s.window.energy_to_cap_j).epsilon(1e-9));
}

TEST_CASE("harvested power is insensitive to the time step") {
    SimConfig c;
    c.profile.duration_s = 10.0;
    const double coarse = run_sim(c).summary.avg_harvest_power_w;
    c.dt_s = 5e-6;
    const double fine = run_sim(c).summary.avg_harvest_power_w;
    CHECK(coarse == doctest::Approx(fine).epsilon(0.01));
}

TEST_CASE("divergence is reported with the step index") {
    SimConfig c;
    c.profile.duration_s = 0.01;
    c.profile.force_gain = 1e306;  // overflows the mechanical state
    try {
        (void)run_sim(c);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("step") != std::string::npos);
        CHECK(msg.find("x = ") != std::string::npos);
    }
}

TEST_CASE("degenerate converter threshold warns") {
    SimConfig c = quiet(TopologyKind::ConverterBased, 1.0);
    c.topology.converter->v_threshold_v = 0.6;
    const SimTrace t = run_sim(c);
    CHECK_FALSE(t.summary.warnings.empty());
}

TEST_CASE("grid rows come out in grid order for any job count") {
    SimConfig base;
    base.profile.duration_s = 2.0;
    GridSpec g;
    g.frequencies_hz = {20.0, 25.0};
    g.amplitudes_mvpp = {600.0, 1000.0};
    g.thresholds_v = {0.6, 1.0};
    const SweepTable one = run_grid(base, g, 1);
    const SweepTable three = run_grid(base, g, 3);
    REQUIRE(one.rows.size() == 8);
    REQUIRE(three.rows.size() == 8);
    for (std::size_t i = 0; i < one.rows.size(); ++i) {
        CHECK(one.rows[i].frequency_hz == three.rows[i].frequency_hz);
        CHECK(one.rows[i].amplitude_mvpp == three.rows[i].amplitude_mvpp);
        CHECK(one.rows[i].topology == three.rows[i].topology);
        CHECK(std::memcmp(&one.rows[i].avg_power_w, &three.rows[i].avg_power_w, sizeof(double)) == 0);
    }
    CHECK(one.rows[0].frequency_hz == 20.0);
    CHECK(one.rows[0].amplitude_mvpp == 600.0);
    CHECK(one.rows[0].topology == TopologyKind::ConverterLess);
    CHECK(one.rows[1].topology == TopologyKind::ConverterBased);
    CHECK(one.rows[1].sweep.size() == 2);
    CHECK(one.rows[1].best_threshold_v.has_value());
    CHECK(one.find(25.0, 1000.0, TopologyKind::ConverterBased) == &one.rows[7]);
}

TEST_CASE("comparison markers and means") {
    auto row = [](double f, double a, TopologyKind k, double p) {
        SweepRow r;
        r.frequency_hz = f;
        r.amplitude_mvpp = a;
        r.topology = k;
        r.avg_power_w = p;
        return r;
    };
    const auto CL = TopologyKind::ConverterLess;
    const auto CB = TopologyKind::ConverterBased;
    SweepTable t;
    t.rows = {row(25, 200, CL, 0.0), row(25, 200, CB, 5.0),   row(25, 400, CL, 2.0),
              row(25, 400, CB, 2.0), row(25, 600, CL, 1.0),   row(25, 600, CB, 11.0),
              row(10, 200, CL, 0.0), row(10, 200, CB, 0.0),   row(10, 400, CB, 1.0)};
    const ComparisonReport r = compare_report(t, 25.0);
    REQUIRE(r.cells.size() == 5);
    CHECK(r.cells[0].kind == RatioKind::Infinite);
    CHECK(r.cells[0].ratio_text() == "inf");
    CHECK(r.cells[1].kind == RatioKind::Finite);
    CHECK(r.cells[1].ratio == 1.0);
    CHECK(r.cells[2].ratio == 11.0);
    CHECK(r.cells[3].kind == RatioKind::Undefined);
    CHECK(r.cells[4].kind == RatioKind::Missing);
    CHECK(r.gaps.size() == 1);
    CHECK(r.resonance_frequency_hz == 25.0);
    CHECK(r.resonance_mean_ratio == doctest::Approx(6.0));
    CHECK(r.per_frequency[0].infinite_cells == 1);
    CHECK(std::isnan(r.per_frequency[1].mean_ratio));
}
