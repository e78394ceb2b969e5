#include "kehsim/config.hpp"
#include "kehsim/errors.hpp"

#include <doctest.h>
#include <yaml-cpp/yaml.h>

#include <cstring>
#include <string>

using namespace kehsim;

namespace {

YAML::Node minimal() {
    return YAML::Load("profile: {frequency_hz: 25, amplitude_mvpp: 1000}");
}

std::string error_of(const YAML::Node& doc) {
    try {
        (void)config_from_yaml(doc);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("minimal document yields the built-in defaults") {
    const AppConfig cfg = config_from_yaml(minimal());
    const AppConfig def;
    CHECK(cfg.sim.profile.duration_s == def.sim.profile.duration_s);
    CHECK(cfg.sim.model.coupling_n_per_v == def.sim.model.coupling_n_per_v);
    CHECK(cfg.sim.topology.kind == TopologyKind::ConverterBased);
    CHECK(cfg.grid.frequencies_hz.size() == 5);
    CHECK(cfg.grid.thresholds_v == def.sim.tracker.sweep_grid_v);
}

TEST_CASE("missing required keys are named") {
    CHECK(error_of(YAML::Load("profile: {amplitude_mvpp: 1000}")).find("profile.frequency_hz") !=
          std::string::npos);
    CHECK(error_of(YAML::Load("profile: {frequency_hz: 25}")).find("profile.amplitude_mvpp") !=
          std::string::npos);
    CHECK(error_of(YAML::Load("{}")).find("profile.frequency_hz") != std::string::npos);
}

TEST_CASE("unknown and malformed keys are rejected with their path") {
    YAML::Node doc = minimal();
    doc["model"]["q_factr"] = 30;
    CHECK(error_of(doc).find("model.q_factr") != std::string::npos);

    doc = minimal();
    doc["sim"]["dt_s"] = "fast";
    CHECK(error_of(doc).find("sim.dt_s") != std::string::npos);

    doc = minimal();
    doc["tracker"]["kind"] = "Hill";
    CHECK(error_of(doc).find("tracker.kind") != std::string::npos);

    doc = minimal();
    doc["tracker"]["k_fraction"] = 1.0;
    CHECK(error_of(doc).find("tracker.k_fraction") != std::string::npos);
}

TEST_CASE("overrides replace scalars, lists and create sections") {
    YAML::Node doc = minimal();
    apply_override(doc, "topology.kind=ConverterLess");
    apply_override(doc, "grid.amplitudes_mvpp=[200, 1000]");
    apply_override(doc, "sim.dt_s=5e-6");
    const AppConfig cfg = config_from_yaml(doc);
    CHECK(cfg.sim.topology.kind == TopologyKind::ConverterLess);
    CHECK_FALSE(cfg.sim.topology.converter.has_value());
    CHECK(cfg.grid.amplitudes_mvpp == std::vector<double>{200, 1000});
    CHECK(cfg.sim.dt_s == 5e-6);
    CHECK_THROWS_AS(apply_override(doc, "no_equals_sign"), ConfigError);
}

TEST_CASE("resolved config round-trips bit for bit") {
    YAML::Node doc = minimal();
    apply_override(doc, "model.cp_farad=1.1234567890123457e-07");
    apply_override(doc, "profile.force_gain=0.1");
    apply_override(doc, "sim.transient_skip_s=3.3");
    apply_override(doc, "tracker.f_t_hz=0.3");
    const AppConfig a = config_from_yaml(doc);
    const std::string text = emit(to_yaml(a));
    const AppConfig b = config_from_yaml(YAML::Load(text));
    CHECK(emit(to_yaml(b)) == text);
    CHECK(std::memcmp(&a.sim.model, &b.sim.model, sizeof a.sim.model) == 0);
    CHECK(a.sim.profile.force_gain == b.sim.profile.force_gain);
    CHECK(b.sim.transient_skip_s == a.sim.transient_skip_s);
    CHECK(b.sim.tracker.f_t_hz == a.sim.tracker.f_t_hz);
}

TEST_CASE("a manifest run section is ignored on load") {
    YAML::Node doc = default_document();
    doc["run"]["command"] = "simulate";
    doc["run"]["outputs"].push_back("trace.csv");
    CHECK_NOTHROW((void)config_from_yaml(doc));
}

TEST_CASE("missing config file is a config error") {
    CHECK_THROWS_AS((void)load_config("/nonexistent/dir/cfg.yaml"), ConfigError);
}
