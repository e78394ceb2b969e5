#pragma once

#include "kehsim/engine.hpp"

#include <string>
#include <vector>

namespace YAML {
class Node;
}

namespace kehsim {

struct IvSettings {
    double v_max_v = 3.0;
    int points = 61;
    int settle_cycles = 100;
    int average_cycles = 10;
};

struct MpptSettings {
    std::vector<double> f_t_grid_hz = {0.0625, 0.5, 5.0, 50.0, 500.0};
    bool start_settled = false;
};

/// Everything a run needs. Threshold sweeps use `sim.tracker.sweep_grid_v`.
struct AppConfig {
    SimConfig sim;
    GridSpec grid;
    IvSettings iv;
    MpptSettings mppt;
};

/// Builds a config from a YAML document. `profile.frequency_hz` and
/// `profile.amplitude_mvpp` are required; every other key falls back to its
/// default. Unknown keys and malformed values raise ConfigError naming the
/// dotted key. A top-level `run` section (written by manifests) is ignored.
[[nodiscard]] AppConfig config_from_yaml(const YAML::Node& root);

/// Applies `dotted.key=value` to a document; the value is parsed as YAML so
/// lists (`[1, 2]`) and scalars both work.
void apply_override(YAML::Node& root, const std::string& assignment);

/// Reads `path`, applies the overrides in order and builds the config.
[[nodiscard]] AppConfig load_config(const std::string& path,
                                    const std::vector<std::string>& overrides = {});

/// Built-in defaults as a document (what `configs/default.yaml` holds).
[[nodiscard]] YAML::Node default_document();

/// Fully resolved config. Numbers use shortest round-trip text, so loading
/// the result reproduces the config bit for bit.
[[nodiscard]] YAML::Node to_yaml(const AppConfig& config);

[[nodiscard]] std::string emit(const YAML::Node& node);

}  // namespace kehsim
