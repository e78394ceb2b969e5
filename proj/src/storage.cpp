#include "kehsim/storage.hpp"

#include "kehsim/errors.hpp"

#include <algorithm>
#include <cmath>

namespace kehsim {

void CapLoadState::validate() const {
    if (!(c_farad > 0.0)) {
        throw ConfigError("must be > 0", "cap_load.c_farad");
    }
    if (!(v_cap_v >= 0.0) || !std::isfinite(v_cap_v)) {
        throw ConfigError("must be >= 0", "cap_load.v_cap_v");
    }
    if (!(v_off_v > 0.0)) {
        throw ConfigError("must be > 0", "cap_load.v_off_v");
    }
    if (!(v_on_v > v_off_v)) {
        throw ConfigError("must exceed cap_load.v_off_v", "cap_load.v_on_v");
    }
    if (!(p_load_w >= 0.0)) {
        throw ConfigError("must be >= 0", "cap_load.p_load_w");
    }
}

double CapLoadState::energy() const { return cap_energy(c_farad, v_cap_v); }

double cap_energy(double c_farad, double v_cap_v) { return 0.5 * c_farad * v_cap_v * v_cap_v; }

double load_energy_per_cycle(double c_farad, double v_on_v, double v_off_v) {
    if (v_off_v > v_on_v) {
        throw ArgumentError("turn-off threshold exceeds turn-on threshold");
    }
    return 0.5 * c_farad * (v_on_v * v_on_v - v_off_v * v_off_v);
}

CapLoadState step_cap_load(const CapLoadState& state, double e_in_j, double e_draw_j, double dt_s,
                           CapStepFlows* flows) {
    CapLoadState next = state;
    double energy = state.energy() + e_in_j;
    const double quiescent = std::min(e_draw_j, energy);
    energy -= quiescent;
    double load = 0.0;
    if (state.load_on) {
        load = std::min(state.p_load_w * dt_s, energy);
        energy -= load;
    }
    energy = std::max(energy, 0.0);
    next.v_cap_v = std::sqrt(2.0 * energy / state.c_farad);
    next.e_delivered_j += load;

    if (!next.load_on && next.v_cap_v >= next.v_on_v) {
        next.load_on = true;
        ++next.activations;
    } else if (next.load_on && next.v_cap_v <= next.v_off_v) {
        next.load_on = false;
    }
    if (flows != nullptr) {
        flows->quiescent_j = quiescent;
        flows->load_j = load;
    }
    return next;
}

}  // namespace kehsim
