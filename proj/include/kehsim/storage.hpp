#pragma once

namespace kehsim {

/// Storage capacitor feeding an intermittently powered load.
///
/// The load switches on when v_cap reaches v_on and off when it falls to
/// v_off, and draws a constant power while on.
struct CapLoadState {
    double c_farad = 220e-6;
    double v_cap_v = 2.18;
    bool load_on = false;
    double v_on_v = 3.38;
    double v_off_v = 2.18;
    double p_load_w = 15e-3;
    long long activations = 0;
    double e_delivered_j = 0.0;

    void validate() const;
    [[nodiscard]] double energy() const;
};

/// E = C V^2 / 2
[[nodiscard]] double cap_energy(double c_farad, double v_cap_v);

/// Energy released between the turn-on and turn-off thresholds,
/// C (V_on^2 - V_off^2) / 2. Throws ArgumentError if v_off > v_on.
[[nodiscard]] double load_energy_per_cycle(double c_farad, double v_on_v, double v_off_v);

/// What a capacitor step actually moved; draws are capped by the stored energy.
struct CapStepFlows {
    double quiescent_j = 0.0;
    double load_j = 0.0;
};

/// Applies e_in, then the standby draw e_draw, then the load draw, and
/// updates the hysteresis FSM on the resulting voltage.
[[nodiscard]] CapLoadState step_cap_load(const CapLoadState& state, double e_in_j, double e_draw_j,
                                         double dt_s, CapStepFlows* flows = nullptr);

}  // namespace kehsim
