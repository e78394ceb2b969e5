#pragma once

#include "kehsim/excitation.hpp"

#include <span>
#include <vector>

namespace kehsim {

// =============================================================================
// Electromechanical model
// =============================================================================

/// Default coupling factor, N/V. Calibrated together with kDefaultForceGain.
inline constexpr double kDefaultCoupling = 1.0e-3;

/// Linear single-mode piezoelectric cantilever.
///
/// Governing equations:
///
///     m x'' + c x' + k x + theta v_p = F(t)
///     C_p v_p' = theta x' - v_p / R_p - i_out
///
/// with k = m (2 pi f0)^2 and c = 2 pi f0 m / Q. A coupling of zero decouples
/// the mechanical and electrical halves (used for analytic checks).
struct PiezoModel {
    double f0_hz = 25.0;
    double q_factor = 35.0;
    double mass_kg = 24.62e-3;
    double coupling_n_per_v = kDefaultCoupling;
    double cp_farad = 120e-9;
    double rp_ohm = 5e6;

    void validate() const;

    [[nodiscard]] double stiffness() const;
    [[nodiscard]] double damping() const;
    /// Largest step the integrator accepts, 1/(200 f0).
    [[nodiscard]] double max_step() const { return 1.0 / (200.0 * f0_hz); }
};

struct PiezoState {
    double x_m = 0.0;
    double v_mps = 0.0;
    double vp_v = 0.0;
};

/// Energy and charge integrated over one or more steps. All terms are
/// integrated alongside the state with the same RK4 stages, so the balance
///
///     work_in = d(stored) + damping + leakage + electrical
///
/// holds to integrator accuracy.
struct TransducerFlows {
    double work_in_j = 0.0;      ///< integral of F x'
    double damping_j = 0.0;      ///< integral of c x'^2
    double leakage_j = 0.0;      ///< integral of v_p^2 / R_p
    double electrical_j = 0.0;   ///< integral of v_p i_out (terminal energy)
    double charge_c = 0.0;       ///< rectified charge for bridge steps, signed otherwise

    TransducerFlows& operator+=(const TransducerFlows& o);
};

/// Mechanical kinetic + elastic energy plus the energy held in C_p.
[[nodiscard]] double stored_energy(const PiezoModel& model, const PiezoState& state);

/// Sinusoid plus offset, evaluated at the RK4 stage times.
struct Forcing {
    double amplitude_n = 0.0;
    double omega = 0.0;
    double offset_n = 0.0;

    static Forcing from(const VibrationProfile& profile) {
        return {profile.force_peak_n(), profile.omega(), 0.0};
    }
    static Forcing constant(double force_n) { return {0.0, 0.0, force_n}; }

    [[nodiscard]] double at(double t) const;
};

/// One explicit RK4 step with a prescribed terminal current held over the step.
/// Throws ConfigError when dt is outside (0, model.max_step()].
[[nodiscard]] PiezoState step(const PiezoModel& model, const PiezoState& state, double force_n,
                              double i_out_a, double dt_s, TransducerFlows* flows = nullptr);

[[nodiscard]] PiezoState step(const PiezoModel& model, const PiezoState& state,
                              const Forcing& forcing, double t, double i_out_a, double dt_s,
                              TransducerFlows* flows = nullptr);

// =============================================================================
// Full-bridge clamped stepping
// =============================================================================

enum class Conduction { Forward, Reverse, Blocked };

/// Transducer state plus the bridge's conduction mode.
struct BridgeState {
    PiezoState piezo;
    Conduction mode = Conduction::Blocked;
};

/// Steps the transducer behind an ideal full-bridge whose AC side is clamped
/// at +-v_clamp (DC voltage plus two diode drops). An infinite v_clamp
/// disconnects the bridge.
///
/// Conduction changes inside a step are located by root finding and the step
/// is continued in the new mode. If the clamp drops below |v_p| between steps
/// the surplus charge on C_p is dumped through the bridge and counted in the
/// flows. `flows.charge_c` accumulates the rectified (non-negative) charge.
void bridge_step(const PiezoModel& model, BridgeState& bridge, const Forcing& forcing, double t,
                 double v_clamp, double dt_s, TransducerFlows& flows);

// =============================================================================
// Characterisation
// =============================================================================

/// Steady-state peak |v_p| with the bridge disconnected. Steady state is five
/// consecutive cycles whose peak changes by less than `tolerance` relative.
/// Throws ConvergenceError after 2000 cycles.
[[nodiscard]] double open_circuit_amplitude(const PiezoModel& model,
                                            const VibrationProfile& profile,
                                            double dt_s = 1e-5, double tolerance = 0.005);

struct IVSample {
    double voltage_v = 0.0;
    double current_a = 0.0;
    double displacement_amp_m = 0.0;  ///< peak |x| over the averaging window
};

/// Rectified DC-side current-voltage characteristic.
struct IVCurve {
    std::vector<IVSample> samples;
    double voc_v = 0.0;
};

struct IVOptions {
    double diode_drop_v = 0.35;
    int average_cycles = 10;
    double dt_s = 1e-5;
};

/// Emulates a source-meter sweep: the DC side is held at each grid voltage
/// for `settle_cycles` excitation cycles, then the rectified current is
/// averaged over `average_cycles`. The sweep stops at the first grid point
/// with zero current. The state carries over between grid points.
[[nodiscard]] IVCurve measure_iv_curve(const PiezoModel& model, const VibrationProfile& profile,
                                       std::span<const double> v_grid, int settle_cycles,
                                       const IVOptions& options = {});

/// Evenly spaced grid [0, v_max] with `points` entries.
[[nodiscard]] std::vector<double> linear_grid(double v_max, int points);

}  // namespace kehsim
