#pragma once

#include "kehsim/frontend.hpp"
#include "kehsim/transducer.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kehsim {

struct SimConfig;

// =============================================================================
// MPP estimation
// =============================================================================

struct MppEstimate {
    double v_mpp_v = 0.0;
    double i_mpp_a = 0.0;
    double p_mpp_w = 0.0;
    double voc_v = 0.0;
};

/// Sample of `curve` maximising V*I; ties go to the lower voltage. An all-zero
/// curve yields v_mpp = p_mpp = 0.
[[nodiscard]] MppEstimate find_mpp(const IVCurve& curve);

enum class TrackerKind { StaticSweep, FractionalOCV, OracleDynamic };

[[nodiscard]] const char* to_string(TrackerKind kind);
[[nodiscard]] TrackerKind tracker_kind_from(const std::string& text);

/// 0.5 V to 2.9 V in 100 mV steps.
[[nodiscard]] std::vector<double> default_threshold_grid();

struct TrackerPolicy {
    TrackerKind kind = TrackerKind::StaticSweep;
    double k_fraction = 0.65;
    /// Tracking/sampling rate. Unset means the converter's own sampling
    /// interval (FractionalOCV) or is an error (OracleDynamic).
    std::optional<double> f_t_hz;
    std::vector<double> sweep_grid_v = default_threshold_grid();

    void validate() const;
};

/// Quasi-static MPP for the current mechanical state.
///
/// The rectified current into a DC voltage V from a sinusoidal source of
/// displacement amplitude X is (2 w / pi) (theta X - C_p (V + 2 vd)); its
/// V*I maximum sits at half the zero-current voltage. X is the envelope
/// sqrt(x^2 + (v/w)^2) at excitation frequency w.
[[nodiscard]] double oracle_mpp_voltage(const PiezoModel& model, const PiezoState& state,
                                        double omega, double diode_drop_v);

// =============================================================================
// Fractional open-circuit voltage tracking
// =============================================================================

/// Periodically disconnects the harvester, records the open-circuit peak
/// |v_p| over the sampling window and sets the threshold to
/// k * (peak - 2 vd). Windows open at t = k * interval, k >= 1.
class FractionalOcvTracker {
public:
    /// Throws ConfigError if the window is shorter than one excitation period.
    FractionalOcvTracker(double k_fraction, double interval_s, double window_s,
                         double diode_drop_v, double excitation_period_s);

    [[nodiscard]] bool disconnected(double t) const;

    /// Feeds |v_p| at the end of a step that started at t. Returns the new
    /// threshold when a sampling window closes.
    std::optional<double> observe(double t, double dt, double vp_abs);

    [[nodiscard]] long long samples() const { return samples_; }
    [[nodiscard]] double window_s() const { return window_; }

private:
    double k_;
    double interval_;
    double window_;
    double vd_;
    double peak_ = 0.0;
    bool sampling_ = false;
    long long samples_ = 0;
};

// =============================================================================
// Threshold sweep and tracking-rate study
// =============================================================================

struct SweepPoint {
    double threshold_v = 0.0;
    double avg_power_w = 0.0;
    double closure_error = 0.0;  ///< worst relative ledger residual of the run
    std::string error;           ///< non-empty when the run failed
};

struct StaticSweepResult {
    double best_threshold_v = 0.0;
    double best_power_w = 0.0;
    std::vector<SweepPoint> table;
};

/// One full converter-based simulation per threshold; returns the argmax of
/// the windowed harvested power (ties to the lower threshold) and the table.
/// Failed points are recorded with their error and skipped for the argmax.
[[nodiscard]] StaticSweepResult static_sweep(const SimConfig& base,
                                             std::span<const double> thresholds, int jobs = 1);

/// Picks the best point of an already computed table.
[[nodiscard]] StaticSweepResult summarize_sweep(std::vector<SweepPoint> table);

struct MppTraceSample {
    double t_s;
    double v_mpp_v;
};

struct TrackingRow {
    double f_t_hz = 0.0;
    double avg_power_w = 0.0;
    double closure_error = 0.0;
    std::vector<MppTraceSample> trace;
};

struct TrackingOptions {
    double dt_s = 1e-5;
    double diode_drop_v = 0.35;
    /// Start from the steady state reached under continuous tracking rather
    /// than from rest.
    bool start_settled = false;
    int jobs = 1;
};

/// For each f_T the DC side is held at the oracle MPP, refreshed every 1/f_T
/// seconds, for the profile's duration. Reports the DC-side extracted power
/// averaged over the run and the per-update MPP voltage series.
[[nodiscard]] std::vector<TrackingRow> tracking_study(const PiezoModel& model,
                                                      const VibrationProfile& profile,
                                                      std::span<const double> f_t_grid,
                                                      const TrackingOptions& options = {});

}  // namespace kehsim
