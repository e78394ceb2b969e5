#pragma once

#include "kehsim/excitation.hpp"
#include "kehsim/frontend.hpp"
#include "kehsim/mppt.hpp"
#include "kehsim/storage.hpp"
#include "kehsim/transducer.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kehsim {

// =============================================================================
// Configuration
// =============================================================================

struct SimConfig {
    VibrationProfile profile;
    PiezoModel model;
    Topology topology;
    CapLoadState cap_load;
    TrackerPolicy tracker;
    double dt_s = 1e-5;
    /// Warm-up excluded from averages. Unset: max(2 s, 20 Q/f0), capped at
    /// half the duration.
    std::optional<double> transient_skip_s;
    double trace_rate_hz = 100.0;
    bool record_trace = true;
    std::uint64_t seed = 0;  ///< reserved; nothing is randomised

    void validate() const;
    [[nodiscard]] double effective_skip_s() const;
};

// =============================================================================
// Results
// =============================================================================

struct TraceSample {
    double t_s;
    double vp_v;
    double i_rect_a;     ///< mean rectified current over the sample interval
    double v_cap_v;
    bool load_on;
    double p_harvest_w;  ///< mean power into the capacitor over the sample interval
};

/// Energy bookkeeping of a run or a window of it.
struct RunLedger {
    double work_in_j = 0.0;
    double damping_j = 0.0;
    double leakage_j = 0.0;
    double transducer_out_j = 0.0;  ///< electrical energy at the piezo terminals
    double mech_stored_start_j = 0.0;
    double mech_stored_end_j = 0.0;
    double charge_c = 0.0;
    double dc_energy_j = 0.0;
    double rectifier_loss_j = 0.0;
    double converter_loss_j = 0.0;
    double quiescent_j = 0.0;
    double energy_to_cap_j = 0.0;
    double load_j = 0.0;
    double cap_start_j = 0.0;
    double cap_end_j = 0.0;
    double disconnected_s = 0.0;
    double disconnect_loss_j = 0.0;
    long long mpp_samples = 0;

    /// |out - (dE_cap + load + losses)| relative to the transducer output.
    [[nodiscard]] double electrical_residual() const;
    /// |W - (dE_stored + damping + leakage + out)| relative to the work input.
    [[nodiscard]] double mechanical_residual() const;
    [[nodiscard]] double closure_error() const;
    /// (dE_cap + load + quiescent) / T, the energy handed to the capacitor.
    [[nodiscard]] double harvested_j() const {
        return cap_end_j - cap_start_j + load_j + quiescent_j;
    }
};

struct SimSummary {
    double avg_harvest_power_w = 0.0;  ///< windowed energy into the capacitor / window length
    double window_start_s = 0.0;
    double window_s = 0.0;
    long long activations = 0;
    double final_threshold_v = 0.0;
    RunLedger total;
    RunLedger window;
    std::vector<std::string> warnings;
};

struct SimTrace {
    std::vector<TraceSample> samples;
    SimSummary summary;
};

/// Fixed-step run: excitation, coupled transducer/frontend step, capacitor
/// and load FSM, ledger. Identical configs give bitwise-identical results.
/// Throws NumericalError with the step index and state on non-finite state.
[[nodiscard]] SimTrace run_sim(const SimConfig& config);

// =============================================================================
// Grid experiments
// =============================================================================

/// Default excitation grids: 10-50 Hz around the 25 Hz resonance and
/// 200-1000 mV p-p in five levels.
[[nodiscard]] std::vector<double> default_frequency_grid();
[[nodiscard]] std::vector<double> default_amplitude_grid();

struct GridSpec {
    std::vector<double> frequencies_hz = default_frequency_grid();
    std::vector<double> amplitudes_mvpp = default_amplitude_grid();
    std::vector<TopologyKind> topologies = {TopologyKind::ConverterLess,
                                            TopologyKind::ConverterBased};
    std::vector<double> thresholds_v = default_threshold_grid();
};

struct SweepRow {
    double frequency_hz = 0.0;
    double amplitude_mvpp = 0.0;
    TopologyKind topology = TopologyKind::ConverterLess;
    double avg_power_w = 0.0;
    std::optional<double> best_threshold_v;
    double closure_error = 0.0;
    std::vector<SweepPoint> sweep;  ///< converter-based threshold table
    std::string error;
};

struct SweepTable {
    std::vector<SweepRow> rows;

    [[nodiscard]] const SweepRow* find(double frequency_hz, double amplitude_mvpp,
                                       TopologyKind topology) const;
};

/// Converter-based cells run a static sweep and report the best threshold;
/// converter-less cells run once. Rows come out in (frequency, amplitude,
/// topology) grid order regardless of `jobs`.
[[nodiscard]] SweepTable run_grid(const SimConfig& base, const GridSpec& grid, int jobs = 1);

enum class RatioKind { Finite, Infinite, Undefined, Missing };

struct CellComparison {
    double frequency_hz;
    double amplitude_mvpp;
    double converter_based_w;
    double converter_less_w;
    RatioKind kind;
    double ratio;  ///< meaningful when kind == Finite

    [[nodiscard]] std::string ratio_text() const;
};

struct FrequencyMean {
    double frequency_hz;
    double mean_ratio;  ///< NaN if no finite ratio
    int finite_cells;
    int infinite_cells;
};

struct ComparisonReport {
    std::vector<CellComparison> cells;
    std::vector<FrequencyMean> per_frequency;
    double resonance_frequency_hz = 0.0;
    double resonance_mean_ratio = 0.0;  ///< NaN if no finite ratio at resonance
    std::vector<std::string> gaps;
};

/// Converter-based / converter-less power per cell. Cells with zero
/// converter-less power and positive converter-based power are Infinite and
/// excluded from means. The resonance row is the grid frequency nearest f0.
[[nodiscard]] ComparisonReport compare_report(const SweepTable& table, double f0_hz = 25.0);

}  // namespace kehsim
