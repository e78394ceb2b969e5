#pragma once

#include "kehsim/storage.hpp"
#include "kehsim/transducer.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace kehsim {

struct RectifierParams {
    double vd_v = 0.35;  ///< per-diode forward drop (Schottky)

    void validate() const;
};

/// Conduction state of the full bridge for a terminal voltage vp against a
/// DC-side voltage v_dc. Forward iff vp > v_dc + 2 vd, reverse iff
/// vp < -(v_dc + 2 vd), blocked otherwise.
[[nodiscard]] Conduction rectifier_conduction(double vp_v, double v_dc_v, const RectifierParams& params);

// =============================================================================
// Converter efficiency map
// =============================================================================

struct EfficiencyPoint {
    double v_in_v;
    double i_in_a;
    double eta;
};

/// Converter efficiency over input voltage and input current.
///
/// The points must cover a rectilinear grid (every voltage paired with every
/// current). Lookup is bilinear in (v_in, log10 i_in); inputs outside the
/// grid are clamped to its edges and the result is clamped to [0, 1].
class EfficiencyTable {
public:
    EfficiencyTable();
    explicit EfficiencyTable(std::vector<EfficiencyPoint> points);

    /// Reads `v_in_v,i_in_a,eta` CSV (header required).
    static EfficiencyTable from_csv(std::istream& in);
    static EfficiencyTable from_csv_file(const std::string& path);

    [[nodiscard]] double eta(double v_in_v, double i_in_a) const;
    [[nodiscard]] const std::vector<EfficiencyPoint>& points() const { return points_; }

private:
    std::vector<EfficiencyPoint> points_;
    std::vector<double> volts_;
    std::vector<double> log_amps_;
    std::vector<double> grid_;  // row-major [volt][amp]
};

/// Averaged boost-converter model: ideal input clamp at the threshold,
/// efficiency map on the delivered power, and a standby draw on the storage
/// capacitor.
struct ConverterParams {
    double v_threshold_v = 1.0;
    double quiescent_w = 4.2e-6;           ///< standby draw at 3 V
    bool quiescent_scales_with_vcap = false;  ///< scale by v_cap/3 V when set
    EfficiencyTable efficiency;
    double mpp_sample_interval_s = 16.0;
    double mpp_sample_duration_s = 0.256;

    void validate() const;
    [[nodiscard]] double quiescent_power(double v_cap_v) const;
};

enum class TopologyKind { ConverterLess, ConverterBased };

[[nodiscard]] const char* to_string(TopologyKind kind);
[[nodiscard]] TopologyKind topology_kind_from(const std::string& text);

struct Topology {
    TopologyKind kind = TopologyKind::ConverterBased;
    RectifierParams rectifier;
    std::optional<ConverterParams> converter = ConverterParams{};

    static Topology converter_less(RectifierParams rect = {}) {
        return {TopologyKind::ConverterLess, rect, std::nullopt};
    }
    static Topology converter_based(ConverterParams conv = {}, RectifierParams rect = {}) {
        return {TopologyKind::ConverterBased, rect, std::move(conv)};
    }

    void validate() const;
    /// Non-empty when the configuration is legal but degenerate.
    [[nodiscard]] std::optional<std::string> warning() const;
};

// =============================================================================
// Per-step transitions
// =============================================================================

/// Energy and charge movements of one frontend step. `energy_to_cap_j` is the
/// energy handed to the storage capacitor; `quiescent_j` is the standby draw
/// requested from it.
struct FrontendFlows {
    TransducerFlows transducer;
    double dc_energy_j = 0.0;       ///< energy on the DC side of the bridge
    double rectifier_loss_j = 0.0;
    double converter_loss_j = 0.0;
    double quiescent_j = 0.0;
    double energy_to_cap_j = 0.0;

    [[nodiscard]] double charge_c() const { return transducer.charge_c; }
};

/// Converter-less: the bridge output is the capacitor, so the AC side clamps
/// at v_cap + 2 vd. Energy to the capacitor is v_cap times the conducted charge.
[[nodiscard]] FrontendFlows converterless_step(const PiezoModel& model, BridgeState& bridge,
                                               const Forcing& forcing, double t,
                                               const Topology& topology,
                                               const CapLoadState& cap, double dt_s);

/// Runtime input of the converter. A disconnected converter draws no current
/// from the bridge but still consumes its quiescent power.
struct ConverterInput {
    double v_threshold_v;
    bool connected = true;
};

/// Converter-based: the bridge output is held at the converter's input
/// threshold, independent of v_cap.
[[nodiscard]] FrontendFlows converter_step(const PiezoModel& model, BridgeState& bridge,
                                           const Forcing& forcing, double t,
                                           const Topology& topology, const CapLoadState& cap,
                                           const ConverterInput& input, double dt_s);

}  // namespace kehsim
