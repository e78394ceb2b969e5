#include "kehsim/frontend.hpp"

#include "kehsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>

namespace kehsim {

void RectifierParams::validate() const {
    if (!(vd_v >= 0.0) || !std::isfinite(vd_v)) {
        throw ConfigError("must be >= 0", "topology.rectifier.vd_v");
    }
}

Conduction rectifier_conduction(double vp_v, double v_dc_v, const RectifierParams& params) {
    const double clamp = v_dc_v + 2.0 * params.vd_v;
    if (vp_v > clamp) {
        return Conduction::Forward;
    }
    if (vp_v < -clamp) {
        return Conduction::Reverse;
    }
    return Conduction::Blocked;
}

// -----------------------------------------------------------------------------
// EfficiencyTable
// -----------------------------------------------------------------------------

namespace {

// Anchored at (1 V, 100 uA) >= 0.80 and rising with input voltage and current.
// The remaining nodes are placeholders following that trend.
std::vector<EfficiencyPoint> default_efficiency_points() {
    const double volts[] = {0.5, 1.0, 2.0, 3.0};
    const double amps[] = {10e-6, 100e-6, 1e-3, 10e-3};
    const double eta[4][4] = {
        // 10uA  100uA  1mA   10mA
        {0.55, 0.70, 0.78, 0.80},  // 0.5 V
        {0.62, 0.80, 0.86, 0.87},  // 1 V
        {0.68, 0.85, 0.90, 0.90},  // 2 V
        {0.70, 0.86, 0.90, 0.90},  // 3 V
    };
    std::vector<EfficiencyPoint> pts;
    for (int v = 0; v < 4; ++v) {
        for (int i = 0; i < 4; ++i) {
            pts.push_back({volts[v], amps[i], eta[v][i]});
        }
    }
    return pts;
}

std::size_t lower_cell(const std::vector<double>& axis, double x) {
    if (axis.size() < 2) {
        return 0;
    }
    const auto it = std::upper_bound(axis.begin(), axis.end(), x);
    const auto idx = static_cast<std::size_t>(std::distance(axis.begin(), it));
    return std::clamp<std::size_t>(idx == 0 ? 0 : idx - 1, 0, axis.size() - 2);
}

}  // namespace

EfficiencyTable::EfficiencyTable() : EfficiencyTable(default_efficiency_points()) {}

EfficiencyTable::EfficiencyTable(std::vector<EfficiencyPoint> points) : points_(std::move(points)) {
    if (points_.empty()) {
        throw ConfigError("efficiency table is empty", "topology.converter.efficiency");
    }
    for (const auto& p : points_) {
        if (!(p.v_in_v > 0.0) || !(p.i_in_a > 0.0) || !(p.eta > 0.0) || !(p.eta <= 1.0)) {
            throw ConfigError("points need v_in > 0, i_in > 0 and 0 < eta <= 1",
                              "topology.converter.efficiency");
        }
        volts_.push_back(p.v_in_v);
        log_amps_.push_back(std::log10(p.i_in_a));
    }
    auto unique_sorted = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    unique_sorted(volts_);
    unique_sorted(log_amps_);

    const std::size_t nv = volts_.size();
    const std::size_t ni = log_amps_.size();
    grid_.assign(nv * ni, std::numeric_limits<double>::quiet_NaN());
    for (const auto& p : points_) {
        const auto vi = static_cast<std::size_t>(
            std::lower_bound(volts_.begin(), volts_.end(), p.v_in_v) - volts_.begin());
        const auto ii = static_cast<std::size_t>(
            std::lower_bound(log_amps_.begin(), log_amps_.end(), std::log10(p.i_in_a)) -
            log_amps_.begin());
        grid_[vi * ni + ii] = p.eta;
    }
    if (std::any_of(grid_.begin(), grid_.end(), [](double e) { return std::isnan(e); })) {
        throw ConfigError("points must form a full voltage x current grid",
                          "topology.converter.efficiency");
    }
}

EfficiencyTable EfficiencyTable::from_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("v_in_v,i_in_a,eta", 0) != 0) {
        throw ConfigError("expected header 'v_in_v,i_in_a,eta'", "topology.converter.efficiency_csv");
    }
    std::vector<EfficiencyPoint> pts;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") {
            continue;
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        EfficiencyPoint p{};
        if (!(fields >> p.v_in_v >> p.i_in_a >> p.eta)) {
            throw ConfigError("malformed row " + std::to_string(row),
                              "topology.converter.efficiency_csv");
        }
        pts.push_back(p);
    }
    return EfficiencyTable(std::move(pts));
}

EfficiencyTable EfficiencyTable::from_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open '" + path + "'", "topology.converter.efficiency_csv");
    }
    return from_csv(in);
}

double EfficiencyTable::eta(double v_in_v, double i_in_a) const {
    const std::size_t ni = log_amps_.size();
    const double v = std::clamp(v_in_v, volts_.front(), volts_.back());
    const double la = std::clamp(i_in_a > 0.0 ? std::log10(i_in_a) : log_amps_.front(),
                                 log_amps_.front(), log_amps_.back());
    const std::size_t vi = lower_cell(volts_, v);
    const std::size_t ii = lower_cell(log_amps_, la);
    const double tv = volts_.size() < 2 ? 0.0 : (v - volts_[vi]) / (volts_[vi + 1] - volts_[vi]);
    const double ti = ni < 2 ? 0.0 : (la - log_amps_[ii]) / (log_amps_[ii + 1] - log_amps_[ii]);
    auto at = [&](std::size_t a, std::size_t b) {
        return grid_[std::min(a, volts_.size() - 1) * ni + std::min(b, ni - 1)];
    };
    const double e = (1 - tv) * (1 - ti) * at(vi, ii) + tv * (1 - ti) * at(vi + 1, ii) +
                     (1 - tv) * ti * at(vi, ii + 1) + tv * ti * at(vi + 1, ii + 1);
    return std::clamp(e, 0.0, 1.0);
}

// -----------------------------------------------------------------------------
// Converter / topology
// -----------------------------------------------------------------------------

void ConverterParams::validate() const {
    if (!(v_threshold_v > 0.0) || !std::isfinite(v_threshold_v)) {
        throw ConfigError("must be > 0", "topology.converter.v_threshold_v");
    }
    if (!(quiescent_w >= 0.0)) {
        throw ConfigError("must be >= 0", "topology.converter.quiescent_w");
    }
    if (!(mpp_sample_interval_s > 0.0)) {
        throw ConfigError("must be > 0", "topology.converter.mpp_sample_interval_s");
    }
    if (!(mpp_sample_duration_s > 0.0) || !(mpp_sample_duration_s < mpp_sample_interval_s)) {
        throw ConfigError("must be > 0 and shorter than the sample interval",
                          "topology.converter.mpp_sample_duration_s");
    }
}

double ConverterParams::quiescent_power(double v_cap_v) const {
    return quiescent_scales_with_vcap ? quiescent_w * v_cap_v / 3.0 : quiescent_w;
}

const char* to_string(TopologyKind kind) {
    return kind == TopologyKind::ConverterLess ? "ConverterLess" : "ConverterBased";
}

TopologyKind topology_kind_from(const std::string& text) {
    if (text == "ConverterLess") {
        return TopologyKind::ConverterLess;
    }
    if (text == "ConverterBased") {
        return TopologyKind::ConverterBased;
    }
    throw ConfigError("expected ConverterLess or ConverterBased, got '" + text + "'",
                      "topology.kind");
}

void Topology::validate() const {
    rectifier.validate();
    if (kind == TopologyKind::ConverterLess && converter.has_value()) {
        throw ConfigError("converter-less topology carries no converter parameters",
                          "topology.converter");
    }
    if (kind == TopologyKind::ConverterBased) {
        if (!converter) {
            throw ConfigError("converter-based topology needs converter parameters",
                              "topology.converter");
        }
        converter->validate();
    }
}

std::optional<std::string> Topology::warning() const {
    if (kind == TopologyKind::ConverterBased && converter &&
        converter->v_threshold_v <= 2.0 * rectifier.vd_v) {
        return "converter threshold at or below two diode drops; converter can never conduct";
    }
    return std::nullopt;
}

// -----------------------------------------------------------------------------
// Steps
// -----------------------------------------------------------------------------

FrontendFlows converterless_step(const PiezoModel& model, BridgeState& bridge,
                                 const Forcing& forcing, double t, const Topology& topology,
                                 const CapLoadState& cap, double dt_s) {
    FrontendFlows out;
    const double v_dc = cap.v_cap_v;
    bridge_step(model, bridge, forcing, t, v_dc + 2.0 * topology.rectifier.vd_v, dt_s,
                out.transducer);
    out.dc_energy_j = v_dc * out.transducer.charge_c;
    out.rectifier_loss_j = out.transducer.electrical_j - out.dc_energy_j;
    out.energy_to_cap_j = out.dc_energy_j;
    return out;
}

FrontendFlows converter_step(const PiezoModel& model, BridgeState& bridge, const Forcing& forcing,
                             double t, const Topology& topology, const CapLoadState& cap,
                             const ConverterInput& input, double dt_s) {
    const ConverterParams& conv = *topology.converter;
    FrontendFlows out;
    const double clamp = input.connected ? input.v_threshold_v + 2.0 * topology.rectifier.vd_v
                                         : std::numeric_limits<double>::infinity();
    bridge_step(model, bridge, forcing, t, clamp, dt_s, out.transducer);
    const double q = out.transducer.charge_c;
    if (input.connected) {
        out.dc_energy_j = input.v_threshold_v * q;
        const double eta = q > 0.0 ? conv.efficiency.eta(input.v_threshold_v, q / dt_s) : 0.0;
        out.energy_to_cap_j = eta * out.dc_energy_j;
        out.converter_loss_j = out.dc_energy_j - out.energy_to_cap_j;
    }
    out.rectifier_loss_j = out.transducer.electrical_j - out.dc_energy_j;
    out.quiescent_j = conv.quiescent_power(cap.v_cap_v) * dt_s;
    return out;
}

}  // namespace kehsim
