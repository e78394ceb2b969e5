#include "kehsim/mppt.hpp"

#include "kehsim/engine.hpp"
#include "kehsim/errors.hpp"
#include "kehsim/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace kehsim {

MppEstimate find_mpp(const IVCurve& curve) {
    MppEstimate best;
    best.voc_v = curve.voc_v;
    for (const auto& s : curve.samples) {
        const double p = s.voltage_v * s.current_a;
        if (p > best.p_mpp_w || (p == best.p_mpp_w && p > 0.0 && s.voltage_v < best.v_mpp_v)) {
            best.v_mpp_v = s.voltage_v;
            best.i_mpp_a = s.current_a;
            best.p_mpp_w = p;
        }
    }
    return best;
}

const char* to_string(TrackerKind kind) {
    switch (kind) {
        case TrackerKind::StaticSweep:
            return "StaticSweep";
        case TrackerKind::FractionalOCV:
            return "FractionalOCV";
        case TrackerKind::OracleDynamic:
            return "OracleDynamic";
    }
    return "?";
}

TrackerKind tracker_kind_from(const std::string& text) {
    for (auto k : {TrackerKind::StaticSweep, TrackerKind::FractionalOCV, TrackerKind::OracleDynamic}) {
        if (text == to_string(k)) {
            return k;
        }
    }
    throw ConfigError("expected StaticSweep, FractionalOCV or OracleDynamic, got '" + text + "'",
                      "tracker.kind");
}

std::vector<double> default_threshold_grid() {
    std::vector<double> grid;
    for (int mv = 500; mv <= 2900; mv += 100) {
        grid.push_back(mv / 1000.0);
    }
    return grid;
}

void TrackerPolicy::validate() const {
    if (!(k_fraction > 0.0) || !(k_fraction < 1.0)) {
        throw ConfigError("must be in (0, 1)", "tracker.k_fraction");
    }
    if (f_t_hz && !(*f_t_hz > 0.0 && std::isfinite(*f_t_hz))) {
        throw ConfigError("must be > 0", "tracker.f_t_hz");
    }
    if (kind == TrackerKind::OracleDynamic && !f_t_hz) {
        throw ConfigError("required for OracleDynamic tracking", "tracker.f_t_hz");
    }
    for (std::size_t i = 0; i < sweep_grid_v.size(); ++i) {
        if (!(sweep_grid_v[i] > 0.0) || (i > 0 && !(sweep_grid_v[i] > sweep_grid_v[i - 1]))) {
            throw ConfigError("thresholds must be positive and strictly increasing",
                              "tracker.sweep_grid_v");
        }
    }
}

double oracle_mpp_voltage(const PiezoModel& model, const PiezoState& state, double omega,
                          double diode_drop_v) {
    const double x_env = std::hypot(state.x_m, state.v_mps / omega);
    const double voc = model.coupling_n_per_v * x_env / model.cp_farad - 2.0 * diode_drop_v;
    return std::max(0.0, 0.5 * voc);
}

// -----------------------------------------------------------------------------
// FractionalOcvTracker
// -----------------------------------------------------------------------------

FractionalOcvTracker::FractionalOcvTracker(double k_fraction, double interval_s, double window_s,
                                           double diode_drop_v, double excitation_period_s)
    : k_(k_fraction), interval_(interval_s), window_(window_s), vd_(diode_drop_v) {
    if (!(interval_s > 0.0)) {
        throw ConfigError("must be > 0", "tracker.f_t_hz");
    }
    if (window_s < excitation_period_s) {
        throw ConfigError("sampling window shorter than one excitation period",
                          "topology.converter.mpp_sample_duration_s");
    }
    if (!(window_s < interval_s)) {
        throw ConfigError("sampling window must be shorter than the sampling interval",
                          "topology.converter.mpp_sample_duration_s");
    }
}

bool FractionalOcvTracker::disconnected(double t) const {
    if (t < interval_) {
        return false;
    }
    const double k = std::floor(t / interval_);
    return t - k * interval_ < window_;
}

std::optional<double> FractionalOcvTracker::observe(double t, double dt, double vp_abs) {
    (void)dt;
    if (disconnected(t)) {
        sampling_ = true;
        peak_ = std::max(peak_, vp_abs);
        return std::nullopt;
    }
    if (!sampling_) {
        return std::nullopt;
    }
    sampling_ = false;
    ++samples_;
    const double threshold = k_ * std::max(0.0, peak_ - 2.0 * vd_);
    peak_ = 0.0;
    return threshold;
}

// -----------------------------------------------------------------------------
// Static sweep
// -----------------------------------------------------------------------------

StaticSweepResult summarize_sweep(std::vector<SweepPoint> table) {
    StaticSweepResult out;
    bool found = false;
    for (const auto& p : table) {
        if (!p.error.empty() || !std::isfinite(p.avg_power_w)) {
            continue;
        }
        if (!found || p.avg_power_w > out.best_power_w ||
            (p.avg_power_w == out.best_power_w && p.threshold_v < out.best_threshold_v)) {
            out.best_power_w = p.avg_power_w;
            out.best_threshold_v = p.threshold_v;
            found = true;
        }
    }
    if (!found) {
        out.best_power_w = std::numeric_limits<double>::quiet_NaN();
        out.best_threshold_v = std::numeric_limits<double>::quiet_NaN();
    }
    out.table = std::move(table);
    return out;
}

StaticSweepResult static_sweep(const SimConfig& base, std::span<const double> thresholds, int jobs) {
    if (base.topology.kind != TopologyKind::ConverterBased || !base.topology.converter) {
        throw ArgumentError("static sweep needs a converter-based topology");
    }
    if (thresholds.empty()) {
        throw ArgumentError("static sweep needs at least one threshold");
    }
    std::vector<SweepPoint> table(thresholds.size());
    parallel_for(thresholds.size(), jobs, [&](std::size_t i) {
        SimConfig cfg = base;
        cfg.topology.converter->v_threshold_v = thresholds[i];
        cfg.tracker.kind = TrackerKind::StaticSweep;
        cfg.record_trace = false;
        SweepPoint& point = table[i];
        point.threshold_v = thresholds[i];
        try {
            const SimTrace run = run_sim(cfg);
            point.avg_power_w = run.summary.avg_harvest_power_w;
            point.closure_error = run.summary.total.closure_error();
        } catch (const std::exception& e) {
            point.avg_power_w = std::numeric_limits<double>::quiet_NaN();
            point.error = e.what();
        }
    });
    return summarize_sweep(std::move(table));
}

// -----------------------------------------------------------------------------
// Tracking-rate study
// -----------------------------------------------------------------------------

namespace {

struct TrackedRun {
    double dc_energy_j = 0.0;
    TransducerFlows flows;
    std::vector<MppTraceSample> trace;
};

TrackedRun run_tracked(const PiezoModel& model, BridgeState& bridge, const Forcing& forcing,
                       double duration_s, double dt_s, double f_t_hz, double vd, bool keep_trace) {
    TrackedRun out;
    const auto n_steps = static_cast<long long>(std::llround(duration_s / dt_s));
    const auto update_every = std::max<long long>(1, std::llround(1.0 / (f_t_hz * dt_s)));
    double v_dc = 0.0;
    for (long long n = 0; n < n_steps; ++n) {
        const double t = static_cast<double>(n) * dt_s;
        if (n % update_every == 0) {
            v_dc = oracle_mpp_voltage(model, bridge.piezo, forcing.omega, vd);
            if (keep_trace) {
                out.trace.push_back({t, v_dc});
            }
        }
        TransducerFlows step_flows;
        bridge_step(model, bridge, forcing, t, v_dc + 2.0 * vd, dt_s, step_flows);
        out.dc_energy_j += v_dc * step_flows.charge_c;
        out.flows += step_flows;
    }
    return out;
}

}  // namespace

std::vector<TrackingRow> tracking_study(const PiezoModel& model, const VibrationProfile& profile,
                                        std::span<const double> f_t_grid,
                                        const TrackingOptions& options) {
    model.validate();
    profile.validate();
    if (f_t_grid.empty()) {
        throw ArgumentError("tracking study needs at least one tracking frequency");
    }
    for (double f : f_t_grid) {
        if (!(f > 0.0)) {
            throw ArgumentError("tracking frequencies must be > 0");
        }
    }
    if (!(options.dt_s > 0.0) || options.dt_s > model.max_step()) {
        throw ConfigError("step outside (0, " + std::to_string(model.max_step()) + "]", "sim.dt_s");
    }
    const Forcing forcing = Forcing::from(profile);

    BridgeState start;
    if (options.start_settled) {
        // Twenty mechanical time constants under fast tracking.
        const double settle_s = 20.0 * model.q_factor / (std::numbers::pi * model.f0_hz);
        (void)run_tracked(model, start, forcing, settle_s, options.dt_s, 1000.0, options.diode_drop_v,
                          false);
    }

    std::vector<TrackingRow> rows(f_t_grid.size());
    parallel_for(f_t_grid.size(), options.jobs, [&](std::size_t i) {
        BridgeState bridge = start;
        const double e0 = stored_energy(model, bridge.piezo);
        TrackedRun run = run_tracked(model, bridge, forcing, profile.duration_s, options.dt_s,
                                     f_t_grid[i], options.diode_drop_v, true);
        const double e1 = stored_energy(model, bridge.piezo);
        TrackingRow& row = rows[i];
        row.f_t_hz = f_t_grid[i];
        row.avg_power_w = run.dc_energy_j / profile.duration_s;
        const auto& f = run.flows;
        const double residual = f.work_in_j - (e1 - e0 + f.damping_j + f.leakage_j + f.electrical_j);
        row.closure_error = f.work_in_j != 0.0 ? std::abs(residual) / std::abs(f.work_in_j) : 0.0;
        row.trace = std::move(run.trace);
    });
    return rows;
}

}  // namespace kehsim
