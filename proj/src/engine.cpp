#include "kehsim/engine.hpp"

#include "kehsim/errors.hpp"
#include "kehsim/io.hpp"
#include "kehsim/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace kehsim {

// -----------------------------------------------------------------------------
// Configuration
// -----------------------------------------------------------------------------

void SimConfig::validate() const {
    profile.validate();
    model.validate();
    topology.validate();
    cap_load.validate();
    tracker.validate();
    if (!(dt_s > 0.0) || dt_s > model.max_step()) {
        throw ConfigError("step " + format_number(dt_s) + " s outside (0, " +
                              format_number(model.max_step()) + "]",
                          "sim.dt_s");
    }
    if (transient_skip_s && !(*transient_skip_s >= 0.0 && *transient_skip_s < profile.duration_s)) {
        throw ConfigError("must be in [0, duration)", "sim.transient_skip_s");
    }
    if (!(trace_rate_hz > 0.0)) {
        throw ConfigError("must be > 0", "sim.trace_rate_hz");
    }
    if (tracker.kind != TrackerKind::StaticSweep && topology.kind != TopologyKind::ConverterBased) {
        throw ConfigError("dynamic tracking needs a converter-based topology", "tracker.kind");
    }
}

double SimConfig::effective_skip_s() const {
    if (transient_skip_s) {
        return *transient_skip_s;
    }
    const double settle = std::max(2.0, 20.0 * model.q_factor / model.f0_hz);
    return std::min(settle, 0.5 * profile.duration_s);
}

// -----------------------------------------------------------------------------
// Ledger
// -----------------------------------------------------------------------------

namespace {

double relative(double residual, double scale) {
    return scale > 0.0 ? std::abs(residual) / scale : std::abs(residual);
}

}  // namespace

double RunLedger::electrical_residual() const {
    const double sinks = cap_end_j - cap_start_j + load_j + rectifier_loss_j + converter_loss_j +
                         quiescent_j;
    const double scale = std::max(std::abs(transducer_out_j), std::abs(quiescent_j));
    return relative(transducer_out_j - sinks, scale);
}

double RunLedger::mechanical_residual() const {
    const double sinks =
        mech_stored_end_j - mech_stored_start_j + damping_j + leakage_j + transducer_out_j;
    return relative(work_in_j - sinks, std::abs(work_in_j));
}

double RunLedger::closure_error() const {
    return std::max(electrical_residual(), mechanical_residual());
}

namespace {

void accumulate(RunLedger& ledger, const FrontendFlows& f, const CapStepFlows& c) {
    ledger.work_in_j += f.transducer.work_in_j;
    ledger.damping_j += f.transducer.damping_j;
    ledger.leakage_j += f.transducer.leakage_j;
    ledger.transducer_out_j += f.transducer.electrical_j;
    ledger.charge_c += f.transducer.charge_c;
    ledger.dc_energy_j += f.dc_energy_j;
    ledger.rectifier_loss_j += f.rectifier_loss_j;
    ledger.converter_loss_j += f.converter_loss_j;
    ledger.energy_to_cap_j += f.energy_to_cap_j;
    ledger.quiescent_j += c.quiescent_j;
    ledger.load_j += c.load_j;
}

/// Additive fields of `end` minus those of `start`; stored energies are the
/// boundary values.
RunLedger window_of(const RunLedger& end, const RunLedger& start) {
    RunLedger w;
    w.work_in_j = end.work_in_j - start.work_in_j;
    w.damping_j = end.damping_j - start.damping_j;
    w.leakage_j = end.leakage_j - start.leakage_j;
    w.transducer_out_j = end.transducer_out_j - start.transducer_out_j;
    w.charge_c = end.charge_c - start.charge_c;
    w.dc_energy_j = end.dc_energy_j - start.dc_energy_j;
    w.rectifier_loss_j = end.rectifier_loss_j - start.rectifier_loss_j;
    w.converter_loss_j = end.converter_loss_j - start.converter_loss_j;
    w.quiescent_j = end.quiescent_j - start.quiescent_j;
    w.energy_to_cap_j = end.energy_to_cap_j - start.energy_to_cap_j;
    w.load_j = end.load_j - start.load_j;
    w.disconnected_s = end.disconnected_s - start.disconnected_s;
    w.mpp_samples = end.mpp_samples - start.mpp_samples;
    w.mech_stored_start_j = start.mech_stored_end_j;
    w.mech_stored_end_j = end.mech_stored_end_j;
    w.cap_start_j = start.cap_end_j;
    w.cap_end_j = end.cap_end_j;
    return w;
}

/// Harvest lost to sampling: the mean connected harvest rate times the time
/// spent disconnected.
void estimate_disconnect_loss(RunLedger& ledger, double span_s) {
    const double connected = span_s - ledger.disconnected_s;
    ledger.disconnect_loss_j =
        connected > 0.0 ? ledger.energy_to_cap_j / connected * ledger.disconnected_s : 0.0;
}

[[noreturn]] void diverged(long long n, double t, const BridgeState& b, const CapLoadState& cap) {
    std::ostringstream msg;
    msg << "non-finite state at step " << n << " (t = " << format_number(t)
        << " s): x = " << format_number(b.piezo.x_m) << ", v = " << format_number(b.piezo.v_mps)
        << ", vp = " << format_number(b.piezo.vp_v) << ", v_cap = " << format_number(cap.v_cap_v);
    throw NumericalError(msg.str());
}

}  // namespace

// -----------------------------------------------------------------------------
// run_sim
// -----------------------------------------------------------------------------

SimTrace run_sim(const SimConfig& config) {
    config.validate();
    SimTrace out;
    SimSummary& summary = out.summary;
    if (auto w = config.topology.warning()) {
        summary.warnings.push_back(*w);
    }

    const PiezoModel& model = config.model;
    const Topology& topology = config.topology;
    const double dt = config.dt_s;
    const double vd = topology.rectifier.vd_v;
    const Forcing forcing = Forcing::from(config.profile);
    const bool converter = topology.kind == TopologyKind::ConverterBased;

    const auto n_steps = static_cast<long long>(std::llround(config.profile.duration_s / dt));
    const auto skip_steps = static_cast<long long>(std::llround(config.effective_skip_s() / dt));
    const auto decimation =
        std::max<long long>(1, std::llround(1.0 / (config.trace_rate_hz * dt)));
    const double sample_span = static_cast<double>(decimation) * dt;
    if (config.record_trace) {
        out.samples.reserve(static_cast<std::size_t>(n_steps / decimation + 1));
    }

    BridgeState bridge;
    CapLoadState cap = config.cap_load;
    double threshold = converter ? topology.converter->v_threshold_v : 0.0;

    std::optional<FractionalOcvTracker> focv;
    long long oracle_every = 0;
    if (converter && config.tracker.kind == TrackerKind::FractionalOCV) {
        const double interval = config.tracker.f_t_hz ? 1.0 / *config.tracker.f_t_hz
                                                      : topology.converter->mpp_sample_interval_s;
        focv.emplace(config.tracker.k_fraction, interval, topology.converter->mpp_sample_duration_s,
                     vd, config.profile.period_s());
    } else if (converter && config.tracker.kind == TrackerKind::OracleDynamic) {
        oracle_every = std::max<long long>(1, std::llround(1.0 / (*config.tracker.f_t_hz * dt)));
    }

    RunLedger total;
    total.mech_stored_start_j = stored_energy(model, bridge.piezo);
    total.cap_start_j = cap.energy();
    RunLedger at_skip = total;
    at_skip.mech_stored_end_j = total.mech_stored_start_j;
    at_skip.cap_end_j = total.cap_start_j;

    double sample_charge = 0.0;
    double sample_energy = 0.0;

    for (long long n = 0; n < n_steps; ++n) {
        const double t = static_cast<double>(n) * dt;
        if (n == skip_steps) {
            at_skip = total;
            at_skip.mech_stored_end_j = stored_energy(model, bridge.piezo);
            at_skip.cap_end_j = cap.energy();
        }

        FrontendFlows flows;
        if (!converter) {
            flows = converterless_step(model, bridge, forcing, t, topology, cap, dt);
        } else {
            if (oracle_every > 0 && n % oracle_every == 0) {
                threshold = oracle_mpp_voltage(model, bridge.piezo, forcing.omega, vd);
            }
            const bool connected = !focv || !focv->disconnected(t);
            if (!connected) {
                total.disconnected_s += dt;
            }
            flows = converter_step(model, bridge, forcing, t, topology, cap, {threshold, connected},
                                   dt);
            if (focv) {
                if (auto next = focv->observe(t, dt, std::abs(bridge.piezo.vp_v))) {
                    threshold = *next;
                    total.mpp_samples = focv->samples();
                }
            }
        }

        CapStepFlows cap_flows;
        cap = step_cap_load(cap, flows.energy_to_cap_j, flows.quiescent_j, dt, &cap_flows);
        accumulate(total, flows, cap_flows);

        if (!std::isfinite(bridge.piezo.x_m) || !std::isfinite(bridge.piezo.v_mps) ||
            !std::isfinite(bridge.piezo.vp_v) || !std::isfinite(cap.v_cap_v)) {
            diverged(n, t, bridge, cap);
        }

        if (config.record_trace) {
            sample_charge += flows.charge_c();
            sample_energy += flows.energy_to_cap_j;
            if ((n + 1) % decimation == 0) {
                out.samples.push_back({t + dt, bridge.piezo.vp_v, sample_charge / sample_span,
                                       cap.v_cap_v, cap.load_on, sample_energy / sample_span});
                sample_charge = 0.0;
                sample_energy = 0.0;
            }
        }
    }

    total.mech_stored_end_j = stored_energy(model, bridge.piezo);
    total.cap_end_j = cap.energy();
    const double duration = static_cast<double>(n_steps) * dt;
    const double window = static_cast<double>(n_steps - skip_steps) * dt;

    summary.window = window_of(total, at_skip);
    estimate_disconnect_loss(total, duration);
    estimate_disconnect_loss(summary.window, window);
    summary.total = total;
    summary.window_start_s = static_cast<double>(skip_steps) * dt;
    summary.window_s = window;
    summary.avg_harvest_power_w = window > 0.0 ? summary.window.energy_to_cap_j / window : 0.0;
    summary.activations = cap.activations;
    summary.final_threshold_v = threshold;
    if (cap.activations == 0) {
        summary.warnings.push_back("load never switched on");
    }
    return out;
}

// -----------------------------------------------------------------------------
// Grid experiments
// -----------------------------------------------------------------------------

std::vector<double> default_frequency_grid() { return {10.0, 20.0, 25.0, 35.0, 50.0}; }

std::vector<double> default_amplitude_grid() { return {200.0, 400.0, 600.0, 800.0, 1000.0}; }

const SweepRow* SweepTable::find(double frequency_hz, double amplitude_mvpp,
                                 TopologyKind topology) const {
    for (const auto& r : rows) {
        if (r.frequency_hz == frequency_hz && r.amplitude_mvpp == amplitude_mvpp &&
            r.topology == topology) {
            return &r;
        }
    }
    return nullptr;
}

SweepTable run_grid(const SimConfig& base, const GridSpec& grid, int jobs) {
    if (grid.frequencies_hz.empty() || grid.amplitudes_mvpp.empty() || grid.topologies.empty()) {
        throw ArgumentError("grid needs at least one frequency, amplitude and topology");
    }
    const bool wants_cb = std::find(grid.topologies.begin(), grid.topologies.end(),
                                    TopologyKind::ConverterBased) != grid.topologies.end();
    if (wants_cb && grid.thresholds_v.empty()) {
        throw ArgumentError("converter-based cells need a threshold grid");
    }

    SweepTable table;
    struct Job {
        std::size_t row;
        std::size_t point;
        SimConfig config;
    };
    std::vector<Job> jobs_list;

    const ConverterParams conv =
        base.topology.converter ? *base.topology.converter : ConverterParams{};
    for (double f : grid.frequencies_hz) {
        for (double a : grid.amplitudes_mvpp) {
            for (TopologyKind kind : grid.topologies) {
                SimConfig cfg = base;
                cfg.profile.frequency_hz = f;
                cfg.profile.amplitude_mvpp = a;
                cfg.tracker.kind = TrackerKind::StaticSweep;
                cfg.record_trace = false;
                const std::size_t row = table.rows.size();
                SweepRow r;
                r.frequency_hz = f;
                r.amplitude_mvpp = a;
                r.topology = kind;
                table.rows.push_back(std::move(r));
                if (kind == TopologyKind::ConverterLess) {
                    cfg.topology = Topology::converter_less(base.topology.rectifier);
                    jobs_list.push_back({row, 0, cfg});
                } else {
                    cfg.topology = Topology::converter_based(conv, base.topology.rectifier);
                    table.rows.back().sweep.resize(grid.thresholds_v.size());
                    for (std::size_t p = 0; p < grid.thresholds_v.size(); ++p) {
                        cfg.topology.converter->v_threshold_v = grid.thresholds_v[p];
                        jobs_list.push_back({row, p, cfg});
                    }
                }
            }
        }
    }

    std::vector<SweepPoint> results(jobs_list.size());
    parallel_for(jobs_list.size(), jobs, [&](std::size_t i) {
        const Job& job = jobs_list[i];
        SweepPoint& point = results[i];
        if (job.config.topology.converter) {
            point.threshold_v = job.config.topology.converter->v_threshold_v;
        }
        try {
            const SimTrace run = run_sim(job.config);
            point.avg_power_w = run.summary.avg_harvest_power_w;
            point.closure_error = run.summary.total.closure_error();
        } catch (const std::exception& e) {
            point.avg_power_w = std::numeric_limits<double>::quiet_NaN();
            point.error = e.what();
        }
    });

    for (std::size_t i = 0; i < jobs_list.size(); ++i) {
        SweepRow& row = table.rows[jobs_list[i].row];
        if (row.topology == TopologyKind::ConverterLess) {
            row.avg_power_w = results[i].avg_power_w;
            row.closure_error = results[i].closure_error;
            row.error = results[i].error;
        } else {
            row.sweep[jobs_list[i].point] = results[i];
        }
    }
    for (auto& row : table.rows) {
        if (row.topology != TopologyKind::ConverterBased) {
            continue;
        }
        StaticSweepResult best = summarize_sweep(std::move(row.sweep));
        row.sweep = std::move(best.table);
        for (const auto& p : row.sweep) {
            row.closure_error = std::max(row.closure_error, p.closure_error);
        }
        if (std::isfinite(best.best_power_w)) {
            row.avg_power_w = best.best_power_w;
            row.best_threshold_v = best.best_threshold_v;
        } else {
            row.avg_power_w = std::numeric_limits<double>::quiet_NaN();
            row.error = row.sweep.empty() ? "no thresholds" : row.sweep.front().error;
        }
    }
    return table;
}

std::string CellComparison::ratio_text() const {
    switch (kind) {
        case RatioKind::Finite:
            return format_number(ratio);
        case RatioKind::Infinite:
            return "inf";
        case RatioKind::Undefined:
            return "undefined";
        case RatioKind::Missing:
            return "missing";
    }
    return "missing";
}

ComparisonReport compare_report(const SweepTable& table, double f0_hz) {
    ComparisonReport report;
    std::vector<double> freqs;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    for (const auto& r : table.rows) {
        bool seen = false;
        for (const auto& c : report.cells) {
            seen = seen || (c.frequency_hz == r.frequency_hz && c.amplitude_mvpp == r.amplitude_mvpp);
        }
        if (seen) {
            continue;
        }
        if (std::find(freqs.begin(), freqs.end(), r.frequency_hz) == freqs.end()) {
            freqs.push_back(r.frequency_hz);
        }
        const SweepRow* cb = table.find(r.frequency_hz, r.amplitude_mvpp, TopologyKind::ConverterBased);
        const SweepRow* cl = table.find(r.frequency_hz, r.amplitude_mvpp, TopologyKind::ConverterLess);
        CellComparison cell{r.frequency_hz, r.amplitude_mvpp, nan, nan, RatioKind::Missing, nan};
        const std::string where =
            format_number(r.frequency_hz) + " Hz, " + format_number(r.amplitude_mvpp) + " mVpp";
        if (cb == nullptr || !cb->error.empty()) {
            report.gaps.push_back(where + ": no converter-based result" +
                                  (cb != nullptr ? " (" + cb->error + ")" : std::string()));
        } else if (cl == nullptr || !cl->error.empty()) {
            report.gaps.push_back(where + ": no converter-less result" +
                                  (cl != nullptr ? " (" + cl->error + ")" : std::string()));
        } else {
            cell.converter_based_w = cb->avg_power_w;
            cell.converter_less_w = cl->avg_power_w;
            if (cl->avg_power_w > 0.0) {
                cell.kind = RatioKind::Finite;
                cell.ratio = cb->avg_power_w / cl->avg_power_w;
            } else if (cb->avg_power_w > 0.0) {
                cell.kind = RatioKind::Infinite;
            } else {
                cell.kind = RatioKind::Undefined;
            }
        }
        if (cb != nullptr && cb->error.empty()) {
            cell.converter_based_w = cb->avg_power_w;
        }
        if (cl != nullptr && cl->error.empty()) {
            cell.converter_less_w = cl->avg_power_w;
        }
        report.cells.push_back(cell);
    }

    for (double f : freqs) {
        FrequencyMean m{f, nan, 0, 0};
        double sum = 0.0;
        for (const auto& c : report.cells) {
            if (c.frequency_hz != f) {
                continue;
            }
            if (c.kind == RatioKind::Finite) {
                sum += c.ratio;
                ++m.finite_cells;
            } else if (c.kind == RatioKind::Infinite) {
                ++m.infinite_cells;
            }
        }
        if (m.finite_cells > 0) {
            m.mean_ratio = sum / m.finite_cells;
        }
        report.per_frequency.push_back(m);
    }

    report.resonance_mean_ratio = nan;
    report.resonance_frequency_hz = nan;
    double best_gap = std::numeric_limits<double>::infinity();
    for (const auto& m : report.per_frequency) {
        if (std::abs(m.frequency_hz - f0_hz) < best_gap) {
            best_gap = std::abs(m.frequency_hz - f0_hz);
            report.resonance_frequency_hz = m.frequency_hz;
            report.resonance_mean_ratio = m.mean_ratio;
        }
    }
    return report;
}

}  // namespace kehsim
