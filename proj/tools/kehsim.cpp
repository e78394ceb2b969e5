// Command-line front end: simulate | iv-curve | mppt-study | sweep | compare.

#include "kehsim/config.hpp"
#include "kehsim/engine.hpp"
#include "kehsim/errors.hpp"
#include "kehsim/io.hpp"
#include "kehsim/mppt.hpp"
#include "kehsim/transducer.hpp"

#include <CLI11.hpp>
#include <yaml-cpp/yaml.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#ifndef KEHSIM_VERSION
#define KEHSIM_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace kehsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

struct Options {
    std::string config_path;
    std::string out_dir = "out";
    std::vector<std::string> overrides;
    std::optional<double> dt;
    std::optional<double> duration;
    int jobs = 1;
    std::string from;  // compare: existing sweep table
};

class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    std::ofstream open(const std::string& name) {
        std::ofstream out(dir_ / name);
        if (!out) {
            throw ConfigError("cannot write '" + (dir_ / name).string() + "'");
        }
        files_.push_back(name);
        return out;
    }

    [[nodiscard]] const std::vector<std::string>& files() const { return files_; }
    [[nodiscard]] const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    std::vector<std::string> files_;
};

AppConfig resolve(const Options& opt) {
    std::vector<std::string> overrides = opt.overrides;
    if (opt.dt) {
        overrides.push_back("sim.dt_s=" + format_number(*opt.dt));
    }
    if (opt.duration) {
        overrides.push_back("profile.duration_s=" + format_number(*opt.duration));
    }
    if (opt.config_path.empty()) {
        YAML::Node doc = default_document();
        for (const auto& o : overrides) {
            apply_override(doc, o);
        }
        return config_from_yaml(doc);
    }
    return load_config(opt.config_path, overrides);
}

std::string utc_now() {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

void write_manifest(Outputs& out, const AppConfig& cfg, const std::string& command,
                    const Options& opt, const std::string& started, double wall_s) {
    YAML::Node doc = to_yaml(cfg);
    YAML::Node run;
    run["command"] = command;
    run["version"] = KEHSIM_VERSION;
    run["started_utc"] = started;
    run["wall_clock_s"] = format_number(wall_s);
    run["jobs"] = opt.jobs;
    YAML::Node files(YAML::NodeType::Sequence);
    for (const auto& f : out.files()) {
        files.push_back(f);
    }
    files.push_back("manifest.yaml");
    run["outputs"] = files;
    doc["run"] = run;
    auto file = out.open("manifest.yaml");
    file << emit(doc);
}

void report_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) {
        std::cerr << "warning: " << w << '\n';
    }
}

void cmd_simulate(const AppConfig& cfg, Outputs& out) {
    const SimTrace trace = run_sim(cfg.sim);
    const SimSummary& s = trace.summary;
    report_warnings(s.warnings);
    {
        auto f = out.open("trace.csv");
        write_trace_csv(f, trace.samples);
    }
    {
        std::vector<std::vector<double>> rows;
        rows.reserve(trace.samples.size());
        for (const auto& t : trace.samples) {
            rows.push_back({t.t_s, t.vp_v, t.i_rect_a, t.v_cap_v, t.load_on ? 1.0 : 0.0,
                            t.p_harvest_w});
        }
        auto f = out.open("trace.dat");
        write_gnuplot_dat(f, {"time_s", "vp_v", "i_rect_a", "v_cap_v", "load_on", "p_harvest_w"},
                          rows);
    }
    YAML::Node doc;
    doc["avg_harvest_power_w"] = format_number(s.avg_harvest_power_w);
    doc["window_start_s"] = format_number(s.window_start_s);
    doc["window_s"] = format_number(s.window_s);
    doc["activations"] = s.activations;
    doc["final_threshold_v"] = format_number(s.final_threshold_v);
    auto ledger = [](const RunLedger& l) {
        YAML::Node n;
        n["work_in_j"] = format_number(l.work_in_j);
        n["damping_j"] = format_number(l.damping_j);
        n["leakage_j"] = format_number(l.leakage_j);
        n["transducer_out_j"] = format_number(l.transducer_out_j);
        n["rectifier_loss_j"] = format_number(l.rectifier_loss_j);
        n["converter_loss_j"] = format_number(l.converter_loss_j);
        n["quiescent_j"] = format_number(l.quiescent_j);
        n["energy_to_cap_j"] = format_number(l.energy_to_cap_j);
        n["load_j"] = format_number(l.load_j);
        n["cap_delta_j"] = format_number(l.cap_end_j - l.cap_start_j);
        n["disconnected_s"] = format_number(l.disconnected_s);
        n["disconnect_loss_j"] = format_number(l.disconnect_loss_j);
        n["mpp_samples"] = l.mpp_samples;
        n["closure_error"] = format_number(l.closure_error());
        return n;
    };
    doc["window"] = ledger(s.window);
    doc["total"] = ledger(s.total);
    YAML::Node warnings(YAML::NodeType::Sequence);
    for (const auto& w : s.warnings) {
        warnings.push_back(w);
    }
    doc["warnings"] = warnings;
    {
        auto f = out.open("summary.yaml");
        f << emit(doc);
    }
    std::cout << "topology            " << to_string(cfg.sim.topology.kind) << '\n'
              << "avg harvest power   " << format_number(s.avg_harvest_power_w * 1e6) << " uW over "
              << format_number(s.window_s) << " s\n"
              << "load activations    " << s.activations << '\n'
              << "ledger closure      " << format_number(s.total.closure_error()) << '\n';
}

void cmd_iv_curve(const AppConfig& cfg, Outputs& out) {
    IVOptions opts;
    opts.diode_drop_v = cfg.sim.topology.rectifier.vd_v;
    opts.average_cycles = cfg.iv.average_cycles;
    opts.dt_s = cfg.sim.dt_s;
    const auto grid = linear_grid(cfg.iv.v_max_v, cfg.iv.points);
    const IVCurve curve =
        measure_iv_curve(cfg.sim.model, cfg.sim.profile, grid, cfg.iv.settle_cycles, opts);
    const MppEstimate mpp = find_mpp(curve);
    {
        auto f = out.open("iv.csv");
        write_iv_csv(f, curve);
    }
    {
        std::vector<std::vector<double>> rows;
        for (const auto& s : curve.samples) {
            rows.push_back({s.voltage_v, s.current_a, s.voltage_v * s.current_a});
        }
        auto f = out.open("iv.dat");
        write_gnuplot_dat(f, {"voltage_v", "current_a", "power_w"}, rows);
    }
    std::cout << "open-circuit voltage  " << format_number(curve.voc_v) << " V\n"
              << "MPP                   " << format_number(mpp.v_mpp_v) << " V, "
              << format_number(mpp.p_mpp_w * 1e6) << " uW\n"
              << "v_mpp / v_oc          "
              << (curve.voc_v > 0 ? format_number(mpp.v_mpp_v / curve.voc_v) : std::string("n/a"))
              << '\n';
}

void cmd_mppt_study(const AppConfig& cfg, Outputs& out, int jobs) {
    TrackingOptions opts;
    opts.dt_s = cfg.sim.dt_s;
    opts.diode_drop_v = cfg.sim.topology.rectifier.vd_v;
    opts.start_settled = cfg.mppt.start_settled;
    opts.jobs = jobs;
    const auto rows = tracking_study(cfg.sim.model, cfg.sim.profile, cfg.mppt.f_t_grid_hz, opts);
    {
        auto f = out.open("tracking.csv");
        write_tracking_csv(f, rows);
    }
    {
        std::vector<std::vector<double>> data;
        for (const auto& r : rows) {
            data.push_back({r.f_t_hz, r.avg_power_w});
        }
        auto f = out.open("tracking.dat");
        write_gnuplot_dat(f, {"f_t_hz", "avg_power_w"}, data);
    }
    for (const auto& r : rows) {
        auto f = out.open("mpp_trace_" + format_number(r.f_t_hz) + "hz.csv");
        write_mpp_trace_csv(f, r.trace);
    }
    std::cout << "tracking rate -> avg extracted power\n";
    for (const auto& r : rows) {
        std::cout << "  " << format_number(r.f_t_hz) << " Hz: " << format_number(r.avg_power_w * 1e6)
                  << " uW\n";
    }

    if (cfg.sim.topology.kind == TopologyKind::ConverterBased) {
        const StaticSweepResult sweep = static_sweep(cfg.sim, cfg.sim.tracker.sweep_grid_v, jobs);
        {
            auto f = out.open("threshold_sweep.csv");
            write_threshold_csv(f, sweep.table);
        }
        std::vector<std::vector<double>> data;
        for (const auto& p : sweep.table) {
            data.push_back({p.threshold_v, p.avg_power_w});
        }
        auto f = out.open("threshold_sweep.dat");
        write_gnuplot_dat(f, {"threshold_v", "avg_power_w"}, data);
        std::cout << "best static threshold " << format_number(sweep.best_threshold_v) << " V ("
                  << format_number(sweep.best_power_w * 1e6) << " uW)\n";
    }
}

void write_grid_outputs(const SweepTable& table, const ComparisonReport& report, Outputs& out,
                        bool with_sweep) {
    if (with_sweep) {
        auto f = out.open("sweep.csv");
        write_sweep_csv(f, table, report);
    }
    {
        auto f = out.open("comparison.csv");
        write_comparison_csv(f, report);
    }
    std::vector<std::vector<double>> data;
    for (const auto& c : report.cells) {
        data.push_back({c.frequency_hz, c.amplitude_mvpp, c.converter_based_w, c.converter_less_w,
                        c.kind == RatioKind::Finite ? c.ratio : std::nan("")});
    }
    auto f = out.open("comparison.dat");
    write_gnuplot_dat(f, {"frequency_hz", "amplitude_mvpp", "converter_based_w", "converter_less_w",
                          "ratio"},
                      data);
}

void cmd_sweep(const AppConfig& cfg, Outputs& out, int jobs) {
    const SweepTable table = run_grid(cfg.sim, cfg.grid, jobs);
    const ComparisonReport report = compare_report(table, cfg.sim.model.f0_hz);
    write_grid_outputs(table, report, out, true);
    for (const auto& r : table.rows) {
        if (!r.error.empty()) {
            std::cerr << "cell " << format_number(r.frequency_hz) << " Hz / "
                      << format_number(r.amplitude_mvpp) << " mVpp " << to_string(r.topology)
                      << " failed: " << r.error << '\n';
        }
    }
    std::cout << table.rows.size() << " rows written to " << (out.dir() / "sweep.csv").string()
              << '\n';
}

void cmd_compare(const AppConfig& cfg, Outputs& out, int jobs, const std::string& from) {
    SweepTable table;
    if (!from.empty()) {
        std::ifstream in(from);
        if (!in) {
            throw ConfigError("cannot open sweep table '" + from + "'");
        }
        table = read_sweep_csv(in);
    } else {
        table = run_grid(cfg.sim, cfg.grid, jobs);
    }
    const ComparisonReport report = compare_report(table, cfg.sim.model.f0_hz);
    write_grid_outputs(table, report, out, from.empty());
    print_comparison(std::cout, report);
}

void add_common(CLI::App* sub, Options& opt) {
    sub->add_option("--config", opt.config_path, "YAML config file (built-in defaults if omitted)");
    sub->add_option("--out-dir", opt.out_dir, "directory for output files")->capture_default_str();
    sub->add_option("--override", opt.overrides, "dotted.key=value, applied after the file")
        ->take_all();
    sub->add_option("--dt", opt.dt, "integration step, seconds");
    sub->add_option("--duration", opt.duration, "run length, seconds");
    sub->add_option("--jobs", opt.jobs, "worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Piezoelectric kinetic-energy harvesting simulator"};
    app.set_version_flag("--version", KEHSIM_VERSION);
    app.require_subcommand(1);
    Options opt;

    struct Command {
        const char* name;
        const char* help;
    };
    const Command commands[] = {
        {"simulate", "time-domain run of one configuration"},
        {"iv-curve", "rectified DC-side IV characteristic"},
        {"mppt-study", "tracking-rate study and static threshold sweep"},
        {"sweep", "frequency x amplitude x topology grid"},
        {"compare", "converter-based vs converter-less power ratios"},
    };
    for (const auto& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        add_common(sub, opt);
        if (std::string(c.name) == "compare") {
            sub->add_option("--from", opt.from, "reuse an existing sweep.csv instead of running");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    const std::string started = utc_now();
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const AppConfig cfg = resolve(opt);
        Outputs out(opt.out_dir);
        if (command == "simulate") {
            cmd_simulate(cfg, out);
        } else if (command == "iv-curve") {
            cmd_iv_curve(cfg, out);
        } else if (command == "mppt-study") {
            cmd_mppt_study(cfg, out, opt.jobs);
        } else if (command == "sweep") {
            cmd_sweep(cfg, out, opt.jobs);
        } else {
            cmd_compare(cfg, out, opt.jobs, opt.from);
        }
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_manifest(out, cfg, command, opt, started, wall);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ArgumentError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const ConvergenceError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitOk;
}
