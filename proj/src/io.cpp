#include "kehsim/io.hpp"

#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "kehsim/errors.hpp"

namespace kehsim {

std::string format_number(double value) {
    if (std::isnan(value)) {
        return "nan";
    }
    if (std::isinf(value)) {
        return value > 0 ? "inf" : "-inf";
    }
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return {buf, res.ptr};
}

void write_iv_csv(std::ostream& out, const IVCurve& curve) {
    out << "voltage_v,current_a\n";
    for (const auto& s : curve.samples) {
        out << format_number(s.voltage_v) << ',' << format_number(s.current_a) << '\n';
    }
}

void write_trace_csv(std::ostream& out, const std::vector<TraceSample>& samples) {
    out << "time_s,vp_v,i_rect_a,v_cap_v,load_on,p_harvest_w\n";
    for (const auto& s : samples) {
        out << format_number(s.t_s) << ',' << format_number(s.vp_v) << ','
            << format_number(s.i_rect_a) << ',' << format_number(s.v_cap_v) << ','
            << (s.load_on ? 1 : 0) << ',' << format_number(s.p_harvest_w) << '\n';
    }
}

void write_threshold_csv(std::ostream& out, const std::vector<SweepPoint>& table) {
    out << "threshold_v,avg_power_w\n";
    for (const auto& p : table) {
        out << format_number(p.threshold_v) << ',' << format_number(p.avg_power_w) << '\n';
    }
}

void write_tracking_csv(std::ostream& out, const std::vector<TrackingRow>& rows) {
    out << "f_t_hz,avg_power_w\n";
    for (const auto& r : rows) {
        out << format_number(r.f_t_hz) << ',' << format_number(r.avg_power_w) << '\n';
    }
}

void write_mpp_trace_csv(std::ostream& out, const std::vector<MppTraceSample>& trace) {
    out << "time_s,v_mpp_v\n";
    for (const auto& s : trace) {
        out << format_number(s.t_s) << ',' << format_number(s.v_mpp_v) << '\n';
    }
}

namespace {

const CellComparison* find_cell(const ComparisonReport& report, double f, double a) {
    for (const auto& c : report.cells) {
        if (c.frequency_hz == f && c.amplitude_mvpp == a) {
            return &c;
        }
    }
    return nullptr;
}

}  // namespace

void write_sweep_csv(std::ostream& out, const SweepTable& table, const ComparisonReport& report) {
    out << "frequency_hz,amplitude_mvpp,topology,avg_power_w,best_threshold_v,ratio\n";
    for (const auto& r : table.rows) {
        const CellComparison* cell = find_cell(report, r.frequency_hz, r.amplitude_mvpp);
        out << format_number(r.frequency_hz) << ',' << format_number(r.amplitude_mvpp) << ','
            << to_string(r.topology) << ','
            << (r.error.empty() ? format_number(r.avg_power_w) : std::string("error")) << ','
            << (r.best_threshold_v ? format_number(*r.best_threshold_v) : std::string()) << ','
            << (cell != nullptr ? cell->ratio_text() : std::string("missing")) << '\n';
    }
}

SweepTable read_sweep_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) ||
        line.rfind("frequency_hz,amplitude_mvpp,topology,avg_power_w,best_threshold_v", 0) != 0) {
        throw ConfigError("not a sweep table (unexpected header)");
    }
    auto parse = [](const std::string& field, int row) {
        double v = 0.0;
        const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
        if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
            throw ConfigError("sweep table row " + std::to_string(row) + ": bad number '" +
                              field + "'");
        }
        return v;
    };
    SweepTable table;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        for (std::string f; std::getline(ss, f, ',');) {
            fields.push_back(f);
        }
        if (fields.size() < 4) {
            throw ConfigError("sweep table row " + std::to_string(row) + ": too few fields");
        }
        SweepRow r;
        r.frequency_hz = parse(fields[0], row);
        r.amplitude_mvpp = parse(fields[1], row);
        r.topology = topology_kind_from(fields[2]);
        if (fields[3] == "error") {
            r.error = "failed in the original sweep";
            r.avg_power_w = std::nan("");
        } else {
            r.avg_power_w = parse(fields[3], row);
        }
        if (fields.size() > 4 && !fields[4].empty()) {
            r.best_threshold_v = parse(fields[4], row);
        }
        table.rows.push_back(std::move(r));
    }
    return table;
}

void write_comparison_csv(std::ostream& out, const ComparisonReport& report) {
    out << "frequency_hz,amplitude_mvpp,converter_based_w,converter_less_w,ratio\n";
    for (const auto& c : report.cells) {
        out << format_number(c.frequency_hz) << ',' << format_number(c.amplitude_mvpp) << ','
            << format_number(c.converter_based_w) << ',' << format_number(c.converter_less_w) << ','
            << c.ratio_text() << '\n';
    }
}

void write_gnuplot_dat(std::ostream& out, const std::vector<std::string>& columns,
                       const std::vector<std::vector<double>>& rows) {
    out << '#';
    for (const auto& c : columns) {
        out << ' ' << c;
    }
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out << (i ? " " : "") << format_number(row[i]);
        }
        out << '\n';
    }
}

void print_comparison(std::ostream& out, const ComparisonReport& report) {
    out << std::left << std::setw(10) << "f [Hz]" << std::setw(12) << "A [mVpp]" << std::setw(16)
        << "CB [uW]" << std::setw(16) << "CL [uW]" << "ratio\n";
    for (const auto& c : report.cells) {
        out << std::setw(10) << format_number(c.frequency_hz) << std::setw(12)
            << format_number(c.amplitude_mvpp) << std::setw(16)
            << format_number(c.converter_based_w * 1e6) << std::setw(16)
            << format_number(c.converter_less_w * 1e6) << c.ratio_text() << '\n';
    }
    out << '\n';
    for (const auto& m : report.per_frequency) {
        out << "mean ratio at " << format_number(m.frequency_hz) << " Hz: "
            << format_number(m.mean_ratio) << " (" << m.finite_cells << " finite, "
            << m.infinite_cells << " infinite)\n";
    }
    out << "mean ratio at resonance (" << format_number(report.resonance_frequency_hz)
        << " Hz): " << format_number(report.resonance_mean_ratio) << '\n';
    for (const auto& g : report.gaps) {
        out << "gap: " << g << '\n';
    }
}

}  // namespace kehsim
