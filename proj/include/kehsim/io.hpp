#pragma once

#include "kehsim/engine.hpp"
#include "kehsim/mppt.hpp"
#include "kehsim/transducer.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace kehsim {

/// Shortest text that parses back to the same double ("nan", "inf", "-inf"
/// for non-finite values).
[[nodiscard]] std::string format_number(double value);

// CSV writers. Each writes a single header line followed by one row per record.

void write_iv_csv(std::ostream& out, const IVCurve& curve);
void write_trace_csv(std::ostream& out, const std::vector<TraceSample>& samples);
void write_threshold_csv(std::ostream& out, const std::vector<SweepPoint>& table);
void write_tracking_csv(std::ostream& out, const std::vector<TrackingRow>& rows);
void write_mpp_trace_csv(std::ostream& out, const std::vector<MppTraceSample>& trace);
void write_sweep_csv(std::ostream& out, const SweepTable& table, const ComparisonReport& report);
void write_comparison_csv(std::ostream& out, const ComparisonReport& report);

/// Reads back what write_sweep_csv produced (threshold tables are not kept).
[[nodiscard]] SweepTable read_sweep_csv(std::istream& in);

/// Whitespace-separated gnuplot data with a commented header.
void write_gnuplot_dat(std::ostream& out, const std::vector<std::string>& columns,
                       const std::vector<std::vector<double>>& rows);

/// Human-readable comparison table for terminal output.
void print_comparison(std::ostream& out, const ComparisonReport& report);

}  // namespace kehsim
