#pragma once

#include "qadapt/simulation.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace qadapt {

// Shortest-roundtrip decimal rendering (std::to_chars); identical input
// states produce byte-identical text.
std::string format_double(double x);

std::uint64_t fnv1a64(std::string_view s);

std::string render_csv(const ScenarioTrace& tr);

std::string render_metrics_json(const MetricsReport& met,
                                const ConvergenceSummary* conv = nullptr);

// Self-contained multi-panel line chart of the main trace signals.
std::string render_plot_svg(const ScenarioTrace& tr);

void write_text_file(const std::string& path, const std::string& content);

struct OutputPaths {
    std::string trace_csv;
    std::string metrics_json;
    std::string plot_svg;  // empty unless requested
};

// Writes trace.csv and metrics.json (and plot.svg when out.plot) under
// out.dir, creating the directory if needed.
OutputPaths write_outputs(const SimResult& res, const OutputConfig& out,
                          const ConvergenceSummary* conv = nullptr);

} // namespace qadapt
