#pragma once

#include <string>
#include <utility>
#include <vector>

#include "semac/harness.hpp"
#include "semac/metrics.hpp"
#include "semac/record.hpp"

namespace semac {

// Shortest text that parses back to the same double.
std::string format_number(double v);

// Columns: episode,protocol,goodput,loss,epsilon,switched. loss and epsilon
// are empty for episodes without training; switched is 0 or 1.
std::string episode_csv(const RunSeries& series);
RunSeries parse_episode_csv(const std::string& text);
RunSeries read_episode_csv(const std::string& path);

// One row per gradient step: episode,step,loss,epsilon,goodput. step counts
// from 0 within the episode; goodput is the episode's test goodput.
std::string training_csv(const RunSeries& series);

std::string curve_csv(const std::vector<std::pair<double, double>>& curve);

std::string summary_json(const ProtocolRun& run);
// Per-seed meta-resilience and goodput plus their means.
std::string aggregate_json(const std::vector<ProtocolRun>& runs);

std::string sweep_csv(const SweepResult& r);
std::string sweep_json(const SweepResult& r);

std::string table1_csv(const std::vector<Table1Column>& cols);
std::string table1_json(const std::vector<Table1Column>& cols);

struct PlotLine {
    std::string label;
    std::vector<std::pair<double, double>> points;
};
// Minimal SVG line chart.
std::string line_plot_svg(const std::vector<PlotLine>& lines, const std::string& x_label, const std::string& y_label);

// Writes `content`, creating parent directories. Throws std::runtime_error naming the path.
void write_text_file(const std::string& path, const std::string& content);

} // namespace semac
