#pragma once

// Minimal SVG line charts for the protection trade-off curves. Output is a
// pure function of the input rows.

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "leakaudit/protection.hpp"

namespace leakaudit {

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;  // sorted by x
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
};

std::string render_svg(const LinePlot& plot);

// One series per selection x replacement pair, averaged over seeds, for rows
// with cut-off k. metric is "recall", "ndcg", "mrr" or "acc".
LinePlot tradeoff_plot(std::span<const ProtectionRow> rows, const std::string& metric, int k);

// Writes recall/ndcg/acc charts into `dir`; returns the written paths.
std::vector<std::filesystem::path> write_tradeoff_plots(std::span<const ProtectionRow> rows,
                                                        const std::filesystem::path& dir, int k);

}  // namespace leakaudit
