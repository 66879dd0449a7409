#include "leakaudit/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "leakaudit/error.hpp"

namespace leakaudit {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 190, kTop = 40, kBottom = 60;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

double metric_value(const ProtectionRow& r, const std::string& metric) {
  if (metric == "recall") return r.recall;
  if (metric == "ndcg") return r.ndcg;
  if (metric == "mrr") return r.mrr;
  if (metric == "acc") return r.accuracy;
  throw ConfigError("plot: unknown metric '" + metric + "'");
}

}  // namespace

std::string render_svg(const LinePlot& plot) {
  double x0 = 0, x1 = 1, y1 = 0;
  bool any = false;
  for (const auto& s : plot.series)
    for (const auto& [x, y] : s.points) {
      if (!any) x0 = x1 = x;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
      any = true;
    }
  if (x1 <= x0) x1 = x0 + 1;
  y1 = y1 > 0 ? y1 * 1.05 : 1.0;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + ph - y / y1 * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << escape(plot.title) << "</text>\n";
  for (int t = 0; t <= 5; ++t) {
    const double y = y1 * t / 5.0, x = x0 + (x1 - x0) * t / 5.0;
    svg << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(py(y)) << "\" x2=\"" << fmt(kLeft + pw)
        << "\" y2=\"" << fmt(py(y)) << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(py(y) + 4) << "\" text-anchor=\"end\">"
        << fmt(y) << "</text>\n";
    svg << "<text x=\"" << fmt(px(x)) << "\" y=\"" << fmt(kTop + ph + 18)
        << "\" text-anchor=\"middle\">" << fmt(x) << "</text>\n";
  }
  svg << "<rect x=\"" << fmt(kLeft) << "\" y=\"" << fmt(kTop) << "\" width=\"" << fmt(pw)
      << "\" height=\"" << fmt(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kHeight - 15)
      << "\" text-anchor=\"middle\">" << escape(plot.x_label) << "</text>\n";
  svg << "<text transform=\"translate(18," << fmt(kTop + ph / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(plot.y_label) << "</text>\n";

  for (std::size_t i = 0; i < plot.series.size(); ++i) {
    const auto& s = plot.series[i];
    const char* color = kColors[i % std::size(kColors)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t p = 0; p < s.points.size(); ++p)
      svg << (p ? " " : "") << fmt(px(s.points[p].first)) << ',' << fmt(py(s.points[p].second));
    svg << "\"/>\n";
    for (const auto& [x, y] : s.points)
      svg << "<circle cx=\"" << fmt(px(x)) << "\" cy=\"" << fmt(py(y)) << "\" r=\"3\" fill=\""
          << color << "\"/>\n";
    const double ly = kTop + 10 + 20.0 * static_cast<double>(i);
    svg << "<line x1=\"" << fmt(kLeft + pw + 12) << "\" y1=\"" << fmt(ly) << "\" x2=\""
        << fmt(kLeft + pw + 32) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << fmt(kLeft + pw + 38) << "\" y=\"" << fmt(ly + 4) << "\">" << escape(s.name)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

LinePlot tradeoff_plot(std::span<const ProtectionRow> rows, const std::string& metric, int k) {
  // (selection, replacement) -> L -> (sum, count)
  std::map<std::pair<int, int>, std::map<double, std::pair<double, int>>> acc;
  for (const ProtectionRow& r : rows) {
    if (r.k != k) continue;
    auto& cell = acc[{static_cast<int>(r.selection), static_cast<int>(r.replacement)}][r.L];
    cell.first += metric_value(r, metric);
    cell.second += 1;
  }
  LinePlot plot;
  const std::string label = metric == "acc" ? "acc*" : metric + "*@" + std::to_string(k);
  plot.title = label + " vs replacement proportion";
  plot.x_label = "L";
  plot.y_label = label;
  for (const auto& [key, by_level] : acc) {
    PlotSeries s;
    s.name = std::string(to_string(static_cast<SelectionKind>(key.first))) + "/" +
             std::string(to_string(static_cast<ReplacementKind>(key.second)));
    for (const auto& [L, sc] : by_level) s.points.emplace_back(L, sc.first / sc.second);
    plot.series.push_back(std::move(s));
  }
  return plot;
}

std::vector<std::filesystem::path> write_tradeoff_plots(std::span<const ProtectionRow> rows,
                                                        const std::filesystem::path& dir, int k) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const std::string metric : {"recall", "ndcg", "acc"}) {
    const auto path = dir / (metric + (metric == "acc" ? "" : "_at_" + std::to_string(k)) + ".svg");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write plot " + path.string());
    out << render_svg(tradeoff_plot(rows, metric, k));
    written.push_back(path);
  }
  return written;
}

}  // namespace leakaudit
