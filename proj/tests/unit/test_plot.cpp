#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "leakaudit/error.hpp"
#include "leakaudit/hash.hpp"
#include "leakaudit/plot.hpp"
#include "test_support.hpp"

using namespace leakaudit;
namespace lt = leakaudit::testing;

namespace {

std::vector<ProtectionRow> rows() {
  std::vector<ProtectionRow> out;
  for (auto sel : {SelectionKind::Random, SelectionKind::Similarity})
    for (double L : {0.0, 0.5, 1.0})
      for (std::uint64_t seed : {1, 2}) {
        ProtectionRow r;
        r.selection = sel;
        r.replacement = ReplacementKind::Uniform;
        r.L = L;
        r.seed = seed;
        r.k = 10;
        r.recall = 1.0 - L * 0.5 + 0.1 * static_cast<double>(seed);
        r.ndcg = r.recall / 2;
        r.mrr = r.recall / 4;
        r.accuracy = sel == SelectionKind::Similarity ? 0.3 : 0.2;
        out.push_back(r);
      }
  // A different cut-off that must be ignored.
  ProtectionRow other = out.front();
  other.k = 5;
  other.recall = 0.0;
  out.push_back(other);
  return out;
}

TEST(TradeoffPlot, AveragesSeedsPerSeries) {
  const auto data = rows();
  const LinePlot plot = tradeoff_plot(data, "recall", 10);
  ASSERT_EQ(plot.series.size(), 2u);
  EXPECT_EQ(plot.series[0].name, "random/uniform");
  EXPECT_EQ(plot.series[1].name, "similarity/uniform");
  ASSERT_EQ(plot.series[0].points.size(), 3u);
  // Mean of seeds 1 and 2: 1 - L/2 + 0.15.
  EXPECT_DOUBLE_EQ(plot.series[0].points[0].second, 1.15);
  EXPECT_DOUBLE_EQ(plot.series[0].points[1].first, 0.5);
  EXPECT_DOUBLE_EQ(plot.series[0].points[1].second, 0.9);
  const LinePlot acc = tradeoff_plot(data, "acc", 10);
  EXPECT_DOUBLE_EQ(acc.series[1].points[2].second, 0.3);
  EXPECT_THROW(tradeoff_plot(data, "f1", 10), ConfigError);
}

TEST(RenderSvg, WellFormedAndEscaped) {
  LinePlot plot;
  plot.title = "a < b & c";
  plot.series.push_back({"s", {{0.0, 0.0}, {1.0, 1.0}}});
  const std::string svg = render_svg(plot);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_NE(svg.find("a &lt; b &amp; c"), std::string::npos);
  EXPECT_NE(svg.find("<polyline"), std::string::npos);
  EXPECT_EQ(render_svg(plot), svg);
}

TEST(RenderSvg, EmptyPlotStillRenders) {
  EXPECT_NE(render_svg(LinePlot{}).find("</svg>"), std::string::npos);
}

TEST(WriteTradeoffPlots, FilesArePureFunctionOfRows) {
  const auto a = lt::scratch_dir("plots_a");
  const auto b = lt::scratch_dir("plots_b");
  const auto data = rows();
  const auto written = write_tradeoff_plots(data, a, 10);
  ASSERT_EQ(written.size(), 3u);
  EXPECT_EQ(written[0].filename(), "recall_at_10.svg");
  EXPECT_EQ(written[1].filename(), "ndcg_at_10.svg");
  EXPECT_EQ(written[2].filename(), "acc.svg");
  write_tradeoff_plots(data, b, 10);
  for (const auto& p : written) EXPECT_EQ(hash_file(p), hash_file(b / p.filename()));
}

}  // namespace
