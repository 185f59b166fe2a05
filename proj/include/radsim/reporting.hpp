#pragma once

#include <string>

#include "radsim/eval_harness.hpp"

namespace radsim {

// Methods as rows, sources as columns, four decimals. Throws IncompleteTable
// unless every method x source cell is present.
std::string render_summary_markdown(const SummaryTable& table);

struct PlotSpec {
  std::string title;
  std::string x_label = "GT similarity";
  std::string y_label = "predicted similarity";
  int width = 480;
  int height = 500;
  int margin_left = 60;
  int margin_right = 20;
  int margin_top = 40;
  int margin_bottom = 60;
  double axis_min = -1.0;
  double axis_max = 1.0;

  // "<Method> vs GT (<Source>)".
  static PlotSpec for_layer(const HexbinLayer& layer);
  void validate() const;
};

// One <path class="hex"> per bin, fill opacity linear in log(count), and a
// dashed identity line over the layer's percentile band. Throws EmptyLayer
// when the layer has no bins.
std::string render_hexbin_svg(const HexbinLayer& layer, const PlotSpec& spec);

}  // namespace radsim
