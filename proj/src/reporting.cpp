#include "radsim/reporting.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "radsim/error.hpp"

namespace radsim {
namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string render_summary_markdown(const SummaryTable& table) {
  std::string md =
      "# Mean Differences in Similarity Scores\n\n"
      "| Comparison | CheXpert | NegBio |\n"
      "|---|---:|---:|\n";
  for (Method m : kAllMethods) {
    md += fmt::format("| {} |", to_string(m));
    for (LabelSource source : kAllSources) {
      const SummaryCell* cell = table.find(m, source);
      if (!cell) {
        throw Error(ErrorKind::IncompleteTable, fmt::format("summary has no {} / {} cell",
                                                            to_string(m), to_string(source)));
      }
      md += " " + fixed(cell->mean_difference, 4) + " |";
    }
    md += "\n";
  }
  return md;
}

PlotSpec PlotSpec::for_layer(const HexbinLayer& layer) {
  PlotSpec spec;
  spec.title = fmt::format("{} vs GT ({})", to_string(layer.method), to_string(layer.source));
  return spec;
}

void PlotSpec::validate() const {
  if (width < 300 || height < 300) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("canvas {}x{} is below 300x300", width, height));
  }
  if (width - margin_left - margin_right <= 0 || height - margin_top - margin_bottom <= 0) {
    throw Error(ErrorKind::InvalidArgument, "margins leave no plot area");
  }
  if (!(axis_max > axis_min)) throw Error(ErrorKind::InvalidArgument, "empty axis range");
}

std::string render_hexbin_svg(const HexbinLayer& layer, const PlotSpec& spec) {
  spec.validate();
  if (layer.bins.empty()) {
    throw Error(ErrorKind::EmptyLayer,
                fmt::format("{} / {} has no bin above min_count {}", to_string(layer.method),
                            to_string(layer.source), layer.min_count));
  }
  const int W = spec.width, H = spec.height;
  const int left = spec.margin_left, top = spec.margin_top;
  const int pw = W - left - spec.margin_right;
  const int ph = H - top - spec.margin_bottom;
  const double lo = spec.axis_min, hi = spec.axis_max;
  auto px = [&](double x) { return left + (x - lo) / (hi - lo) * pw; };
  auto py = [&](double y) { return top + (hi - y) / (hi - lo) * ph; };
  auto f2 = [](double v) { return fixed(v, 2); };
  const std::string title = xml_escape(spec.title);

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\">\n",
      W, H);
  s += fmt::format("<title>{}</title>\n", title);
  s += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n", W, H);
  s += fmt::format(
      "<defs><clipPath id=\"plot-area\"><rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/>"
      "</clipPath></defs>\n",
      left, top, pw, ph);
  s += "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n";
  s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>\n", left, top + ph,
                   left + pw, top + ph);
  s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>\n", left, top, left,
                   top + ph);
  s += "</g>\n";

  s += "<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"10\">\n";
  const int ticks = static_cast<int>(std::floor((hi - lo) / 0.25 + 1e-9)) + 1;
  for (int i = 0; i < ticks; ++i) {
    const double t = lo + 0.25 * i;
    const std::string x = f2(px(t)), y = f2(py(t)), label = f2(t);
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n",
                     x, top + ph, top + ph + 5);
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", x,
                     top + ph + 18, label);
    s += fmt::format("<line x1=\"{0}\" y1=\"{2}\" x2=\"{1}\" y2=\"{2}\" stroke=\"black\"/>\n",
                     left - 5, left, y);
    s += fmt::format(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" dominant-baseline=\"middle\">{}</text>\n",
        left - 8, y, label);
  }
  s += "</g>\n";

  s += fmt::format(
      "<text class=\"x-label\" x=\"{}\" y=\"{}\" text-anchor=\"middle\" "
      "font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
      f2(left + pw / 2.0), H - 15, xml_escape(spec.x_label));
  const std::string mid = f2(top + ph / 2.0);
  s += fmt::format(
      "<text class=\"y-label\" x=\"15\" y=\"{0}\" text-anchor=\"middle\" "
      "font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 15 {0})\">"
      "{1}</text>\n",
      mid, xml_escape(spec.y_label));
  s += fmt::format(
      "<text class=\"title\" x=\"{}\" y=\"25\" text-anchor=\"middle\" "
      "font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
      f2(W / 2.0), title);

  s += "<g class=\"bins\" clip-path=\"url(#plot-area)\">\n";
  std::size_t max_count = 0;
  for (const auto& b : layer.bins) max_count = std::max(max_count, b.count);
  const double r = layer.hex_radius;
  const double h = r * std::sqrt(3.0) / 2.0;
  for (const auto& b : layer.bins) {
    const double cx = b.x, cy = b.y;
    const std::pair<double, double> verts[] = {
        {cx + h, cy + r / 2.0}, {cx, cy + r},         {cx - h, cy + r / 2.0},
        {cx - h, cy - r / 2.0}, {cx, cy - r},         {cx + h, cy - r / 2.0}};
    std::string d;
    for (const auto& [vx, vy] : verts) {
      if (!d.empty()) d += " L";
      d += f2(px(vx)) + "," + f2(py(vy));
    }
    const double opacity =
        max_count <= 1 ? 1.0
                       : 0.2 + 0.8 * std::log(static_cast<double>(b.count)) /
                                   std::log(static_cast<double>(max_count));
    s += fmt::format(
        "<path class=\"hex\" data-count=\"{}\" d=\"M{} Z\" fill=\"#1f4e79\" "
        "fill-opacity=\"{}\"/>\n",
        b.count, d, fixed(opacity, 3));
  }
  s += "</g>\n";

  if (layer.band) {
    const auto [b_lo, b_hi] = *layer.band;
    s += fmt::format(
        "<line class=\"identity\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#c0392b\" "
        "stroke-width=\"1.5\" stroke-dasharray=\"6,4\"/>\n",
        f2(px(b_lo)), f2(py(b_lo)), f2(px(b_hi)), f2(py(b_hi)));
  }
  s += "</svg>\n";
  return s;
}

}  // namespace radsim
