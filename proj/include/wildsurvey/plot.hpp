#pragma once

// Grouped bar chart of density estimates: one cluster per survey unit, one
// bar per method, whiskers where a confidence interval exists. The SVG and
// the CSV table are both rendered from the same PlotData.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "wildsurvey/errors.hpp"
#include "wildsurvey/estimate.hpp"
#include "wildsurvey/text.hpp"

namespace wildsurvey {

struct PlotBar {
  std::size_t cluster = 0;
  std::string survey_unit;
  Method method = Method::naive;
  double value = 0.0;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
};

struct PlotData {
  std::vector<std::string> clusters;
  std::vector<PlotBar> bars;  // cluster-major, methods in legend order
  double y_max = 0.0;
  double y_tick = 0.0;
};

inline const std::vector<Method>& plot_method_order() {
  static const std::vector<Method> order{Method::rem, Method::naive, Method::bootstrap, Method::zinb};
  return order;
}

inline const char* plot_color(Method m) noexcept {
  switch (m) {
    case Method::rem: return "#e08214";
    case Method::naive: return "#a1d99b";
    case Method::bootstrap: return "#41ab5d";
    case Method::zinb: return "#006d2c";
  }
  return "#888888";
}

namespace plot_detail {

inline double nice_step(double span) {
  if (!(span > 0.0)) return 1.0;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double f : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    if (raw <= f * mag) return f * mag;
  }
  return 10.0 * mag;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num(double v) { return text::format_double(v); }
inline std::string px(double v) { return text::format_fixed(v, 2); }

}  // namespace plot_detail

inline PlotData make_plot_data(const std::vector<DensityEstimate>& estimates) {
  if (estimates.empty()) throw ValidationError("plot: no estimates");
  PlotData d;
  for (const auto& e : estimates) {
    if (std::find(d.clusters.begin(), d.clusters.end(), e.survey_unit) == d.clusters.end()) {
      d.clusters.push_back(e.survey_unit);
    }
  }
  std::vector<std::string> problems;
  double top = 0.0;
  for (std::size_t c = 0; c < d.clusters.size(); ++c) {
    for (Method m : plot_method_order()) {
      std::size_t found = 0;
      for (const auto& e : estimates) {
        if (e.survey_unit != d.clusters[c] || e.method != m) continue;
        if (++found > 1) {
          problems.push_back("duplicate estimate for " + d.clusters[c] + "/" + to_string(m));
          continue;
        }
        PlotBar b{c, e.survey_unit, m, e.density_per_km2, std::nullopt, std::nullopt};
        if (e.has_ci() && std::isfinite(*e.ci_low) && std::isfinite(*e.ci_high)) {
          b.ci_low = e.ci_low;
          b.ci_high = e.ci_high;
          top = std::max(top, *e.ci_high);
        }
        top = std::max(top, e.density_per_km2);
        d.bars.push_back(b);
      }
    }
  }
  if (!problems.empty()) throw ValidationError("plot: conflicting estimates", problems);
  d.y_tick = plot_detail::nice_step(top);
  d.y_max = std::max(d.y_tick, std::ceil(top / d.y_tick) * d.y_tick);
  return d;
}

inline std::string plot_csv(const PlotData& d) {
  std::string out = "cluster,survey_unit,method,density_per_km2,ci_low,ci_high,color\n";
  auto opt = [](const std::optional<double>& v) { return v ? plot_detail::num(*v) : std::string(); };
  for (const auto& b : d.bars) {
    out += text::csv_line({std::to_string(b.cluster), b.survey_unit, to_string(b.method),
                           plot_detail::num(b.value), opt(b.ci_low), opt(b.ci_high), plot_color(b.method)});
  }
  return out;
}

inline std::string plot_svg(const PlotData& d, const std::string& title = "Density estimates") {
  using plot_detail::num;
  using plot_detail::px;
  using plot_detail::xml_escape;
  constexpr double bar_w = 22.0, bar_gap = 4.0, cluster_gap = 28.0;
  constexpr double left = 64.0, right = 150.0, top = 44.0, bottom = 56.0, plot_h = 300.0;

  std::vector<std::size_t> per_cluster(d.clusters.size(), 0);
  for (const auto& b : d.bars) ++per_cluster[b.cluster];
  std::vector<double> cluster_x(d.clusters.size(), 0.0);
  double x = left + cluster_gap / 2;
  for (std::size_t c = 0; c < d.clusters.size(); ++c) {
    cluster_x[c] = x;
    x += static_cast<double>(per_cluster[c]) * (bar_w + bar_gap) - bar_gap + cluster_gap;
  }
  const double plot_w = x - left - cluster_gap / 2;
  const double width = left + plot_w + cluster_gap / 2 + right;
  const double height = top + plot_h + bottom;
  auto y_of = [&](double v) { return top + plot_h * (1.0 - v / d.y_max); };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px(width) + "\" height=\"" + px(height) +
       "\" viewBox=\"0 0 " + px(width) + " " + px(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + px(width / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + xml_escape(title) + "</text>\n";

  for (double t = 0.0; t <= d.y_max + 1e-9 * d.y_max; t += d.y_tick) {
    const double y = y_of(t);
    s += "<line x1=\"" + px(left) + "\" y1=\"" + px(y) + "\" x2=\"" + px(left + plot_w + cluster_gap / 2) +
         "\" y2=\"" + px(y) + "\" stroke=\"#dddddd\"/>\n";
    s += "<text x=\"" + px(left - 6) + "\" y=\"" + px(y + 4) + "\" text-anchor=\"end\">" + num(t) + "</text>\n";
  }
  s += "<line x1=\"" + px(left) + "\" y1=\"" + px(top) + "\" x2=\"" + px(left) + "\" y2=\"" + px(top + plot_h) +
       "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + px(left) + "\" y1=\"" + px(top + plot_h) + "\" x2=\"" + px(left + plot_w + cluster_gap / 2) +
       "\" y2=\"" + px(top + plot_h) + "\" stroke=\"black\"/>\n";
  s += "<text transform=\"translate(18 " + px(top + plot_h / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">Density (individuals/km²)</text>\n";

  std::vector<std::size_t> slot(d.clusters.size(), 0);
  for (const auto& b : d.bars) {
    const double bx = cluster_x[b.cluster] + static_cast<double>(slot[b.cluster]++) * (bar_w + bar_gap);
    const double y = y_of(std::max(0.0, b.value));
    s += "<rect class=\"bar\" x=\"" + px(bx) + "\" y=\"" + px(y) + "\" width=\"" + px(bar_w) + "\" height=\"" +
         px(top + plot_h - y) + "\" fill=\"" + plot_color(b.method) + "\" data-unit=\"" + xml_escape(b.survey_unit) +
         "\" data-method=\"" + to_string(b.method) + "\" data-value=\"" + num(b.value) + "\"";
    if (b.ci_low) s += " data-ci-low=\"" + num(*b.ci_low) + "\" data-ci-high=\"" + num(*b.ci_high) + "\"";
    s += "/>\n";
    if (b.ci_low) {
      const double cx = bx + bar_w / 2;
      const double y0 = y_of(std::max(0.0, *b.ci_low)), y1 = y_of(*b.ci_high);
      s += "<path class=\"whisker\" d=\"M" + px(cx) + " " + px(y0) + "V" + px(y1) + "M" + px(cx - 5) + " " + px(y0) +
           "H" + px(cx + 5) + "M" + px(cx - 5) + " " + px(y1) + "H" + px(cx + 5) + "\" stroke=\"black\" fill=\"none\"/>\n";
    }
  }
  for (std::size_t c = 0; c < d.clusters.size(); ++c) {
    const double w = static_cast<double>(per_cluster[c]) * (bar_w + bar_gap) - bar_gap;
    s += "<text x=\"" + px(cluster_x[c] + w / 2) + "\" y=\"" + px(top + plot_h + 20) + "\" text-anchor=\"middle\">" +
         xml_escape(d.clusters[c].empty() ? "(all)" : d.clusters[c]) + "</text>\n";
  }
  double ly = top + 10;
  for (Method m : plot_method_order()) {
    const bool used = std::any_of(d.bars.begin(), d.bars.end(), [&](const auto& b) { return b.method == m; });
    if (!used) continue;
    const double lx = left + plot_w + cluster_gap / 2 + 20;
    s += "<rect x=\"" + px(lx) + "\" y=\"" + px(ly - 10) + "\" width=\"14\" height=\"14\" fill=\"" + plot_color(m) + "\"/>\n";
    s += "<text x=\"" + px(lx + 20) + "\" y=\"" + px(ly + 1) + "\">" + to_string(m) + "</text>\n";
    ly += 22;
  }
  s += "</svg>\n";
  return s;
}

}  // namespace wildsurvey
