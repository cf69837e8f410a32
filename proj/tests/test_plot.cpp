#include <catch2/catch_amalgamated.hpp>

#include <regex>
#include <set>
#include <sstream>

#include "wildsurvey/plot.hpp"
#include "wildsurvey/rng.hpp"

using namespace wildsurvey;

namespace {

std::vector<DensityEstimate> figure_like() {
  std::vector<DensityEstimate> out;
  CounterRng rng(2);
  for (const char* unit : {"A-Oct", "A-Nov", "B-Oct", "B-Nov", "C-Oct", "C-Nov"}) {
    for (Method m : {Method::zinb, Method::naive, Method::rem, Method::bootstrap}) {
      DensityEstimate e;
      e.method = m;
      e.survey_unit = unit;
      e.density_per_km2 = rng.uniform(13, 65);
      if (m != Method::naive) {
        e.ci_low = e.density_per_km2 * 0.7;
        e.ci_high = e.density_per_km2 * 1.4;
      }
      out.push_back(e);
    }
  }
  return out;
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("4 methods x 6 units give 24 bars in 6 clusters", "[plot]") {
  const auto d = make_plot_data(figure_like());
  CHECK(d.clusters.size() == 6);
  REQUIRE(d.bars.size() == 24);
  CHECK(d.bars[0].method == Method::rem);
  CHECK(d.bars[1].method == Method::naive);
  CHECK(d.bars[3].method == Method::zinb);
  const auto svg = plot_svg(d);
  CHECK(count(svg, "class=\"bar\"") == 24);
  CHECK(count(svg, "class=\"whisker\"") == 18);
  CHECK(count(plot_csv(d), "\n") == 25);
  for (const auto& b : d.bars) {
    if (b.ci_high) CHECK(*b.ci_high <= d.y_max);
    CHECK(b.value <= d.y_max);
  }
}

TEST_CASE("single estimate and estimate without CI", "[plot]") {
  DensityEstimate e;
  e.density_per_km2 = 27.63;
  const auto d = make_plot_data({e});
  CHECK(d.bars.size() == 1);
  const auto svg = plot_svg(d);
  CHECK(count(svg, "class=\"bar\"") == 1);
  CHECK(count(svg, "class=\"whisker\"") == 0);
  CHECK(plot_csv(d) == "cluster,survey_unit,method,density_per_km2,ci_low,ci_high,color\n0,,naive,27.63,,,#a1d99b\n");
}

TEST_CASE("CSV holds exactly the numbers drawn in the SVG", "[plot]") {
  const auto d = make_plot_data(figure_like());
  const auto svg = plot_svg(d);
  const std::regex bar_re("data-unit=\"([^\"]*)\" data-method=\"([a-z]+)\" data-value=\"([^\"]+)\"(?: data-ci-low=\"([^\"]+)\" data-ci-high=\"([^\"]+)\")?");
  std::vector<std::string> from_svg;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), bar_re); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    from_svg.push_back(m[1].str() + "," + m[2].str() + "," + m[3].str() + "," + m[4].str() + "," + m[5].str());
  }
  std::istringstream csv(plot_csv(d));
  std::string line;
  std::getline(csv, line);
  std::vector<std::string> from_csv;
  while (std::getline(csv, line)) {
    // drop the leading cluster index and the trailing colour
    const auto first = line.find(',');
    const auto last = line.rfind(',');
    from_csv.push_back(line.substr(first + 1, last - first - 1));
  }
  CHECK(from_svg == from_csv);
}

TEST_CASE("conflicting and empty inputs", "[plot]") {
  CHECK_THROWS_AS(make_plot_data({}), ValidationError);
  DensityEstimate e;
  e.survey_unit = "A";
  CHECK_THROWS_AS(make_plot_data({e, e}), ValidationError);
}
