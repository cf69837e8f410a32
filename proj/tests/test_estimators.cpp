#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "wildsurvey/estimators.hpp"

using namespace wildsurvey;

namespace {

std::vector<TransectCount> counts_of(const std::vector<std::int64_t>& y, double area) {
  std::vector<TransectCount> out;
  for (std::size_t i = 0; i < y.size(); ++i) {
    out.push_back({"T" + std::to_string(i + 1), y[i], area});
  }
  return out;
}

// Resampling oracle written from the generator's documented algorithm only.
namespace oracle {

std::uint64_t finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t label_hash(const char* s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (; *s; ++s) {
    h ^= static_cast<unsigned char>(*s);
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::vector<double> ratio_of_sums_replicates(const std::vector<TransectCount>& c,
                                             std::uint64_t seed, std::size_t iterations) {
  const std::uint64_t root = finalize(seed ^ label_hash("bootstrap"));
  const std::uint64_t n = c.size();
  std::vector<double> reps;
  for (std::uint64_t b = 0; b < iterations; ++b) {
    const std::uint64_t key = finalize(root ^ finalize(b ^ 0xD1B54A32D192ED03ULL));
    std::uint64_t counter = 0;
    double animals = 0, area = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
      std::uint64_t idx;
      for (;;) {
        ++counter;
        const std::uint64_t word = finalize(key + counter * 0x9E3779B97F4A7C15ULL);
        const unsigned __int128 m = static_cast<unsigned __int128>(word) * n;
        if (static_cast<std::uint64_t>(m) >= (0 - n) % n) {
          idx = static_cast<std::uint64_t>(m >> 64);
          break;
        }
      }
      animals += static_cast<double>(c[idx].animal_count);
      area += c[idx].covered_area_km2;
    }
    reps.push_back(animals / area);
  }
  return reps;
}

}  // namespace oracle

}  // namespace

TEST_CASE("naive_density on six survey-day summaries", "[estimators]") {
  std::vector<TransectCount> a_oct;
  for (int i = 0; i < 40; ++i) a_oct.push_back({"T" + std::to_string(i), i < 7 ? 3 : 0, 0.76 / 40});
  const auto e = naive_density(a_oct);
  CHECK(e.density_per_km2 == Catch::Approx(21.0 / 0.76).epsilon(1e-12));
  CHECK(std::round(e.density_per_km2 * 100) / 100 == 27.63);
  CHECK_FALSE(e.se.has_value());
  CHECK_FALSE(e.has_ci());
  CHECK(e.n_units == 40);

  const auto zero = naive_density(counts_of({0, 0, 0}, 0.02));
  CHECK(zero.density_per_km2 == 0.0);

  std::vector<TransectCount> c_oct{{"T1", 35, 0.5}, {"T2", 0, 0.43}};
  CHECK(std::round(naive_density(c_oct).density_per_km2 * 100) / 100 == 37.63);

  CHECK_THROWS_AS(naive_density({}), NumericError);
}

TEST_CASE("naive density scales inversely with area", "[estimators][property]") {
  CounterRng rng(5);
  for (int t = 0; t < 50; ++t) {
    std::vector<TransectCount> c;
    for (int i = 0; i < 30; ++i) {
      c.push_back({"T", static_cast<std::int64_t>(rng.poisson(0.6)), rng.uniform(0.01, 0.02)});
    }
    c[0].animal_count += 1;
    const double scale = rng.uniform(0.1, 10.0);
    auto scaled = c;
    for (auto& s : scaled) s.covered_area_km2 *= scale;
    CHECK(naive_density(scaled).density_per_km2 ==
          Catch::Approx(naive_density(c).density_per_km2 / scale).epsilon(1e-12));
  }
}

TEST_CASE("zero_fraction", "[estimators]") {
  CHECK(zero_fraction(counts_of({1, 2, 3}, 0.02)) == 0.0);
  std::vector<std::int64_t> a(40, 0);
  for (int i = 0; i < 9; ++i) a[i] = 2;
  CHECK(zero_fraction(counts_of(a, 0.02)) == 0.775);
  CHECK_THROWS_AS(zero_fraction({}), NumericError);
}

TEST_CASE("bootstrap degenerate cases", "[estimators]") {
  BootstrapConfig cfg;
  cfg.seed = 3;
  SECTION("identical transects give a zero-width interval") {
    const auto e = bootstrap_density(counts_of(std::vector<std::int64_t>(25, 2), 0.02), cfg);
    CHECK(e.density_per_km2 == Catch::Approx(100.0));
    CHECK(*e.ci_low == Catch::Approx(100.0));
    CHECK(*e.ci_high == Catch::Approx(100.0));
  }
  SECTION("a single transect reproduces the naive estimate") {
    const auto c = counts_of({3}, 0.019);
    for (double r : bootstrap_replicates(c, cfg)) {
      CHECK(r == naive_density(c).density_per_km2);
    }
  }
  SECTION("iterations < 1 is a config error") {
    cfg.iterations = 0;
    CHECK_THROWS_AS(bootstrap_density(counts_of({1, 2}, 0.02), cfg), ValidationError);
  }
}

TEST_CASE("bootstrap matches an independent resampling oracle", "[estimators]") {
  CounterRng gen(2024);
  std::vector<TransectCount> c;
  for (int i = 0; i < 40; ++i) {
    const auto y = gen.bernoulli(0.7) ? 0 : static_cast<std::int64_t>(1 + gen.poisson(1.2));
    c.push_back({"T" + std::to_string(i), y, gen.uniform(0.015, 0.0193)});
  }
  BootstrapConfig cfg;
  cfg.seed = 987654321;
  cfg.iterations = 1000;
  const auto reps = bootstrap_replicates(c, cfg);
  const auto expected = oracle::ratio_of_sums_replicates(c, cfg.seed, cfg.iterations);
  REQUIRE(reps.size() == expected.size());
  for (std::size_t b = 0; b < reps.size(); ++b) CHECK(reps[b] == expected[b]);

  cfg.threads = 4;
  CHECK(bootstrap_replicates(c, cfg) == reps);
}

TEST_CASE("bootstrap mean is centred on the naive estimate", "[estimators][property]") {
  // Equal areas make the ideal bootstrap mean equal the naive ratio exactly.
  CounterRng gen(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<TransectCount> c;
    for (int i = 0; i < 40; ++i) {
      const auto y = gen.bernoulli(0.5) ? 0 : static_cast<std::int64_t>(gen.negative_binomial(1.155, 1.5));
      c.push_back({"T", y, 0.01925});
    }
    c[0].animal_count = 2;
    BootstrapConfig cfg;
    cfg.seed = 1000 + trial;
    const auto e = bootstrap_density(c, cfg);
    const double mc_se = *e.se / std::sqrt(1000.0);
    CHECK(std::abs(e.density_per_km2 - naive_density(c).density_per_km2) <= 3.0 * mc_se);
    CHECK(*e.ci_low <= e.density_per_km2);
    CHECK(e.density_per_km2 <= *e.ci_high);
  }
}

TEST_CASE("mean_of_ratios statistic", "[estimators]") {
  BootstrapConfig cfg;
  cfg.statistic = BootstrapStatistic::mean_of_ratios;
  std::vector<TransectCount> c{{"a", 1, 0.01}, {"b", 0, 0.02}};
  for (double r : bootstrap_replicates(c, cfg)) {
    const bool ok = r == Catch::Approx(0.0) || r == Catch::Approx(50.0) || r == Catch::Approx(100.0);
    CHECK(ok);
  }
  CHECK(bootstrap_density(c, cfg).diagnostics["statistic"] == "mean_of_ratios");
}

TEST_CASE("estimate JSON and CSV forms", "[estimators]") {
  BootstrapConfig cfg;
  auto e = bootstrap_density(counts_of({0, 1, 2, 0}, 0.02), cfg);
  e.survey_unit = "A-Oct";
  const auto j = to_json(e);
  for (const char* key : {"method", "density_per_km2", "se", "ci_low", "ci_high", "n_units", "diagnostics"}) {
    CHECK(j.contains(key));
  }
  const auto back = estimate_from_json(j);
  CHECK(back.density_per_km2 == e.density_per_km2);
  CHECK(back.ci_high == e.ci_high);
  CHECK(back.survey_unit == "A-Oct");
  const auto naive = naive_density(counts_of({1}, 0.02));
  CHECK(to_json(naive)["se"].is_null());
  CHECK(to_csv_row(naive) == ",naive,50,,,,1\n");
}
