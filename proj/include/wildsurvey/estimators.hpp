#pragma once

// Drone-based density extrapolations over per-transect counts: the naive
// ratio estimator, the transect bootstrap, and the transect zero fraction.
// The zero-inflated negative binomial model lives in zinb.hpp.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "wildsurvey/data_io.hpp"
#include "wildsurvey/errors.hpp"
#include "wildsurvey/estimate.hpp"
#include "wildsurvey/rng.hpp"

namespace wildsurvey {

inline DensityEstimate naive_density(const std::vector<TransectCount>& counts) {
  if (counts.empty()) throw NumericError("naive density: no transects");
  double animals = 0.0;
  double area = 0.0;
  for (const auto& c : counts) {
    animals += static_cast<double>(c.animal_count);
    area += c.covered_area_km2;
  }
  if (!(area > 0.0)) throw NumericError("naive density: total covered area is zero");
  DensityEstimate e;
  e.method = Method::naive;
  e.density_per_km2 = animals / area;
  e.n_units = counts.size();
  e.diagnostics["total_animals"] = animals;
  e.diagnostics["total_area_km2"] = area;
  return e;
}

inline double zero_fraction(const std::vector<TransectCount>& counts) {
  if (counts.empty()) throw NumericError("zero fraction: no transects");
  const auto zeros = std::count_if(counts.begin(), counts.end(),
                                   [](const auto& c) { return c.animal_count == 0; });
  return static_cast<double>(zeros) / static_cast<double>(counts.size());
}

enum class BootstrapStatistic { ratio_of_sums, mean_of_ratios };

inline const char* to_string(BootstrapStatistic s) noexcept {
  return s == BootstrapStatistic::ratio_of_sums ? "ratio_of_sums" : "mean_of_ratios";
}

struct BootstrapConfig {
  std::size_t iterations = 1000;
  double confidence = 0.95;
  std::uint64_t seed = 0;
  BootstrapStatistic statistic = BootstrapStatistic::ratio_of_sums;
  unsigned threads = 1;
};

/// Iteration b resamples n transects with replacement using its own stream
/// CounterRng(seed).substream("bootstrap").substream(b), so the replicate
/// vector does not depend on the thread count.
inline std::vector<double> bootstrap_replicates(
    const std::vector<TransectCount>& counts, const BootstrapConfig& config) {
  if (counts.empty()) throw NumericError("bootstrap: no transects");
  if (config.iterations < 1) throw ValidationError("bootstrap: iterations must be >= 1");
  if (!(config.confidence > 0.0 && config.confidence < 1.0)) {
    throw ValidationError("bootstrap: confidence must lie in (0, 1)");
  }
  for (const auto& c : counts) {
    if (!(c.covered_area_km2 > 0.0)) {
      throw ValidationError("bootstrap: transect " + c.transect_id +
                            " has non-positive area");
    }
  }

  const std::size_t n = counts.size();
  const CounterRng root = CounterRng(config.seed).substream("bootstrap");
  std::vector<double> reps(config.iterations);

  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t b = begin; b < end; ++b) {
      CounterRng rng = root.substream(static_cast<std::uint64_t>(b));
      double animals = 0.0, area = 0.0, ratios = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& c = counts[rng.uniform_index(n)];
        animals += static_cast<double>(c.animal_count);
        area += c.covered_area_km2;
        ratios += static_cast<double>(c.animal_count) / c.covered_area_km2;
      }
      reps[b] = config.statistic == BootstrapStatistic::ratio_of_sums
                    ? animals / area
                    : ratios / static_cast<double>(n);
    }
  };

  const unsigned threads =
      std::max(1u, std::min<unsigned>(config.threads,
                                      static_cast<unsigned>(config.iterations)));
  if (threads == 1) {
    run(0, config.iterations);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (config.iterations + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t b0 = t * chunk;
      const std::size_t b1 = std::min(config.iterations, b0 + chunk);
      if (b0 < b1) pool.emplace_back(run, b0, b1);
    }
  }
  return reps;
}

/// Linear-interpolation sample quantile (R type 7) of sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw NumericError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Mean of the bootstrap replicates with a percentile interval.
inline DensityEstimate bootstrap_density(const std::vector<TransectCount>& counts,
                                         const BootstrapConfig& config) {
  std::vector<double> reps = bootstrap_replicates(counts, config);
  const double b = static_cast<double>(reps.size());
  const double mean = std::accumulate(reps.begin(), reps.end(), 0.0) / b;
  double ss = 0.0;
  for (double r : reps) ss += (r - mean) * (r - mean);
  const double sd = reps.size() > 1 ? std::sqrt(ss / (b - 1.0)) : 0.0;

  std::sort(reps.begin(), reps.end());
  const double alpha = 1.0 - config.confidence;

  DensityEstimate e;
  e.method = Method::bootstrap;
  e.density_per_km2 = mean;
  e.se = sd;
  e.ci_low = quantile_sorted(reps, alpha / 2.0);
  e.ci_high = quantile_sorted(reps, 1.0 - alpha / 2.0);
  e.n_units = counts.size();
  e.diagnostics["iterations"] = config.iterations;
  e.diagnostics["confidence"] = config.confidence;
  e.diagnostics["statistic"] = to_string(config.statistic);
  e.diagnostics["seed"] = config.seed;
  e.diagnostics["monte_carlo_se"] = sd / std::sqrt(b);
  return e;
}

}  // namespace wildsurvey
