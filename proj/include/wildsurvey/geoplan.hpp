#pragma once

// The survey grid and the randomized transect planner.
//
// Transects are edges of a square lattice clipped to the survey region. A
// flight is a chain of connected edges starting at a launch node; at each
// turnpoint the next heading is drawn among the unused incident edges with
// weights inversely proportional to how often each heading has already been
// flown design-wide. Edges are never reused, which keeps flights from
// re-covering the same strip on a survey day.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wildsurvey/errors.hpp"
#include "wildsurvey/geometry.hpp"
#include "wildsurvey/rng.hpp"

namespace wildsurvey {

enum class Heading : std::uint8_t { north = 0, east = 1, south = 2, west = 3 };

inline constexpr std::array<Heading, 4> kAllHeadings = {
    Heading::north, Heading::east, Heading::south, Heading::west};

inline constexpr std::size_t index_of(Heading h) noexcept {
  return static_cast<std::size_t>(h);
}

inline constexpr Heading reverse(Heading h) noexcept {
  return static_cast<Heading>((index_of(h) + 2) % 4);
}

inline constexpr const char* to_string(Heading h) noexcept {
  constexpr const char* names[] = {"N", "E", "S", "W"};
  return names[index_of(h)];
}

inline Heading heading_from_string(const std::string& s) {
  if (s == "N") return Heading::north;
  if (s == "E") return Heading::east;
  if (s == "S") return Heading::south;
  if (s == "W") return Heading::west;
  throw ValidationError("unknown heading '" + s + "'");
}

using DirectionCounts = std::array<std::size_t, 4>;

struct GridSpec {
  std::optional<PlanarPoint> origin;  // defaults to the region bbox minimum
  double spacing = 350.0;
};

inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

struct GridNode {
  int i = 0;
  int j = 0;
  PlanarPoint position;
  std::array<std::size_t, 4> edge{kNoIndex, kNoIndex, kNoIndex, kNoIndex};
  std::array<std::size_t, 4> neighbor{kNoIndex, kNoIndex, kNoIndex, kNoIndex};
};

struct GridEdge {
  std::size_t a = 0;  // a < b
  std::size_t b = 0;
};

class GridGraph {
 public:
  GridGraph(SurveyRegion region, PlanarPoint origin, double spacing,
            std::vector<GridNode> nodes, std::vector<GridEdge> edges)
      : region_(std::move(region)),
        origin_(origin),
        spacing_(spacing),
        nodes_(std::move(nodes)),
        edges_(std::move(edges)) {
    for (std::size_t n = 0; n < nodes_.size(); ++n) {
      lookup_[{nodes_[n].i, nodes_[n].j}] = n;
    }
  }

  const SurveyRegion& region() const noexcept { return region_; }
  PlanarPoint origin() const noexcept { return origin_; }
  double spacing() const noexcept { return spacing_; }
  const std::vector<GridNode>& nodes() const noexcept { return nodes_; }
  const std::vector<GridEdge>& edges() const noexcept { return edges_; }
  const GridNode& node(std::size_t n) const { return nodes_.at(n); }

  std::optional<std::size_t> find_node(int i, int j) const {
    auto it = lookup_.find({i, j});
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }

 private:
  SurveyRegion region_;
  PlanarPoint origin_;
  double spacing_;
  std::vector<GridNode> nodes_;
  std::vector<GridEdge> edges_;
  std::map<std::pair<int, int>, std::size_t> lookup_;
};

/// Lattice nodes inside the region, joined to their east/north neighbours
/// whenever the connecting segment stays inside. Throws when no edge
/// survives, since nothing could be flown.
inline GridGraph build_grid(const SurveyRegion& region, const GridSpec& spec) {
  if (!(spec.spacing > 0.0) || !std::isfinite(spec.spacing)) {
    throw ValidationError("grid spacing must be positive");
  }
  const auto& bb = region.bbox();
  const PlanarPoint origin = spec.origin.value_or(PlanarPoint{bb.min_x, bb.min_y});
  const double s = spec.spacing;
  constexpr double eps = 1e-9;
  const int i0 = static_cast<int>(std::ceil((bb.min_x - origin.x) / s - eps));
  const int i1 = static_cast<int>(std::floor((bb.max_x - origin.x) / s + eps));
  const int j0 = static_cast<int>(std::ceil((bb.min_y - origin.y) / s - eps));
  const int j1 = static_cast<int>(std::floor((bb.max_y - origin.y) / s + eps));

  std::vector<GridNode> nodes;
  std::map<std::pair<int, int>, std::size_t> at;
  for (int j = j0; j <= j1; ++j) {
    for (int i = i0; i <= i1; ++i) {
      const PlanarPoint p{origin.x + i * s, origin.y + j * s};
      if (!region.contains(p)) continue;
      at[{i, j}] = nodes.size();
      nodes.push_back(GridNode{i, j, p});
    }
  }

  std::vector<GridEdge> edges;
  auto link = [&](std::size_t from, Heading h, int di, int dj) {
    auto it = at.find({nodes[from].i + di, nodes[from].j + dj});
    if (it == at.end()) return;
    const std::size_t to = it->second;
    if (!region.contains_segment(nodes[from].position, nodes[to].position)) {
      return;
    }
    const std::size_t e = edges.size();
    edges.push_back(GridEdge{std::min(from, to), std::max(from, to)});
    nodes[from].edge[index_of(h)] = e;
    nodes[from].neighbor[index_of(h)] = to;
    nodes[to].edge[index_of(reverse(h))] = e;
    nodes[to].neighbor[index_of(reverse(h))] = from;
  };
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    link(n, Heading::east, 1, 0);
    link(n, Heading::north, 0, 1);
  }
  if (edges.empty()) {
    throw PlanningError("empty grid: no grid edge of spacing " +
                        std::to_string(s) + " m fits inside the region");
  }
  return GridGraph(region, origin, s, std::move(nodes), std::move(edges));
}

struct SnapResult {
  std::vector<std::size_t> nodes;       // one per mapped input point, in order
  std::vector<std::size_t> unmapped;    // indices into the input list
};

inline SnapResult snap_launch_points(const std::vector<PlanarPoint>& points,
                                     const GridGraph& grid,
                                     std::optional<double> tolerance = {}) {
  const double tol = tolerance.value_or(grid.spacing() / 2.0);
  if (!(tol >= 0.0)) throw ValidationError("snap tolerance must be >= 0");
  SnapResult out;
  for (std::size_t p = 0; p < points.size(); ++p) {
    std::size_t best = kNoIndex;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < grid.nodes().size(); ++n) {
      const double d = distance(points[p], grid.nodes()[n].position);
      if (d < best_d) {
        best_d = d;
        best = n;
      }
    }
    if (best != kNoIndex && best_d <= tol) {
      out.nodes.push_back(best);
    } else {
      out.unmapped.push_back(p);
    }
  }
  if (out.nodes.empty()) {
    throw PlanningError("no launch point lies within " + std::to_string(tol) +
                        " m of a grid node");
  }
  return out;
}

struct Transect {
  std::string id;
  std::size_t edge = 0;
  std::size_t start_node = 0;
  std::size_t end_node = 0;
  PlanarPoint start;
  PlanarPoint end;
  Heading heading = Heading::north;
  double length_m = 0.0;
  double swath_width_m = 0.0;
  double covered_area_km2 = 0.0;
};

/// Swath footprint of a straight transect: a rectangle of the transect's
/// length and the swath width centred on the line, counter-clockwise.
inline Ring swath_rectangle(PlanarPoint a, PlanarPoint b, double swath_width) {
  const double len = distance(a, b);
  const double nx = -(b.y - a.y) / len * swath_width / 2.0;
  const double ny = (b.x - a.x) / len * swath_width / 2.0;
  return Ring{{a.x - nx, a.y - ny},
              {b.x - nx, b.y - ny},
              {b.x + nx, b.y + ny},
              {a.x + nx, a.y + ny}};
}

struct FlightPlan {
  std::size_t id = 0;
  std::size_t launch_node = 0;
  std::vector<Transect> transects;
  double total_distance_m = 0.0;
};

class EdgeSet {
 public:
  explicit EdgeSet(std::size_t n_edges = 0) : used_(n_edges, false) {}

  bool contains(std::size_t e) const { return used_.at(e); }
  void insert(std::size_t e) { used_.at(e) = true; }
  void insert(const FlightPlan& f) {
    for (const auto& t : f.transects) insert(t.edge);
  }
  std::size_t size() const {
    std::size_t n = 0;
    for (bool b : used_) n += b ? 1 : 0;
    return n;
  }

 private:
  std::vector<bool> used_;
};

inline Transect make_transect(const GridGraph& grid, std::size_t from,
                              Heading h, double swath_width) {
  const auto& n = grid.node(from);
  Transect t;
  t.edge = n.edge[index_of(h)];
  t.start_node = from;
  t.end_node = n.neighbor[index_of(h)];
  t.start = n.position;
  t.end = grid.node(t.end_node).position;
  t.heading = h;
  t.length_m = grid.spacing();
  t.swath_width_m = swath_width;
  const auto rect = swath_rectangle(t.start, t.end, swath_width);
  t.covered_area_km2 = grid.region().clipped_area_m2(rect) * 1e-6;
  return t;
}

/// Grows one chain of connected transects from `start_node`. Returns nullopt
/// when the start node has no unused incident edge. `usage` holds the
/// design-wide heading counts used to balance directions; the caller owns
/// adding the returned edges to `used`.
inline std::optional<FlightPlan> plan_flight(const GridGraph& grid,
                                             std::size_t start_node,
                                             CounterRng& rng,
                                             const EdgeSet& used,
                                             std::size_t max_transects,
                                             const DirectionCounts& usage = {},
                                             double swath_width = 55.0) {
  if (start_node >= grid.nodes().size()) {
    throw ValidationError("flight start node is not in the grid");
  }
  FlightPlan plan;
  plan.launch_node = start_node;
  DirectionCounts local = usage;
  std::vector<std::size_t> flown;
  std::size_t cur = start_node;

  while (plan.transects.size() < max_transects) {
    // Reversal onto the edge just flown is already excluded here because
    // that edge is in `flown`.
    std::array<double, 4> weight{};
    double total = 0.0;
    for (Heading h : kAllHeadings) {
      const std::size_t e = grid.node(cur).edge[index_of(h)];
      if (e == kNoIndex || used.contains(e)) continue;
      if (std::find(flown.begin(), flown.end(), e) != flown.end()) continue;
      weight[index_of(h)] = 1.0 / (1.0 + static_cast<double>(local[index_of(h)]));
      total += weight[index_of(h)];
    }
    if (total == 0.0) break;

    double u = rng.uniform() * total;
    Heading pick = Heading::north;
    for (Heading h : kAllHeadings) {
      if (weight[index_of(h)] == 0.0) continue;
      pick = h;
      if (u < weight[index_of(h)]) break;
      u -= weight[index_of(h)];
    }

    Transect t = make_transect(grid, cur, pick, swath_width);
    flown.push_back(t.edge);
    ++local[index_of(pick)];
    cur = t.end_node;
    plan.total_distance_m += t.length_m;
    plan.transects.push_back(std::move(t));
  }
  if (plan.transects.empty()) return std::nullopt;
  return plan;
}

struct PlanConfig {
  std::size_t max_transects = 7;
  std::optional<double> target_coverage_fraction;
  std::optional<std::size_t> flights_per_launch;
  double swath_width = 55.0;
  std::optional<double> snap_tolerance;
  double altitude_agl = 60.0;
};

struct SurveyDesign {
  SurveyRegion region;
  GridSpec grid;
  double grid_origin_x = 0.0;
  double grid_origin_y = 0.0;
  std::vector<FlightPlan> flights;
  std::uint64_t seed = 0;
  double swath_width = 55.0;
  double altitude_agl = 60.0;
  std::size_t max_transects = 7;
  std::optional<double> target_coverage_fraction;
  bool target_reached = true;
  std::vector<std::size_t> unmapped_launch_points;
  std::vector<std::string> warnings;

  std::size_t transect_count() const {
    std::size_t n = 0;
    for (const auto& f : flights) n += f.transects.size();
    return n;
  }
};

/// Flown transect as needed by the estimators: id plus covered area.
struct TransectArea {
  std::string id;
  double covered_area_km2 = 0.0;
};

inline std::vector<TransectArea> transect_areas(const SurveyDesign& design) {
  std::vector<TransectArea> out;
  for (const auto& f : design.flights) {
    for (const auto& t : f.transects) out.push_back({t.id, t.covered_area_km2});
  }
  return out;
}

struct Coverage {
  double covered_km2 = 0.0;
  double covered_fraction = 0.0;
  DirectionCounts per_direction{};
};

inline Coverage coverage(const SurveyDesign& design) {
  Coverage c;
  for (const auto& f : design.flights) {
    for (const auto& t : f.transects) {
      c.covered_km2 += t.covered_area_km2;
      ++c.per_direction[index_of(t.heading)];
    }
  }
  c.covered_fraction = c.covered_km2 / design.region.area_km2();
  return c;
}

/// Plans edge-disjoint flights from the launch points. Launch nodes are
/// visited in a freshly shuffled order each round, one flight per node per
/// round, until the coverage target is met, every launch node has flown its
/// quota, or no launch node has an unused edge left. Under a coverage target
/// the last flight is cut short once the target is met.
inline SurveyDesign plan_design(const SurveyRegion& region,
                                const GridSpec& grid_spec,
                                const std::vector<PlanarPoint>& launch_points,
                                std::uint64_t seed, const PlanConfig& config) {
  if (config.max_transects < 1) {
    throw ValidationError("max transects per flight must be >= 1");
  }
  if (!(config.swath_width > 0.0)) {
    throw ValidationError("swath width must be positive");
  }
  if (config.target_coverage_fraction &&
      !(*config.target_coverage_fraction >= 0.0 &&
        *config.target_coverage_fraction <= 1.0)) {
    throw ValidationError("target coverage fraction must lie in [0, 1]");
  }
  if (launch_points.empty()) {
    throw PlanningError("at least one launch point is required");
  }

  const GridGraph grid = build_grid(region, grid_spec);
  const SnapResult snapped =
      snap_launch_points(launch_points, grid, config.snap_tolerance);

  std::vector<std::size_t> launches;
  for (std::size_t n : snapped.nodes) {
    if (std::find(launches.begin(), launches.end(), n) == launches.end()) {
      launches.push_back(n);
    }
  }

  SurveyDesign design;
  design.region = region;
  design.grid = grid_spec;
  design.grid_origin_x = grid.origin().x;
  design.grid_origin_y = grid.origin().y;
  design.seed = seed;
  design.swath_width = config.swath_width;
  design.altitude_agl = config.altitude_agl;
  design.max_transects = config.max_transects;
  design.target_coverage_fraction = config.target_coverage_fraction;
  design.unmapped_launch_points = snapped.unmapped;

  const double region_m2 = region.area_m2();
  const double edge_m2 = grid.spacing() * config.swath_width;
  const bool has_target = config.target_coverage_fraction.has_value();
  const double target_m2 =
      has_target ? *config.target_coverage_fraction * region_m2 : 0.0;
  constexpr double kAreaEps = 1e-6;  // m^2
  if (has_target && target_m2 <= kAreaEps) return design;

  CounterRng rng = CounterRng(seed).substream("plan");
  EdgeSet used(grid.edges().size());
  DirectionCounts usage{};
  std::vector<std::size_t> flown_from(grid.nodes().size(), 0);
  double covered_m2 = 0.0;
  bool reached = false;

  while (!reached) {
    std::vector<std::size_t> order = launches;
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.uniform_index(i)]);
    }
    bool progress = false;
    for (std::size_t node : order) {
      if (config.flights_per_launch &&
          flown_from[node] >= *config.flights_per_launch) {
        continue;
      }
      std::size_t budget = config.max_transects;
      if (has_target) {
        const double missing = target_m2 - covered_m2;
        const auto needed =
            static_cast<std::size_t>(std::ceil(missing / edge_m2 - 1e-9));
        budget = std::min(budget, std::max<std::size_t>(needed, 1));
      }
      auto flight = plan_flight(grid, node, rng, used, budget, usage,
                                config.swath_width);
      if (!flight) continue;
      progress = true;
      ++flown_from[node];
      flight->id = design.flights.size() + 1;
      used.insert(*flight);
      for (auto& t : flight->transects) {
        ++usage[index_of(t.heading)];
        covered_m2 += t.covered_area_km2 * 1e6;
      }
      design.flights.push_back(std::move(*flight));
      if (has_target && covered_m2 >= target_m2 - kAreaEps) {
        reached = true;
        break;
      }
    }
    if (!progress) break;
  }

  std::size_t serial = 0;
  for (auto& f : design.flights) {
    for (auto& t : f.transects) t.id = "T" + std::to_string(++serial);
  }

  if (has_target && !reached) {
    design.target_reached = false;
    design.warnings.push_back(
        "coverage target " + std::to_string(*config.target_coverage_fraction) +
        " unreachable from the given launch points; partial design covers " +
        std::to_string(covered_m2 / region_m2));
  }
  if (!snapped.unmapped.empty()) {
    design.warnings.push_back(std::to_string(snapped.unmapped.size()) +
                              " launch point(s) could not be snapped to the grid");
  }
  return design;
}

}  // namespace wildsurvey
