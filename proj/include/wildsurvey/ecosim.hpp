#pragma once

// Known-truth simulator: synthetic populations, drone transect surveys over
// a planned design, and camera-trap encounters from random-walking animals.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "wildsurvey/data_io.hpp"
#include "wildsurvey/errors.hpp"
#include "wildsurvey/estimate.hpp"
#include "wildsurvey/estimators.hpp"
#include "wildsurvey/geometry.hpp"
#include "wildsurvey/geoplan.hpp"
#include "wildsurvey/rem.hpp"
#include "wildsurvey/rng.hpp"
#include "wildsurvey/zinb.hpp"

namespace wildsurvey {

enum class PlacementKind { poisson, thomas };

struct Placement {
  PlacementKind kind = PlacementKind::poisson;
  double mean_cluster_size = 3.0;  // thomas only
  double cluster_sd_m = 50.0;      // thomas only
};

struct SimWorld {
  SurveyRegion region;
  double true_density_per_km2 = 0.0;
  Placement placement;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(true_density_per_km2 > 0.0) || !std::isfinite(true_density_per_km2)) {
      throw ValidationError("simulation: true density must be > 0");
    }
    if (placement.kind == PlacementKind::thomas &&
        !(placement.mean_cluster_size > 0.0 && placement.cluster_sd_m > 0.0)) {
      throw ValidationError("simulation: Thomas cluster size and spread must be > 0");
    }
  }
};

inline PlanarPoint uniform_point(const SurveyRegion& region, CounterRng& rng) {
  const auto& b = region.bbox();
  for (;;) {
    const PlanarPoint p{rng.uniform(b.min_x, b.max_x), rng.uniform(b.min_y, b.max_y)};
    if (region.contains(p)) return p;
  }
}

/// Animal positions. Poisson: N ~ Poisson(D * area), uniform in the region.
/// Thomas: parents at intensity D / m over the bounding box grown by 4 sd,
/// Poisson(m) offspring per parent scattered N(0, sd^2), offspring outside
/// the region discarded, so the realized intensity inside is D.
inline std::vector<PlanarPoint> generate_population(const SimWorld& world, CounterRng& rng) {
  world.validate();
  std::vector<PlanarPoint> out;
  if (world.placement.kind == PlacementKind::poisson) {
    const auto n = rng.poisson(world.true_density_per_km2 * world.region.area_km2());
    out.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) out.push_back(uniform_point(world.region, rng));
    return out;
  }
  const auto& pl = world.placement;
  const auto& b = world.region.bbox();
  const double pad = 4.0 * pl.cluster_sd_m;
  const double w = b.width() + 2 * pad, h = b.height() + 2 * pad;
  const double parent_rate = world.true_density_per_km2 / pl.mean_cluster_size;
  const auto parents = rng.poisson(parent_rate * w * h * 1e-6);
  for (std::uint64_t i = 0; i < parents; ++i) {
    const PlanarPoint c{b.min_x - pad + rng.uniform() * w, b.min_y - pad + rng.uniform() * h};
    const auto kids = rng.poisson(pl.mean_cluster_size);
    for (std::uint64_t j = 0; j < kids; ++j) {
      const PlanarPoint p{rng.normal(c.x, pl.cluster_sd_m), rng.normal(c.y, pl.cluster_sd_m)};
      if (world.region.contains(p)) out.push_back(p);
    }
  }
  return out;
}

inline std::vector<PlanarPoint> generate_population(const SimWorld& world) {
  CounterRng rng = CounterRng(world.seed).substream("population");
  return generate_population(world, rng);
}

struct MovementModel {
  double speed_km_per_day = 1.0;
  double mean_turn_minutes = 60.0;
  double step_minutes = 1.0;

  void validate() const {
    if (!(speed_km_per_day >= 0.0) || !std::isfinite(speed_km_per_day)) {
      throw ValidationError("movement: speed must be >= 0");
    }
    if (!(mean_turn_minutes > 0.0)) throw ValidationError("movement: mean turn time must be > 0");
    if (!(step_minutes > 0.0)) throw ValidationError("movement: time step must be > 0");
  }
  double step_length_m() const { return speed_km_per_day * 1000.0 * step_minutes / 1440.0; }
};

struct Animal {
  PlanarPoint position;
  double heading = 0.0;       // radians, counter-clockwise from east
  double turn_in_min = 0.0;   // time left on the current straight leg
};

/// Advances animals by one time step with a reflecting region boundary.
class Walker {
 public:
  Walker(const SurveyRegion& region, const MovementModel& movement, bool check_boundary = false)
      : region_(region), movement_(movement), check_(check_boundary) {
    movement_.validate();
    step_ = movement_.step_length_m();
  }

  Animal spawn(PlanarPoint p, CounterRng& rng) const {
    return {p, rng.uniform(0.0, 2.0 * std::numbers::pi), rng.exponential(movement_.mean_turn_minutes)};
  }

  void step(Animal& a, CounterRng& rng) const {
    a.turn_in_min -= movement_.step_minutes;
    while (a.turn_in_min <= 0.0) {
      a.heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
      a.turn_in_min += rng.exponential(movement_.mean_turn_minutes);
    }
    if (step_ == 0.0) return;
    const PlanarPoint from = a.position;
    const PlanarPoint to{from.x + step_ * std::cos(a.heading), from.y + step_ * std::sin(a.heading)};
    if (region_.contains(to)) {
      a.position = to;
    } else {
      reflect(a, from, to);
    }
    if (check_ && !region_.contains(a.position)) {
      throw NumericError("simulation: an animal left the region");
    }
  }

 private:
  // Mirrors the overshoot across the first boundary edge crossed; if the
  // mirrored point is still outside, the animal stays and turns around.
  void reflect(Animal& a, PlanarPoint from, PlanarPoint to) const {
    double best_t = 2.0;
    PlanarPoint ea{}, eb{};
    auto scan = [&](const Ring& ring) {
      const std::size_t n = ring.size();
      for (std::size_t i = 0; i < n; ++i) {
        const PlanarPoint p = ring[i], q = ring[(i + 1) % n];
        const double rx = to.x - from.x, ry = to.y - from.y;
        const double sx = q.x - p.x, sy = q.y - p.y;
        const double den = rx * sy - ry * sx;
        if (den == 0.0) continue;
        const double t = ((p.x - from.x) * sy - (p.y - from.y) * sx) / den;
        const double u = ((p.x - from.x) * ry - (p.y - from.y) * rx) / den;
        if (t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0 && t < best_t) {
          best_t = t;
          ea = p;
          eb = q;
        }
      }
    };
    scan(region_.boundary());
    for (const auto& h : region_.holes()) scan(h);
    if (best_t <= 1.0) {
      const double ex = eb.x - ea.x, ey = eb.y - ea.y;
      const double len = std::hypot(ex, ey);
      const double nx = -ey / len, ny = ex / len;
      const double d = (to.x - ea.x) * nx + (to.y - ea.y) * ny;
      const PlanarPoint mirrored{to.x - 2 * d * nx, to.y - 2 * d * ny};
      const double hx = std::cos(a.heading), hy = std::sin(a.heading);
      const double hd = hx * nx + hy * ny;
      if (region_.contains(mirrored)) {
        a.position = mirrored;
        a.heading = std::atan2(hy - 2 * hd * ny, hx - 2 * hd * nx);
        return;
      }
    }
    a.heading += std::numbers::pi;
  }

  const SurveyRegion& region_;
  MovementModel movement_;
  bool check_;
  double step_ = 0.0;
};

// How an animal inside several swaths (corner squares of perpendicular
// transects sharing a node) is counted.
enum class SwathOverlap {
  first_transect,  // once, on the earliest-flown transect
  every_transect,  // once per swath containing it
};

struct DetectionModel {
  double drone_detection_prob = 1.0;
  SwathOverlap overlap = SwathOverlap::first_transect;
  std::optional<MovementModel> drone_movement;  // animals move while the drone flies
  double drone_speed_m_s = 5.0;
  Timestamp survey_start = *text::parse_timestamp("2024-10-26T07:00:00Z");
  std::string species = "roe_deer";

  void validate() const {
    if (!(drone_detection_prob >= 0.0 && drone_detection_prob <= 1.0)) {
      throw ValidationError("detection probability must lie in [0, 1]");
    }
    if (!(drone_speed_m_s > 0.0)) throw ValidationError("drone speed must be > 0");
  }
};

struct DroneSurveyResult {
  std::vector<TransectCount> counts;
  std::vector<SightingRecord> sightings;
};

/// Area covered by the union of the swaths, clipped to the region. Swaths
/// overlap only in the corner squares of perpendicular transects sharing a
/// node (swath < spacing), so pairwise inclusion-exclusion is exact.
inline double union_covered_area_km2(const SurveyDesign& design) {
  std::vector<Ring> rects;
  double total = 0.0;
  for (const auto& f : design.flights) {
    for (const auto& t : f.transects) {
      rects.push_back(swath_rectangle(t.start, t.end, t.swath_width_m));
      total += t.covered_area_km2;
    }
  }
  for (std::size_t i = 0; i < rects.size(); ++i) {
    const auto bi = geom::bounding_box(rects[i]);
    for (std::size_t j = i + 1; j < rects.size(); ++j) {
      const auto bj = geom::bounding_box(rects[j]);
      if (bi.max_x <= bj.min_x || bj.max_x <= bi.min_x || bi.max_y <= bj.min_y || bj.max_y <= bi.min_y) {
        continue;
      }
      const Ring both = geom::clip_to_convex(rects[i], rects[j]);
      if (both.size() >= 3 && geom::area(both) > 0.0) {
        total -= design.region.clipped_area_m2(both) * 1e-6;
      }
    }
  }
  return total;
}

namespace sim_detail {

inline bool same_region(const SurveyRegion& a, const SurveyRegion& b) {
  return a.boundary() == b.boundary() && a.holes() == b.holes();
}

}  // namespace sim_detail

/// Counts animals inside transect swaths. An animal inside several swaths is
/// counted on the earliest-flown one unless `overlap` is every_transect; each
/// detection is kept with the drone detection probability. With drone_movement set, animals walk while
/// the flights proceed and may be counted again on later transects.
inline DroneSurveyResult simulate_drone_survey(const SimWorld& world, const SurveyDesign& design,
                                               const std::vector<PlanarPoint>& population,
                                               const DetectionModel& detection, CounterRng& rng) {
  detection.validate();
  if (!sim_detail::same_region(world.region, design.region)) {
    throw ValidationError("simulation: the design was planned for a different region");
  }
  struct Swath {
    const Transect* t;
    std::size_t index;
    Ring rect;
    BoundingBox box;
    double minutes;  // flight clock at the transect midpoint
  };
  std::vector<Swath> swaths;
  DroneSurveyResult out;
  double clock_min = 0.0;
  for (const auto& f : design.flights) {
    for (const auto& t : f.transects) {
      Swath s{&t, swaths.size(), swath_rectangle(t.start, t.end, t.swath_width_m), {}, 0.0};
      s.box = geom::bounding_box(s.rect);
      s.minutes = clock_min + t.length_m / 2.0 / detection.drone_speed_m_s / 60.0;
      clock_min += t.length_m / detection.drone_speed_m_s / 60.0;
      swaths.push_back(std::move(s));
      out.counts.push_back({t.id, 0, t.covered_area_km2});
    }
  }
  auto inside = [](const Swath& s, PlanarPoint p) {
    return p.x >= s.box.min_x && p.x <= s.box.max_x && p.y >= s.box.min_y && p.y <= s.box.max_y &&
           geom::in_ring(p, s.rect);
  };
  auto record = [&](const Swath& s, PlanarPoint p, CounterRng& r) {
    if (!r.bernoulli(detection.drone_detection_prob)) return;
    ++out.counts[s.index].animal_count;
    const auto at = detection.survey_start +
                    std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(s.minutes * 60000.0)));
    out.sightings.push_back({s.t->id, detection.species, 1, p.x, p.y, at, "sim"});
  };

  if (!detection.drone_movement) {
    for (const auto& p : population) {
      for (const auto& s : swaths) {
        if (inside(s, p)) {
          record(s, p, rng);
          if (detection.overlap == SwathOverlap::first_transect) break;
        }
      }
    }
  } else {
    const Walker walker(world.region, *detection.drone_movement);
    const double dt = detection.drone_movement->step_minutes;
    for (std::size_t i = 0; i < population.size(); ++i) {
      CounterRng ar = rng.substream(static_cast<std::uint64_t>(i));
      Animal a = walker.spawn(population[i], ar);
      double now = 0.0;
      for (const auto& s : swaths) {
        while (now + dt <= s.minutes) {
          walker.step(a, ar);
          now += dt;
        }
        if (inside(s, a.position)) record(s, a.position, ar);
      }
    }
  }
  std::stable_sort(out.sightings.begin(), out.sightings.end(),
                   [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  return out;
}

/// Camera-trap encounters. Headings change only at step boundaries, so each
/// step is a straight segment; a segment that cuts through a sector without
/// ending inside it still yields a (zero-length) encounter. Every deployment
/// must use a detection radius of at least twice the per-step movement.
/// Animals present in a sector when its camera becomes active open a sequence.
inline std::vector<EncounterSequence> simulate_ct(const SimWorld& world,
                                                  const std::vector<CtDeployment>& deployments,
                                                  const std::vector<PlanarPoint>& population,
                                                  const MovementModel& movement, double duration_days,
                                                  CounterRng& rng, bool check_boundary = false) {
  movement.validate();
  if (deployments.empty()) throw ValidationError("simulation: no camera deployments");
  if (!(duration_days > 0.0)) throw ValidationError("simulation: duration must be > 0 days");
  double min_r = INFINITY;
  std::vector<std::string> problems;
  for (const auto& d : deployments) {
    min_r = std::min(min_r, d.detection_radius_m);
    if (!(d.detection_radius_m > 0.0)) problems.push_back(d.camera_id + ": detection radius must be > 0");
    if (!(d.detection_angle_rad > 0.0 && d.detection_angle_rad <= 2 * std::numbers::pi)) {
      problems.push_back(d.camera_id + ": detection angle must lie in (0, 2*pi]");
    }
    if (!world.region.contains(d.position)) problems.push_back(d.camera_id + ": outside the region");
  }
  if (!problems.empty()) throw ValidationError("simulation: invalid deployments", problems);
  if (movement.step_length_m() > min_r / 2.0) {
    throw ValidationError("simulation: time step too coarse, an animal moves " +
                          text::format_fixed(movement.step_length_m(), 3) +
                          " m per step but the detection radius is " + text::format_double(min_r) +
                          " m; use step_minutes <= " +
                          text::format_double(min_r / 2.0 / (movement.speed_km_per_day * 1000.0 / 1440.0)));
  }

  using std::chrono::milliseconds;
  const Timestamp t0 = std::min_element(deployments.begin(), deployments.end(), [](const auto& a, const auto& b) {
                         return a.active_start < b.active_start;
                       })->active_start;
  const auto dt_ms = static_cast<std::int64_t>(std::llround(movement.step_minutes * 60000.0));
  const auto steps = static_cast<std::int64_t>(std::ceil(duration_days * 1440.0 / movement.step_minutes - 1e-9));

  // Cameras registered in every grid cell their detection disc touches.
  const double cell = 2.0 * std::max_element(deployments.begin(), deployments.end(), [](const auto& a, const auto& b) {
                              return a.detection_radius_m < b.detection_radius_m;
                            })->detection_radius_m;
  auto cell_key = [&](double x, double y) {
    const auto ix = static_cast<std::int64_t>(std::floor(x / cell));
    const auto iy = static_cast<std::int64_t>(std::floor(y / cell));
    return (static_cast<std::uint64_t>(ix) << 32) ^ static_cast<std::uint64_t>(iy & 0xFFFFFFFF);
  };
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells;
  for (std::uint32_t c = 0; c < deployments.size(); ++c) {
    const auto& d = deployments[c];
    const double r = d.detection_radius_m;
    for (double x = std::floor((d.position.x - r) / cell) * cell; x <= d.position.x + r; x += cell) {
      for (double y = std::floor((d.position.y - r) / cell) * cell; y <= d.position.y + r; y += cell) {
        cells[cell_key(x + cell / 2, y + cell / 2)].push_back(c);
      }
    }
  }
  auto in_sector = [&](const CtDeployment& d, PlanarPoint p) {
    const double dx = p.x - d.position.x, dy = p.y - d.position.y;
    if (dx * dx + dy * dy > d.detection_radius_m * d.detection_radius_m) return false;
    if (dx == 0.0 && dy == 0.0) return true;
    const double off = std::remainder(std::atan2(dy, dx) - d.azimuth_rad, 2.0 * std::numbers::pi);
    return std::abs(off) <= d.detection_angle_rad / 2.0;
  };
  // Both endpoints lie outside the sector, so the segment meets it iff it
  // crosses one of the two radii or the arc.
  auto crosses_sector = [&](const CtDeployment& d, PlanarPoint a, PlanarPoint b) {
    const PlanarPoint c = d.position;
    const double r = d.detection_radius_m, half = d.detection_angle_rad / 2.0;
    if (half < std::numbers::pi) {
      for (double side : {-half, half}) {
        const PlanarPoint tip{c.x + r * std::cos(d.azimuth_rad + side), c.y + r * std::sin(d.azimuth_rad + side)};
        if (geom::segments_touch(a, b, c, tip)) return true;
      }
    }
    const double ux = b.x - a.x, uy = b.y - a.y, wx = a.x - c.x, wy = a.y - c.y;
    const double qa = ux * ux + uy * uy, qb = 2.0 * (ux * wx + uy * wy), qc = wx * wx + wy * wy - r * r;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (!(qa > 0.0) || disc < 0.0) return false;
    for (double sgn : {-1.0, 1.0}) {
      const double u = (-qb + sgn * std::sqrt(disc)) / (2.0 * qa);
      if (u < 0.0 || u > 1.0) continue;
      const double off = std::remainder(std::atan2(wy + u * uy, wx + u * ux) - d.azimuth_rad, 2.0 * std::numbers::pi);
      if (std::abs(off) <= half) return true;
    }
    return false;
  };

  struct CameraState {
    int occupants = 0;
    int max_occupants = 0;
    Timestamp open{};
  };
  std::vector<CameraState> cams(deployments.size());
  std::vector<EncounterSequence> out;
  auto enter = [&](std::uint32_t c, Timestamp t) {
    auto& s = cams[c];
    if (s.occupants++ == 0) {
      s.open = t;
      s.max_occupants = 0;
    }
    s.max_occupants = std::max(s.max_occupants, s.occupants);
  };
  auto leave = [&](std::uint32_t c, Timestamp t) {
    auto& s = cams[c];
    if (--s.occupants == 0) {
      out.push_back({deployments[c].camera_id, s.open, std::min(t, deployments[c].active_end), s.max_occupants});
    }
  };

  const Walker walker(world.region, movement, check_boundary);
  std::vector<Animal> animals;
  animals.reserve(population.size());
  for (const auto& p : population) animals.push_back(walker.spawn(p, rng));
  std::vector<std::vector<std::uint32_t>> seen(animals.size());
  std::vector<std::uint32_t> now_in, passed;

  for (std::int64_t s = 0; s <= steps; ++s) {
    const Timestamp t = t0 + milliseconds(s * dt_ms);
    for (std::size_t i = 0; i < animals.size(); ++i) {
      const PlanarPoint q = animals[i].position;
      if (s > 0) walker.step(animals[i], rng);
      const PlanarPoint p = animals[i].position;
      now_in.clear();
      if (auto it = cells.find(cell_key(p.x, p.y)); it != cells.end()) {
        for (auto c : it->second) {
          const auto& d = deployments[c];
          if (t >= d.active_start && t < d.active_end && in_sector(d, p)) now_in.push_back(c);
        }
      }
      auto& prev = seen[i];
      passed.clear();
      if (s > 0) {
        // A step is shorter than a cell, so the 2 x 2 cells around q and p hold every candidate.
        for (auto key : {cell_key(q.x, q.y), cell_key(p.x, p.y), cell_key(q.x, p.y), cell_key(p.x, q.y)}) {
          auto it = cells.find(key);
          if (it == cells.end()) continue;
          for (auto c : it->second) {
            const auto& d = deployments[c];
            if (!(t >= d.active_start && t < d.active_end)) continue;
            if (std::find(prev.begin(), prev.end(), c) != prev.end()) continue;
            if (std::find(now_in.begin(), now_in.end(), c) != now_in.end()) continue;
            if (std::find(passed.begin(), passed.end(), c) != passed.end()) continue;
            if (crosses_sector(d, q, p)) passed.push_back(c);
          }
        }
      }
      if (prev.empty() && now_in.empty() && passed.empty()) continue;
      for (auto c : prev) {
        if (std::find(now_in.begin(), now_in.end(), c) == now_in.end()) leave(c, t);
      }
      for (auto c : now_in) {
        if (std::find(prev.begin(), prev.end(), c) == prev.end()) enter(c, t);
      }
      for (auto c : passed) {
        enter(c, t);
        leave(c, t);
      }
      prev = now_in;
    }
  }
  const Timestamp t_end = t0 + milliseconds(steps * dt_ms);
  for (std::uint32_t c = 0; c < cams.size(); ++c) {
    if (cams[c].occupants > 0) {
      cams[c].occupants = 1;
      leave(c, std::max(t_end, cams[c].open + milliseconds(dt_ms)));
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.start != b.start ? a.start < b.start : a.camera_id < b.camera_id;
  });
  return out;
}

/// Cameras on a square lattice inside the region, all active over the same
/// interval. Points closer than `margin_m` to the region edge are skipped.
inline std::vector<CtDeployment> lattice_deployments(const SurveyRegion& region, std::size_t n_cameras,
                                                     double spacing_m, double margin_m, Timestamp start,
                                                     double days, double radius_m, double angle_rad) {
  std::vector<CtDeployment> out;
  const auto& b = region.bbox();
  const auto end = start + std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(days * 86400000.0)));
  for (double y = b.min_y + spacing_m / 2; y < b.max_y && out.size() < n_cameras; y += spacing_m) {
    for (double x = b.min_x + spacing_m / 2; x < b.max_x && out.size() < n_cameras; x += spacing_m) {
      const PlanarPoint p{x, y};
      const Ring box{{x - margin_m, y - margin_m}, {x + margin_m, y - margin_m},
                     {x + margin_m, y + margin_m}, {x - margin_m, y + margin_m}};
      if (std::abs(region.clipped_area_m2(box) - 4 * margin_m * margin_m) > 1e-6) continue;
      CtDeployment d;
      d.camera_id = "CT" + std::to_string(out.size() + 1);
      d.position = p;
      d.active_start = start;
      d.active_end = end;
      d.detection_radius_m = radius_m;
      d.detection_angle_rad = angle_rad;
      d.mount_height_m = 0.5;
      out.push_back(d);
    }
  }
  if (out.size() < n_cameras) {
    throw ValidationError("simulation: region fits only " + std::to_string(out.size()) + " of " +
                          std::to_string(n_cameras) + " cameras at " + text::format_double(spacing_m) +
                          " m spacing");
  }
  return out;
}

/// nx x ny launch points at the cell centres of the region's bounding box.
inline std::vector<PlanarPoint> launch_point_lattice(const SurveyRegion& region, int nx, int ny) {
  if (nx < 1 || ny < 1) throw ValidationError("launch lattice needs at least one point per axis");
  std::vector<PlanarPoint> pts;
  const auto& b = region.bbox();
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      pts.push_back({b.min_x + b.width() * (i + 0.5) / nx, b.min_y + b.height() * (j + 0.5) / ny});
    }
  }
  return pts;
}

struct DroneSurveySpec {
  SurveyDesign design;
  DetectionModel detection;
};

struct CtSurveySpec {
  std::vector<CtDeployment> deployments;
  MovementModel movement;
  double duration_days = 30.0;
  RemParams rem;
};

struct RecoverySpec {
  SimWorld world;
  std::vector<Method> estimators;
  std::optional<DroneSurveySpec> drone;
  std::optional<CtSurveySpec> ct;
  std::size_t replicates = 1;
  BootstrapConfig bootstrap;
  ZinbOptions zinb;
  unsigned threads = 1;
  bool check_boundary = false;

  void validate() const {
    world.validate();
    if (replicates < 1) throw ValidationError("simulation: replicates must be >= 1");
    if (estimators.empty()) throw ValidationError("simulation: no estimators requested");
    for (Method m : estimators) {
      if (m == Method::rem && !ct) throw ValidationError("simulation: rem needs a camera-trap survey");
      if (m != Method::rem && !drone) {
        throw ValidationError(std::string("simulation: ") + to_string(m) + " needs a drone survey");
      }
    }
  }
};

struct ReplicateData {
  std::size_t n_animals = 0;
  std::optional<DroneSurveyResult> drone;
  std::vector<EncounterSequence> sequences;
};

struct ReplicateOutcome {
  ReplicateData data;
  std::vector<std::optional<DensityEstimate>> estimates;  // per spec.estimators
  std::vector<std::string> errors;                        // per spec.estimators, empty if ok
};

/// Replicate r draws everything from CounterRng(seed).substream("replicate")
/// .substream(r), so replicates are independent of each other and of the
/// thread count.
inline ReplicateData simulate_replicate(const RecoverySpec& spec, std::size_t r) {
  const CounterRng rep = CounterRng(spec.world.seed).substream("replicate").substream(static_cast<std::uint64_t>(r));
  CounterRng pop_rng = rep.substream("population");
  const auto population = generate_population(spec.world, pop_rng);
  ReplicateData d;
  d.n_animals = population.size();
  if (spec.drone) {
    CounterRng rng = rep.substream("drone");
    d.drone = simulate_drone_survey(spec.world, spec.drone->design, population, spec.drone->detection, rng);
  }
  if (spec.ct) {
    CounterRng rng = rep.substream("ct");
    d.sequences = simulate_ct(spec.world, spec.ct->deployments, population, spec.ct->movement,
                              spec.ct->duration_days, rng, spec.check_boundary);
  }
  return d;
}

inline ReplicateOutcome run_replicate(const RecoverySpec& spec, std::size_t r) {
  ReplicateOutcome o;
  o.data = simulate_replicate(spec, r);
  const CounterRng rep = CounterRng(spec.world.seed).substream("replicate").substream(static_cast<std::uint64_t>(r));
  for (Method m : spec.estimators) {
    try {
      switch (m) {
        case Method::naive:
          o.estimates.emplace_back(naive_density(o.data.drone->counts));
          break;
        case Method::bootstrap: {
          auto cfg = spec.bootstrap;
          cfg.seed = rep.substream("bootstrap").key();
          o.estimates.emplace_back(bootstrap_density(o.data.drone->counts, cfg));
          break;
        }
        case Method::zinb: {
          auto opt = spec.zinb;
          opt.seed = rep.substream("zinb").key();
          const auto& c = o.data.drone->counts;
          o.estimates.emplace_back(zinb_density(fit_zinb(c, opt), c));
          break;
        }
        case Method::rem: {
          EncounterData data{spec.ct->deployments, o.data.sequences};
          o.estimates.emplace_back(rem_density(rem_input(data, spec.ct->rem)));
          break;
        }
      }
      o.errors.emplace_back();
    } catch (const Error& e) {
      o.estimates.emplace_back(std::nullopt);
      o.errors.emplace_back(e.what());
    }
  }
  return o;
}

struct MethodRecovery {
  Method method = Method::naive;
  std::size_t n_ok = 0;
  std::vector<std::string> errors;  // "replicate i: message"
  double mean_estimate = 0.0;
  double relative_bias = 0.0;
  std::optional<double> coverage;  // CI coverage of the true density
  std::vector<std::optional<double>> estimates;
};

struct RecoveryReport {
  double true_density = 0.0;
  std::size_t replicates = 0;
  double mean_animals = 0.0;
  std::optional<double> mean_drone_count;
  std::optional<double> mean_encounters;
  std::vector<MethodRecovery> methods;
  ReplicateData first;  // raw data of replicate 0
};

inline RecoveryReport recovery_experiment(const RecoverySpec& spec) {
  spec.validate();
  std::vector<ReplicateOutcome> outcomes(spec.replicates);
  const unsigned threads = std::max(1u, std::min<unsigned>(spec.threads, static_cast<unsigned>(spec.replicates)));
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t r = begin; r < spec.replicates; r += stride) outcomes[r] = run_replicate(spec, r);
  };
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> failures(threads);
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          work(t, threads);
        } catch (...) {
          failures[t] = std::current_exception();
        }
      });
    }
    pool.clear();
    for (auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }
  }

  RecoveryReport rep;
  rep.true_density = spec.world.true_density_per_km2;
  rep.replicates = spec.replicates;
  const double n = static_cast<double>(spec.replicates);
  double drone_total = 0.0, enc_total = 0.0;
  for (const auto& o : outcomes) {
    rep.mean_animals += static_cast<double>(o.data.n_animals) / n;
    if (o.data.drone) {
      for (const auto& c : o.data.drone->counts) drone_total += static_cast<double>(c.animal_count);
    }
    enc_total += static_cast<double>(o.data.sequences.size());
  }
  if (spec.drone) rep.mean_drone_count = drone_total / n;
  if (spec.ct) rep.mean_encounters = enc_total / n;

  for (std::size_t m = 0; m < spec.estimators.size(); ++m) {
    MethodRecovery mr;
    mr.method = spec.estimators[m];
    double sum = 0.0;
    std::size_t with_ci = 0, covered = 0;
    for (std::size_t r = 0; r < outcomes.size(); ++r) {
      const auto& e = outcomes[r].estimates[m];
      if (!e) {
        mr.errors.push_back("replicate " + std::to_string(r) + ": " + outcomes[r].errors[m]);
        mr.estimates.emplace_back(std::nullopt);
        continue;
      }
      ++mr.n_ok;
      sum += e->density_per_km2;
      mr.estimates.emplace_back(e->density_per_km2);
      if (e->has_ci()) {
        ++with_ci;
        if (*e->ci_low <= rep.true_density && rep.true_density <= *e->ci_high) ++covered;
      }
    }
    if (mr.n_ok > 0) {
      mr.mean_estimate = sum / static_cast<double>(mr.n_ok);
      mr.relative_bias = (mr.mean_estimate - rep.true_density) / rep.true_density;
    } else {
      mr.mean_estimate = NAN;
      mr.relative_bias = NAN;
    }
    if (spec.replicates > 1 && with_ci > 0) {
      mr.coverage = static_cast<double>(covered) / static_cast<double>(with_ci);
    }
    rep.methods.push_back(std::move(mr));
  }
  rep.first = std::move(outcomes.front().data);
  return rep;
}

inline nlohmann::json to_json(const RecoveryReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& m : r.methods) {
    nlohmann::json est = nlohmann::json::array();
    for (const auto& e : m.estimates) est.push_back(e ? nlohmann::json(*e) : nlohmann::json(nullptr));
    methods.push_back({{"method", to_string(m.method)},
                       {"n_ok", m.n_ok},
                       {"n_failed", m.errors.size()},
                       {"errors", m.errors},
                       {"mean_estimate", num(m.mean_estimate)},
                       {"relative_bias", num(m.relative_bias)},
                       {"coverage", m.coverage ? nlohmann::json(*m.coverage) : nlohmann::json("n/a")},
                       {"estimates", est}});
  }
  nlohmann::json j{{"true_density_per_km2", r.true_density},
                   {"replicates", r.replicates},
                   {"mean_animals", r.mean_animals},
                   {"methods", methods}};
  if (r.mean_drone_count) j["mean_drone_count"] = *r.mean_drone_count;
  if (r.mean_encounters) j["mean_encounters"] = *r.mean_encounters;
  return j;
}

}  // namespace wildsurvey
