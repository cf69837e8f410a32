#pragma once

// Planar geometry in a projected frame (meters, x east, y north).

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "wildsurvey/errors.hpp"

namespace wildsurvey {

struct PlanarPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const PlanarPoint&, const PlanarPoint&) = default;
};

inline double distance(PlanarPoint a, PlanarPoint b) noexcept {
  return std::hypot(a.x - b.x, a.y - b.y);
}

struct BoundingBox {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  double width() const noexcept { return max_x - min_x; }
  double height() const noexcept { return max_y - min_y; }
};

/// Open ring: the closing vertex is implicit.
using Ring = std::vector<PlanarPoint>;

namespace geom {

inline constexpr double kOnSegmentTolerance = 1e-7;

inline double cross(PlanarPoint o, PlanarPoint a, PlanarPoint b) noexcept {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline double signed_area(std::span<const PlanarPoint> ring) noexcept {
  double twice = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = ring[i];
    const auto& q = ring[(i + 1) % n];
    twice += p.x * q.y - q.x * p.y;
  }
  return 0.5 * twice;
}

inline double area(std::span<const PlanarPoint> ring) noexcept {
  return std::abs(signed_area(ring));
}

inline BoundingBox bounding_box(std::span<const PlanarPoint> ring) noexcept {
  BoundingBox b{ring[0].x, ring[0].y, ring[0].x, ring[0].y};
  for (const auto& p : ring) {
    b.min_x = std::min(b.min_x, p.x);
    b.min_y = std::min(b.min_y, p.y);
    b.max_x = std::max(b.max_x, p.x);
    b.max_y = std::max(b.max_y, p.y);
  }
  return b;
}

inline bool on_segment(PlanarPoint p, PlanarPoint a, PlanarPoint b,
                       double tol = kOnSegmentTolerance) noexcept {
  const double len = distance(a, b);
  if (len == 0.0) return distance(p, a) <= tol;
  if (std::abs(cross(a, b, p)) / len > tol) return false;
  const double t = ((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) /
                   (len * len);
  return t >= -tol / len && t <= 1.0 + tol / len;
}

inline bool on_ring_boundary(PlanarPoint p,
                             std::span<const PlanarPoint> ring) noexcept {
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (on_segment(p, ring[i], ring[(i + 1) % n])) return true;
  }
  return false;
}

// Even-odd crossing test; points on the boundary are not resolved here.
inline bool strictly_inside_ring(PlanarPoint p,
                                 std::span<const PlanarPoint> ring) noexcept {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto& a = ring[i];
    const auto& b = ring[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_at = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < x_at) inside = !inside;
    }
  }
  return inside;
}

// Closed-set membership: the boundary counts as inside.
inline bool in_ring(PlanarPoint p, std::span<const PlanarPoint> ring) noexcept {
  return on_ring_boundary(p, ring) || strictly_inside_ring(p, ring);
}

// True when the open segments cross at a single interior point of both.
inline bool segments_properly_intersect(PlanarPoint a, PlanarPoint b,
                                        PlanarPoint c, PlanarPoint d) noexcept {
  const double d1 = cross(c, d, a);
  const double d2 = cross(c, d, b);
  const double d3 = cross(a, b, c);
  const double d4 = cross(a, b, d);
  const double scale =
      std::max({distance(a, b), distance(c, d), 1.0}) * kOnSegmentTolerance;
  auto sign = [scale](double v) { return v > scale ? 1 : (v < -scale ? -1 : 0); };
  const int s1 = sign(d1), s2 = sign(d2), s3 = sign(d3), s4 = sign(d4);
  return s1 * s2 < 0 && s3 * s4 < 0;
}

inline bool segments_touch(PlanarPoint a, PlanarPoint b, PlanarPoint c,
                           PlanarPoint d) noexcept {
  return segments_properly_intersect(a, b, c, d) || on_segment(a, c, d) ||
         on_segment(b, c, d) || on_segment(c, a, b) || on_segment(d, a, b);
}

inline bool is_simple(std::span<const PlanarPoint> ring) noexcept {
  const std::size_t n = ring.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = ring[i], b = ring[(i + 1) % n];
    if (distance(a, b) == 0.0) return false;
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_touch(a, b, ring[j], ring[(j + 1) % n])) return false;
    }
  }
  return true;
}

// Sutherland-Hodgman clip of an arbitrary ring against a convex,
// counter-clockwise clip ring. The result may contain degenerate spikes along
// the clip edges but its area is exact.
inline Ring clip_to_convex(std::span<const PlanarPoint> subject,
                           std::span<const PlanarPoint> convex_ccw) {
  Ring output(subject.begin(), subject.end());
  const std::size_t m = convex_ccw.size();
  for (std::size_t e = 0; e < m && !output.empty(); ++e) {
    const auto c0 = convex_ccw[e];
    const auto c1 = convex_ccw[(e + 1) % m];
    Ring input;
    input.swap(output);
    auto inside = [&](PlanarPoint p) { return cross(c0, c1, p) >= 0.0; };
    auto intersect = [&](PlanarPoint p, PlanarPoint q) {
      const double dp = cross(c0, c1, p);
      const double dq = cross(c0, c1, q);
      const double t = dp / (dp - dq);
      return PlanarPoint{p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
    };
    for (std::size_t i = 0; i < input.size(); ++i) {
      const auto cur = input[i];
      const auto prev = input[(i + input.size() - 1) % input.size()];
      const bool cur_in = inside(cur);
      const bool prev_in = inside(prev);
      if (cur_in) {
        if (!prev_in) output.push_back(intersect(prev, cur));
        output.push_back(cur);
      } else if (prev_in) {
        output.push_back(intersect(prev, cur));
      }
    }
  }
  return output;
}

}  // namespace geom

/// A simple polygon with optional holes. Rings are stored open; the outer
/// ring is normalized to counter-clockwise order, holes to clockwise.
class SurveyRegion {
 public:
  SurveyRegion() = default;

  explicit SurveyRegion(Ring boundary, std::vector<Ring> holes = {})
      : boundary_(normalize(std::move(boundary), "boundary")),
        holes_(std::move(holes)) {
    for (std::size_t h = 0; h < holes_.size(); ++h) {
      holes_[h] = normalize(std::move(holes_[h]), "hole " + std::to_string(h));
      std::reverse(holes_[h].begin(), holes_[h].end());
      for (const auto& p : holes_[h]) {
        if (!geom::strictly_inside_ring(p, boundary_) ||
            geom::on_ring_boundary(p, boundary_)) {
          throw ValidationError("region hole " + std::to_string(h) +
                                " is not strictly inside the boundary");
        }
      }
      const auto& hole = holes_[h];
      for (std::size_t i = 0; i < hole.size(); ++i) {
        for (std::size_t j = 0; j < boundary_.size(); ++j) {
          if (geom::segments_touch(hole[i], hole[(i + 1) % hole.size()],
                                   boundary_[j],
                                   boundary_[(j + 1) % boundary_.size()])) {
            throw ValidationError("region hole " + std::to_string(h) +
                                  " crosses the boundary");
          }
        }
      }
    }
    area_m2_ = geom::area(boundary_);
    for (const auto& h : holes_) area_m2_ -= geom::area(h);
    if (!(area_m2_ > 0.0)) throw ValidationError("region area must be positive");
    bbox_ = geom::bounding_box(boundary_);
  }

  static SurveyRegion rectangle(double min_x, double min_y, double width,
                                double height) {
    return SurveyRegion(Ring{{min_x, min_y},
                             {min_x + width, min_y},
                             {min_x + width, min_y + height},
                             {min_x, min_y + height}});
  }

  const Ring& boundary() const noexcept { return boundary_; }
  const std::vector<Ring>& holes() const noexcept { return holes_; }
  double area_m2() const noexcept { return area_m2_; }
  double area_km2() const noexcept { return area_m2_ * 1e-6; }
  const BoundingBox& bbox() const noexcept { return bbox_; }

  bool contains(PlanarPoint p) const noexcept {
    if (p.x < bbox_.min_x - geom::kOnSegmentTolerance ||
        p.x > bbox_.max_x + geom::kOnSegmentTolerance ||
        p.y < bbox_.min_y - geom::kOnSegmentTolerance ||
        p.y > bbox_.max_y + geom::kOnSegmentTolerance) {
      return false;
    }
    if (!geom::in_ring(p, boundary_)) return false;
    for (const auto& h : holes_) {
      if (geom::strictly_inside_ring(p, h) && !geom::on_ring_boundary(p, h)) {
        return false;
      }
    }
    return true;
  }

  // A segment is inside when it never properly crosses a ring edge and a
  // dense set of points along it (endpoints included) lies in the closed
  // region.
  bool contains_segment(PlanarPoint a, PlanarPoint b) const noexcept {
    auto crosses = [&](const Ring& ring) {
      const std::size_t n = ring.size();
      for (std::size_t i = 0; i < n; ++i) {
        if (geom::segments_properly_intersect(a, b, ring[i],
                                              ring[(i + 1) % n])) {
          return true;
        }
      }
      return false;
    };
    if (crosses(boundary_)) return false;
    for (const auto& h : holes_) {
      if (crosses(h)) return false;
    }
    constexpr int kSamples = 22;
    for (int i = 0; i <= kSamples; ++i) {
      const double t = static_cast<double>(i) / kSamples;
      if (!contains({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)})) {
        return false;
      }
    }
    return true;
  }

  // Area of the intersection with a convex counter-clockwise polygon.
  double clipped_area_m2(std::span<const PlanarPoint> convex_ccw) const {
    double a = geom::area(geom::clip_to_convex(boundary_, convex_ccw));
    for (const auto& h : holes_) {
      a -= geom::area(geom::clip_to_convex(h, convex_ccw));
    }
    return std::max(a, 0.0);
  }

 private:
  static Ring normalize(Ring ring, const std::string& what) {
    if (ring.size() >= 2 && ring.front() == ring.back()) ring.pop_back();
    for (const auto& p : ring) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw ValidationError("region " + what + " has a non-finite coordinate");
      }
    }
    if (ring.size() < 3) {
      throw ValidationError("region " + what + " needs at least 3 vertices");
    }
    if (!geom::is_simple(ring)) {
      throw ValidationError("region " + what + " is not a simple polygon");
    }
    if (geom::signed_area(ring) < 0.0) std::reverse(ring.begin(), ring.end());
    return ring;
  }

  Ring boundary_;
  std::vector<Ring> holes_;
  double area_m2_ = 0.0;
  BoundingBox bbox_;
};

}  // namespace wildsurvey
