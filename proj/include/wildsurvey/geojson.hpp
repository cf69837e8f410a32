#pragma once

// GeoJSON input (survey region, launch points) and output (planned design).
// Coordinates are planar meters; lon/lat input is refused.

#include <cmath>
#include <istream>
#include <string>
#include <vector>

#include "json.hpp"
#include "wildsurvey/errors.hpp"
#include "wildsurvey/geoplan.hpp"
#include "wildsurvey/text.hpp"

namespace wildsurvey::geojson {

using nlohmann::json;

namespace detail {

inline Ring parse_ring(const json& coords) {
  if (!coords.is_array()) throw ValidationError("GeoJSON ring is not an array");
  Ring ring;
  for (const auto& c : coords) {
    if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number()) {
      throw ValidationError("GeoJSON position must be [x, y]");
    }
    ring.push_back({c[0].get<double>(), c[1].get<double>()});
  }
  if (ring.size() < 4 || !(ring.front() == ring.back())) {
    throw ValidationError("GeoJSON polygon ring must be closed (first == last)");
  }
  return ring;
}

inline const json* find_geometry(const json& doc, const json** props) {
  const std::string type = doc.value("type", "");
  if (type == "Polygon" || type == "MultiPolygon") return &doc;
  if (type == "Feature") {
    if (doc.contains("properties") && doc["properties"].is_object()) {
      *props = &doc["properties"];
    }
    if (!doc.contains("geometry") || !doc["geometry"].is_object()) return nullptr;
    return find_geometry(doc["geometry"], props);
  }
  if (type == "FeatureCollection" && doc.contains("features")) {
    for (const auto& f : doc["features"]) {
      const json* p = nullptr;
      if (const json* g = find_geometry(f, &p)) {
        if (p) *props = p;
        return g;
      }
    }
  }
  return nullptr;
}

}  // namespace detail

inline SurveyRegion parse_region(const json& doc) {
  const json* props = nullptr;
  const json* geometry = detail::find_geometry(doc, &props);
  if (!geometry) {
    throw ValidationError("region file holds no Polygon or MultiPolygon geometry");
  }
  const bool has_note =
      (props && props->contains("crs_note")) || doc.contains("crs_note");
  if (!has_note) {
    throw ValidationError(
        "region file must carry a 'crs_note' property describing its planar CRS");
  }

  std::vector<Ring> rings;
  if ((*geometry)["type"] == "Polygon") {
    for (const auto& r : (*geometry)["coordinates"]) {
      rings.push_back(detail::parse_ring(r));
    }
  } else {
    const auto& polys = (*geometry)["coordinates"];
    if (!polys.is_array() || polys.size() != 1) {
      throw ValidationError(
          "MultiPolygon regions must contain exactly one polygon");
    }
    for (const auto& r : polys[0]) rings.push_back(detail::parse_ring(r));
  }
  if (rings.empty()) throw ValidationError("polygon has no rings");

  bool looks_geographic = true;
  for (const auto& r : rings) {
    for (const auto& p : r) {
      if (std::abs(p.x) > 180.0 || std::abs(p.y) > 90.0) looks_geographic = false;
    }
  }
  if (looks_geographic) {
    throw ValidationError(
        "projection required: coordinates look like lon/lat; reproject the "
        "region to a planar CRS in meters");
  }

  Ring boundary = std::move(rings.front());
  std::vector<Ring> holes(std::make_move_iterator(rings.begin() + 1),
                          std::make_move_iterator(rings.end()));
  return SurveyRegion(std::move(boundary), std::move(holes));
}

inline SurveyRegion read_region(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("region file is not valid JSON: ") + e.what());
  }
  return parse_region(doc);
}

inline json region_to_geojson(const SurveyRegion& region,
                              const std::string& crs_note) {
  auto ring_json = [](const Ring& r) {
    json out = json::array();
    for (const auto& p : r) out.push_back({p.x, p.y});
    out.push_back({r.front().x, r.front().y});
    return out;
  };
  json coords = json::array({ring_json(region.boundary())});
  for (const auto& h : region.holes()) coords.push_back(ring_json(h));
  return json{{"type", "Feature"},
              {"properties", {{"crs_note", crs_note}}},
              {"geometry", {{"type", "Polygon"}, {"coordinates", coords}}}};
}

/// Launch points from CSV (`x_m,y_m` header) or GeoJSON Point/MultiPoint.
inline std::vector<PlanarPoint> read_launch_points(std::istream& in) {
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  const auto first = data.find_first_not_of(" \t\r\n\xEF\xBB\xBF");
  std::vector<PlanarPoint> out;
  if (first != std::string::npos && data[first] == '{') {
    json doc;
    try {
      doc = json::parse(data);
    } catch (const json::exception& e) {
      throw ValidationError(std::string("launch point file is not valid JSON: ") +
                            e.what());
    }
    auto visit = [&](auto&& self, const json& node) -> void {
      const std::string type = node.value("type", "");
      if (type == "FeatureCollection") {
        for (const auto& f : node["features"]) self(self, f);
      } else if (type == "Feature") {
        self(self, node["geometry"]);
      } else if (type == "Point") {
        out.push_back({node["coordinates"][0].get<double>(),
                       node["coordinates"][1].get<double>()});
      } else if (type == "MultiPoint") {
        for (const auto& c : node["coordinates"]) {
          out.push_back({c[0].get<double>(), c[1].get<double>()});
        }
      }
    };
    visit(visit, doc);
    return out;
  }

  std::istringstream ss(data);
  const auto rows = text::read_csv(ss);
  if (rows.empty()) throw ValidationError("launch point file is empty");
  int ix = -1, iy = -1;
  for (std::size_t c = 0; c < rows[0].fields.size(); ++c) {
    const auto name = text::trim(rows[0].fields[c]);
    if (name == "x_m" || name == "x") ix = static_cast<int>(c);
    if (name == "y_m" || name == "y") iy = static_cast<int>(c);
  }
  if (ix < 0 || iy < 0) {
    throw ValidationError("launch point CSV needs 'x_m' and 'y_m' columns");
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    const auto need = static_cast<std::size_t>(std::max(ix, iy));
    const auto x = f.size() > need ? text::parse_double(f[ix]) : std::nullopt;
    const auto y = f.size() > need ? text::parse_double(f[iy]) : std::nullopt;
    if (!x || !y) {
      throw ValidationError("launch point CSV line " +
                            std::to_string(rows[r].line) + " is malformed");
    }
    out.push_back({*x, *y});
  }
  return out;
}

inline json design_to_geojson(const SurveyDesign& design) {
  json features = json::array();
  for (const auto& f : design.flights) {
    for (std::size_t k = 0; k < f.transects.size(); ++k) {
      const auto& t = f.transects[k];
      features.push_back(
          {{"type", "Feature"},
           {"geometry",
            {{"type", "LineString"},
             {"coordinates", {{t.start.x, t.start.y}, {t.end.x, t.end.y}}}}},
           {"properties",
            {{"transect_id", t.id},
             {"flight_id", f.id},
             {"order_in_flight", k + 1},
             {"heading", to_string(t.heading)},
             {"length_m", t.length_m},
             {"swath_width_m", t.swath_width_m},
             {"covered_area_km2", t.covered_area_km2}}}});
    }
  }
  return json{{"type", "FeatureCollection"},
              {"crs_note", "planar coordinates in meters"},
              {"features", features}};
}

inline json design_summary(const SurveyDesign& design) {
  const Coverage c = coverage(design);
  json per_dir;
  for (Heading h : kAllHeadings) per_dir[to_string(h)] = c.per_direction[index_of(h)];
  json summary{
      {"seed", design.seed},
      {"region_area_km2", design.region.area_km2()},
      {"grid_spacing_m", design.grid.spacing},
      {"grid_origin", {design.grid_origin_x, design.grid_origin_y}},
      {"swath_width_m", design.swath_width},
      {"altitude_agl_m", design.altitude_agl},
      {"max_transects_per_flight", design.max_transects},
      {"n_flights", design.flights.size()},
      {"n_transects", design.transect_count()},
      {"covered_km2", c.covered_km2},
      {"covered_fraction", c.covered_fraction},
      {"per_direction_counts", per_dir},
      {"target_reached", design.target_reached},
      {"warnings", design.warnings},
  };
  summary["target_coverage_fraction"] =
      design.target_coverage_fraction ? json(*design.target_coverage_fraction)
                                      : json(nullptr);
  return summary;
}

inline std::vector<TransectArea> read_design_transects(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("design file is not valid JSON: ") + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features")) {
    throw ValidationError("design file must be a GeoJSON FeatureCollection");
  }
  std::vector<TransectArea> out;
  for (const auto& f : doc["features"]) {
    const auto& p = f.at("properties");
    if (!p.contains("transect_id") || !p.contains("covered_area_km2")) {
      throw ValidationError(
          "design feature lacks 'transect_id' or 'covered_area_km2'");
    }
    out.push_back({p["transect_id"].get<std::string>(),
                   p["covered_area_km2"].get<double>()});
  }
  return out;
}

}  // namespace wildsurvey::geojson
