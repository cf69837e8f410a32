#pragma once

// Field data: drone sightings per transect and camera-trap deployments and
// encounter sequences.
//
//   sightings.csv    transect_id,species,count,x_m,y_m,timestamp,observer
//   deployments.csv  camera_id,x_m,y_m,start,end,detection_radius_m,
//                    detection_angle_rad,mount_height_m
//   sequences.csv    camera_id,start,end,group_size
//
// Comma separated, UTF-8, header row mandatory, RFC 4180 quoting, timestamps
// as ISO-8601 UTC (`2024-10-26T09:15:00Z`). Columns are located by header
// name, so their order is free on input; output always uses the order above.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "wildsurvey/errors.hpp"
#include "wildsurvey/geometry.hpp"
#include "wildsurvey/geoplan.hpp"
#include "wildsurvey/text.hpp"

namespace wildsurvey {

struct SightingRecord {
  std::string transect_id;
  std::string species;
  std::int64_t count = 1;
  double x_m = 0.0;
  double y_m = 0.0;
  Timestamp timestamp{};
  std::string observer;

  friend bool operator==(const SightingRecord&, const SightingRecord&) = default;
};

struct TransectCount {
  std::string transect_id;
  std::int64_t animal_count = 0;
  double covered_area_km2 = 0.0;
};

struct EncounterSequence {
  std::string camera_id;
  Timestamp start{};
  Timestamp end{};
  std::int64_t group_size = 1;

  friend bool operator==(const EncounterSequence&,
                         const EncounterSequence&) = default;
};

struct CtDeployment {
  std::string camera_id;
  PlanarPoint position;
  Timestamp active_start{};
  Timestamp active_end{};
  double detection_radius_m = 0.0;
  double detection_angle_rad = 0.0;
  double mount_height_m = 0.0;                    // metadata
  int burst_size = 8;                             // metadata
  double azimuth_rad = std::numbers::pi / 2.0;    // north-facing

  friend bool operator==(const CtDeployment&, const CtDeployment&) = default;
};

struct Diagnostic {
  std::size_t line = 0;
  std::string message;
};

template <typename T>
struct ParseResult {
  std::vector<T> records;
  std::vector<Diagnostic> diagnostics;
};

namespace io_detail {

struct ColumnMap {
  std::map<std::string, std::size_t> index;

  const std::string& get(const text::CsvRow& row, const std::string& name) const {
    return row.fields.at(index.at(name));
  }
};

inline ColumnMap require_columns(const std::vector<text::CsvRow>& rows,
                                 const std::vector<std::string>& required,
                                 const std::string& what) {
  if (rows.empty()) throw ValidationError(what + ": missing header row");
  ColumnMap map;
  for (std::size_t c = 0; c < rows[0].fields.size(); ++c) {
    map.index[text::trim(rows[0].fields[c])] = c;
  }
  std::vector<std::string> missing;
  for (const auto& r : required) {
    if (!map.index.contains(r)) missing.push_back(r);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw ValidationError(what + ": missing required column(s): " + list);
  }
  return map;
}

}  // namespace io_detail

inline const std::vector<std::string>& sighting_columns() {
  static const std::vector<std::string> cols{
      "transect_id", "species", "count", "x_m", "y_m", "timestamp", "observer"};
  return cols;
}

/// Malformed rows are skipped and reported with their line number; a missing
/// column is fatal.
inline ParseResult<SightingRecord> parse_sightings(
    std::istream& in, const std::optional<std::string>& species_filter = {}) {
  const auto rows = text::read_csv(in);
  const auto cols = io_detail::require_columns(rows, sighting_columns(), "sightings");
  ParseResult<SightingRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto bad = [&](const std::string& msg) {
      out.diagnostics.push_back({row.line, msg});
    };
    if (row.fields.size() != rows[0].fields.size()) {
      bad("expected " + std::to_string(rows[0].fields.size()) + " fields, got " +
          std::to_string(row.fields.size()));
      continue;
    }
    SightingRecord rec;
    rec.transect_id = text::trim(cols.get(row, "transect_id"));
    rec.species = text::trim(cols.get(row, "species"));
    rec.observer = text::trim(cols.get(row, "observer"));
    const auto count = text::parse_int(cols.get(row, "count"));
    const auto x = text::parse_double(cols.get(row, "x_m"));
    const auto y = text::parse_double(cols.get(row, "y_m"));
    const auto ts = text::parse_timestamp(cols.get(row, "timestamp"));
    if (rec.transect_id.empty()) { bad("empty transect_id"); continue; }
    if (!count) { bad("count is not an integer"); continue; }
    if (*count < 1) { bad("count must be >= 1"); continue; }
    if (!x || !y) { bad("x_m/y_m must be finite numbers"); continue; }
    if (!ts) { bad("timestamp is not ISO-8601 UTC"); continue; }
    rec.count = *count;
    rec.x_m = *x;
    rec.y_m = *y;
    rec.timestamp = *ts;
    if (species_filter && rec.species != *species_filter) continue;
    out.records.push_back(std::move(rec));
  }
  return out;
}

inline std::string write_sightings(const std::vector<SightingRecord>& records) {
  std::string out = text::csv_line(sighting_columns());
  for (const auto& r : records) {
    out += text::csv_line({r.transect_id, r.species, std::to_string(r.count),
                           text::format_double(r.x_m), text::format_double(r.y_m),
                           text::format_timestamp(r.timestamp), r.observer});
  }
  return out;
}

enum class ReconcileStrategy { max, first, mean_rounded };

inline ReconcileStrategy parse_reconcile_strategy(const std::string& tag) {
  if (tag == "max") return ReconcileStrategy::max;
  if (tag == "first") return ReconcileStrategy::first;
  if (tag == "mean_rounded") return ReconcileStrategy::mean_rounded;
  throw ValidationError("unknown observer reconciliation strategy '" + tag +
                        "' (expected max, first or mean_rounded)");
}

/// Merges the annotations of several observers into one record stream.
///   max           per transect, keep the records of the observer with the
///                 largest total (earliest-listed observer wins ties)
///   first         keep only `designated` (default: first observer in input)
///   mean_rounded  one record per transect whose count is the mean of the
///                 observers' totals, rounded half up; observers without
///                 records on a transect contribute 0
inline std::vector<SightingRecord> reconcile_observers(
    const std::vector<SightingRecord>& records, ReconcileStrategy strategy,
    const std::optional<std::string>& designated = {}) {
  std::vector<std::string> observers;
  std::vector<std::string> transects;
  for (const auto& r : records) {
    if (std::find(observers.begin(), observers.end(), r.observer) == observers.end()) {
      observers.push_back(r.observer);
    }
    if (std::find(transects.begin(), transects.end(), r.transect_id) ==
        transects.end()) {
      transects.push_back(r.transect_id);
    }
  }
  if (observers.empty()) return {};

  std::vector<SightingRecord> out;
  if (strategy == ReconcileStrategy::first) {
    const std::string keep = designated.value_or(observers.front());
    for (const auto& r : records) {
      if (r.observer == keep) out.push_back(r);
    }
    return out;
  }

  for (const auto& t : transects) {
    std::vector<std::int64_t> totals(observers.size(), 0);
    const SightingRecord* first_rec = nullptr;
    for (const auto& r : records) {
      if (r.transect_id != t) continue;
      if (!first_rec) first_rec = &r;
      const auto o = std::find(observers.begin(), observers.end(), r.observer) -
                     observers.begin();
      totals[o] += r.count;
    }
    if (strategy == ReconcileStrategy::max) {
      const auto best = std::max_element(totals.begin(), totals.end()) - totals.begin();
      for (const auto& r : records) {
        if (r.transect_id == t && r.observer == observers[best]) out.push_back(r);
      }
    } else {
      std::int64_t sum = 0;
      for (auto v : totals) sum += v;
      const auto n = static_cast<std::int64_t>(observers.size());
      const std::int64_t rounded = (2 * sum + n) / (2 * n);
      if (rounded < 1) continue;
      SightingRecord merged = *first_rec;
      merged.count = rounded;
      merged.observer = "mean";
      out.push_back(std::move(merged));
    }
  }
  return out;
}

/// One entry per flown transect in design order, zero-count transects
/// included.
inline std::vector<TransectCount> summarize_by_transect(
    const std::vector<SightingRecord>& records,
    const std::vector<TransectArea>& transects) {
  std::map<std::string, std::size_t> slot;
  std::vector<TransectCount> out;
  for (const auto& t : transects) {
    if (!(t.covered_area_km2 > 0.0)) {
      throw ValidationError("transect " + t.id + " has non-positive covered area");
    }
    if (!slot.emplace(t.id, out.size()).second) {
      throw ValidationError("duplicate transect id " + t.id + " in design");
    }
    out.push_back({t.id, 0, t.covered_area_km2});
  }
  std::set<std::string> unknown;
  for (const auto& r : records) {
    auto it = slot.find(r.transect_id);
    if (it == slot.end()) {
      unknown.insert(r.transect_id);
      continue;
    }
    out[it->second].animal_count += r.count;
  }
  if (!unknown.empty()) {
    throw ValidationError("sightings reference transects not in the design",
                          std::vector<std::string>(unknown.begin(), unknown.end()));
  }
  return out;
}

inline std::vector<TransectCount> summarize_by_transect(
    const std::vector<SightingRecord>& records, const SurveyDesign& design) {
  return summarize_by_transect(records, transect_areas(design));
}

inline const std::vector<std::string>& deployment_columns() {
  static const std::vector<std::string> cols{
      "camera_id", "x_m", "y_m", "start", "end", "detection_radius_m",
      "detection_angle_rad", "mount_height_m"};
  return cols;
}

inline const std::vector<std::string>& sequence_columns() {
  static const std::vector<std::string> cols{"camera_id", "start", "end",
                                             "group_size"};
  return cols;
}

inline std::vector<CtDeployment> parse_deployments(std::istream& in) {
  const auto rows = text::read_csv(in);
  const auto cols = io_detail::require_columns(rows, deployment_columns(), "deployments");
  std::vector<CtDeployment> out;
  std::vector<std::string> problems;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string at = "line " + std::to_string(row.line) + ": ";
    if (row.fields.size() != rows[0].fields.size()) {
      problems.push_back(at + "wrong number of fields");
      continue;
    }
    CtDeployment d;
    d.camera_id = text::trim(cols.get(row, "camera_id"));
    const auto x = text::parse_double(cols.get(row, "x_m"));
    const auto y = text::parse_double(cols.get(row, "y_m"));
    const auto s = text::parse_timestamp(cols.get(row, "start"));
    const auto e = text::parse_timestamp(cols.get(row, "end"));
    const auto rad = text::parse_double(cols.get(row, "detection_radius_m"));
    const auto ang = text::parse_double(cols.get(row, "detection_angle_rad"));
    const auto h = text::parse_double(cols.get(row, "mount_height_m"));
    if (d.camera_id.empty() || !x || !y || !s || !e || !rad || !ang || !h) {
      problems.push_back(at + "malformed field");
      continue;
    }
    if (!seen.insert(d.camera_id).second) {
      problems.push_back(at + "duplicate camera_id " + d.camera_id);
      continue;
    }
    if (!(*s < *e)) problems.push_back(at + "empty active interval for " + d.camera_id);
    if (!(*rad > 0.0)) problems.push_back(at + "detection_radius_m must be > 0");
    if (!(*ang > 0.0 && *ang < 2.0 * std::numbers::pi)) {
      problems.push_back(at + "detection_angle_rad must lie in (0, 2*pi)");
    }
    d.position = {*x, *y};
    d.active_start = *s;
    d.active_end = *e;
    d.detection_radius_m = *rad;
    d.detection_angle_rad = *ang;
    d.mount_height_m = *h;
    out.push_back(std::move(d));
  }
  if (!problems.empty()) throw ValidationError("invalid deployments", problems);
  return out;
}

inline std::vector<EncounterSequence> parse_sequences(std::istream& in) {
  const auto rows = text::read_csv(in);
  const auto cols = io_detail::require_columns(rows, sequence_columns(), "sequences");
  std::vector<EncounterSequence> out;
  std::vector<std::string> problems;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string at = "line " + std::to_string(row.line) + ": ";
    if (row.fields.size() != rows[0].fields.size()) {
      problems.push_back(at + "wrong number of fields");
      continue;
    }
    EncounterSequence q;
    q.camera_id = text::trim(cols.get(row, "camera_id"));
    const auto s = text::parse_timestamp(cols.get(row, "start"));
    const auto e = text::parse_timestamp(cols.get(row, "end"));
    const auto g = text::parse_int(cols.get(row, "group_size"));
    if (q.camera_id.empty() || !s || !e || !g) {
      problems.push_back(at + "malformed field");
      continue;
    }
    if (*e < *s) problems.push_back(at + "sequence ends before it starts");
    if (*g < 1) problems.push_back(at + "group_size must be >= 1");
    q.start = *s;
    q.end = *e;
    q.group_size = *g;
    out.push_back(std::move(q));
  }
  if (!problems.empty()) throw ValidationError("invalid sequences", problems);
  return out;
}

struct EncounterData {
  std::vector<CtDeployment> deployments;
  std::vector<EncounterSequence> sequences;
};

/// Checks that every sequence belongs to a known camera and lies inside that
/// camera's active interval.
inline void validate_encounters(const EncounterData& data) {
  std::map<std::string, const CtDeployment*> by_id;
  for (const auto& d : data.deployments) by_id[d.camera_id] = &d;
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < data.sequences.size(); ++i) {
    const auto& q = data.sequences[i];
    const std::string at = "sequence " + std::to_string(i + 1) + " (" +
                           q.camera_id + " " + text::format_timestamp(q.start) + ")";
    auto it = by_id.find(q.camera_id);
    if (it == by_id.end()) {
      problems.push_back(at + ": unknown camera");
    } else if (q.start < it->second->active_start ||
               q.end > it->second->active_end) {
      problems.push_back(at + ": outside the deployment's active interval");
    }
  }
  if (!problems.empty()) {
    throw ValidationError("encounter sequences fail validation", problems);
  }
}

inline EncounterData parse_encounters(std::istream& deployments,
                                      std::istream& sequences) {
  EncounterData data{parse_deployments(deployments), parse_sequences(sequences)};
  validate_encounters(data);
  return data;
}

inline std::string write_deployments(const std::vector<CtDeployment>& deps) {
  std::string out = text::csv_line(deployment_columns());
  for (const auto& d : deps) {
    out += text::csv_line({d.camera_id, text::format_double(d.position.x),
                           text::format_double(d.position.y),
                           text::format_timestamp(d.active_start),
                           text::format_timestamp(d.active_end),
                           text::format_double(d.detection_radius_m),
                           text::format_double(d.detection_angle_rad),
                           text::format_double(d.mount_height_m)});
  }
  return out;
}

inline std::string write_sequences(const std::vector<EncounterSequence>& seqs) {
  std::string out = text::csv_line(sequence_columns());
  for (const auto& q : seqs) {
    out += text::csv_line({q.camera_id, text::format_timestamp(q.start),
                           text::format_timestamp(q.end),
                           std::to_string(q.group_size)});
  }
  return out;
}

}  // namespace wildsurvey
