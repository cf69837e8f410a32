#pragma once

// Random encounter model for camera-trap data:
//
//   D = (y / t) * pi / (v * r * (2 + theta))
//
// y encounters, t camera-days of effort, v day range (km/day), r detection
// radius (km), theta detection arc (rad). D is in individuals per km2.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "wildsurvey/config.hpp"
#include "wildsurvey/data_io.hpp"
#include "wildsurvey/errors.hpp"
#include "wildsurvey/estimate.hpp"

namespace wildsurvey {

struct RemParams {
  double day_range_km_per_day = 0.0;
  double detection_radius_km = 0.0;
  double detection_angle_rad = 0.0;
  bool use_group_size = false;
  double variance_inflation = 1.0;  // var(y) = phi * y

  void validate() const {
    std::vector<std::string> problems;
    if (!(day_range_km_per_day > 0.0) || !std::isfinite(day_range_km_per_day)) {
      problems.push_back("day_range_km_per_day must be > 0");
    }
    if (!(detection_radius_km > 0.0) || !std::isfinite(detection_radius_km)) {
      problems.push_back("detection_radius_km must be > 0");
    }
    if (!(detection_angle_rad > 0.0 && detection_angle_rad < 2.0 * std::numbers::pi)) {
      problems.push_back("detection_angle_rad must lie in (0, 2*pi)");
    }
    if (!(variance_inflation > 0.0) || !std::isfinite(variance_inflation)) {
      problems.push_back("variance_inflation must be > 0");
    }
    if (!problems.empty()) throw ValidationError("invalid REM parameters", problems);
  }
};

/// Reads day_range_km_per_day, detection_radius_km, detection_angle_rad and
/// use_group_size (all required) plus an optional variance_inflation.
inline RemParams rem_params_from_config(const KeyValueConfig& cfg) {
  RemParams p;
  p.day_range_km_per_day = cfg.get_double("day_range_km_per_day");
  p.detection_radius_km = cfg.get_double("detection_radius_km");
  p.detection_angle_rad = cfg.get_double("detection_angle_rad");
  p.use_group_size = cfg.get_bool("use_group_size");
  p.variance_inflation = cfg.get_double("variance_inflation", 1.0);
  p.validate();
  return p;
}

struct RemInput {
  std::int64_t encounters = 0;
  double effort_camera_days = 0.0;
  RemParams params;
  std::size_t n_cameras = 0;
};

/// Total camera-days over all deployments.
inline double effort(const std::vector<CtDeployment>& deployments) {
  if (deployments.empty()) throw ValidationError("effort: no deployments");
  double total = 0.0;
  std::vector<std::string> problems;
  for (const auto& d : deployments) {
    const double days = text::days_between(d.active_start, d.active_end);
    if (!(days > 0.0)) {
      problems.push_back(d.camera_id + ": empty active interval");
    }
    total += days;
  }
  if (!problems.empty()) throw ValidationError("effort: invalid deployments", problems);
  return total;
}

inline std::int64_t encounter_count(const std::vector<EncounterSequence>& sequences,
                                    bool use_group_size) {
  if (!use_group_size) return static_cast<std::int64_t>(sequences.size());
  std::int64_t y = 0;
  for (const auto& s : sequences) y += s.group_size;
  return y;
}

inline RemInput rem_input(const EncounterData& data, const RemParams& params) {
  validate_encounters(data);
  RemInput in;
  in.params = params;
  in.effort_camera_days = effort(data.deployments);
  in.encounters = encounter_count(data.sequences, params.use_group_size);
  in.n_cameras = data.deployments.size();
  return in;
}

enum class Adequacy { adequate, marginal, inadequate };

inline const char* to_string(Adequacy a) noexcept {
  switch (a) {
    case Adequacy::adequate: return "adequate";
    case Adequacy::marginal: return "marginal";
    case Adequacy::inadequate: return "inadequate";
  }
  return "?";
}

inline Adequacy encounter_adequacy(std::int64_t y) {
  if (y < 0) throw ValidationError("encounter count must be >= 0");
  if (y >= 100) return Adequacy::adequate;
  if (y >= 40) return Adequacy::marginal;
  return Adequacy::inadequate;
}

inline DensityEstimate rem_density(const RemInput& in) {
  in.params.validate();
  if (!(in.effort_camera_days > 0.0) || !std::isfinite(in.effort_camera_days)) {
    throw ValidationError("REM: effort must be > 0 camera-days");
  }
  if (in.encounters < 0) throw ValidationError("REM: encounters must be >= 0");

  const auto& p = in.params;
  const double y = static_cast<double>(in.encounters);
  const double profile = p.day_range_km_per_day * p.detection_radius_km *
                         (2.0 + p.detection_angle_rad);
  const double d = (y / in.effort_camera_days) * std::numbers::pi / profile;

  DensityEstimate e;
  e.method = Method::rem;
  e.density_per_km2 = d;
  e.n_units = in.n_cameras;
  const Adequacy adequacy = encounter_adequacy(in.encounters);
  auto warnings = nlohmann::json::array();
  if (in.encounters == 0) {
    warnings.push_back("no encounters: density is 0 and carries no uncertainty");
  } else {
    e.se = d * std::sqrt(p.variance_inflation / y);
    e.ci_low = std::max(0.0, d - 1.96 * *e.se);
    e.ci_high = d + 1.96 * *e.se;
    if (adequacy != Adequacy::adequate) {
      warnings.push_back("low encounter count (" + std::to_string(in.encounters) +
                         "): " + to_string(adequacy));
    }
  }
  e.diagnostics["encounters"] = in.encounters;
  e.diagnostics["effort_camera_days"] = in.effort_camera_days;
  e.diagnostics["day_range_km_per_day"] = p.day_range_km_per_day;
  e.diagnostics["detection_radius_km"] = p.detection_radius_km;
  e.diagnostics["detection_angle_rad"] = p.detection_angle_rad;
  e.diagnostics["use_group_size"] = p.use_group_size;
  e.diagnostics["variance_inflation"] = p.variance_inflation;
  e.diagnostics["adequacy"] = to_string(adequacy);
  e.diagnostics["warnings"] = warnings;
  return e;
}

}  // namespace wildsurvey
