#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wildsurvey/errors.hpp"
#include "wildsurvey/text.hpp"

namespace wildsurvey {

enum class Method { naive, bootstrap, zinb, rem };

inline const char* to_string(Method m) noexcept {
  switch (m) {
    case Method::naive: return "naive";
    case Method::bootstrap: return "bootstrap";
    case Method::zinb: return "zinb";
    case Method::rem: return "rem";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  if (s == "naive") return Method::naive;
  if (s == "bootstrap") return Method::bootstrap;
  if (s == "zinb") return Method::zinb;
  if (s == "rem") return Method::rem;
  throw ValidationError("unknown method '" + s + "'");
}

/// Density in individuals per km2 with optional uncertainty.
struct DensityEstimate {
  Method method = Method::naive;
  double density_per_km2 = 0.0;
  std::optional<double> se;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::size_t n_units = 0;
  nlohmann::json diagnostics = nlohmann::json::object();
  std::string survey_unit;  // optional label, e.g. "A-Oct"

  bool has_ci() const noexcept { return ci_low.has_value() && ci_high.has_value(); }
};

inline nlohmann::json to_json(const DensityEstimate& e) {
  auto opt = [](const std::optional<double>& v) {
    return v && std::isfinite(*v) ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json j{{"method", to_string(e.method)},
                   {"density_per_km2", e.density_per_km2},
                   {"se", opt(e.se)},
                   {"ci_low", opt(e.ci_low)},
                   {"ci_high", opt(e.ci_high)},
                   {"n_units", e.n_units},
                   {"diagnostics", e.diagnostics}};
  if (!e.survey_unit.empty()) j["survey_unit"] = e.survey_unit;
  return j;
}

inline DensityEstimate estimate_from_json(const nlohmann::json& j) {
  try {
    DensityEstimate e;
    e.method = method_from_string(j.at("method").get<std::string>());
    e.density_per_km2 = j.at("density_per_km2").get<double>();
    auto opt = [&](const char* key) -> std::optional<double> {
      if (!j.contains(key) || j[key].is_null()) return std::nullopt;
      return j[key].get<double>();
    };
    e.se = opt("se");
    e.ci_low = opt("ci_low");
    e.ci_high = opt("ci_high");
    e.n_units = j.value("n_units", std::size_t{0});
    if (j.contains("diagnostics")) e.diagnostics = j["diagnostics"];
    e.survey_unit = j.value("survey_unit", std::string{});
    if (!std::isfinite(e.density_per_km2)) {
      throw ValidationError("density_per_km2 must be finite");
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("malformed estimate: ") + ex.what());
  }
}

inline const char* estimate_csv_header() {
  return "survey_unit,method,density_per_km2,se,ci_low,ci_high,n_units\n";
}

inline std::string to_csv_row(const DensityEstimate& e) {
  auto opt = [](const std::optional<double>& v) {
    return v && std::isfinite(*v) ? text::format_double(*v) : std::string();
  };
  return text::csv_line({e.survey_unit, to_string(e.method),
                         text::format_double(e.density_per_km2), opt(e.se),
                         opt(e.ci_low), opt(e.ci_high), std::to_string(e.n_units)});
}

/// One estimate object or an array of them.
inline std::vector<DensityEstimate> estimates_from_json(const nlohmann::json& j) {
  std::vector<DensityEstimate> out;
  if (j.is_array()) {
    for (const auto& e : j) out.push_back(estimate_from_json(e));
  } else if (j.is_object()) {
    out.push_back(estimate_from_json(j));
  } else {
    throw ValidationError("estimate file must hold an object or an array of objects");
  }
  return out;
}

inline std::vector<DensityEstimate> read_estimates_csv(std::istream& in) {
  const auto rows = text::read_csv(in);
  if (rows.empty()) throw ValidationError("estimate CSV: missing header row");
  std::vector<std::string> header;
  for (const auto& f : rows[0].fields) header.push_back(text::trim(f));
  auto col = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ValidationError("estimate CSV: missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_unit = col("survey_unit"), c_method = col("method"), c_d = col("density_per_km2"),
                    c_se = col("se"), c_lo = col("ci_low"), c_hi = col("ci_high"), c_n = col("n_units");
  std::vector<DensityEstimate> out;
  std::vector<std::string> problems;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    const std::string at = "line " + std::to_string(rows[r].line) + ": ";
    if (f.size() != header.size()) {
      problems.push_back(at + "wrong number of fields");
      continue;
    }
    auto opt = [&](std::size_t c, bool& ok) -> std::optional<double> {
      if (text::trim(f[c]).empty()) return std::nullopt;
      const auto v = text::parse_double(f[c]);
      if (!v) ok = false;
      return v;
    };
    DensityEstimate e;
    bool ok = true;
    try {
      e.method = method_from_string(text::trim(f[c_method]));
    } catch (const ValidationError& ex) {
      problems.push_back(at + ex.what());
      continue;
    }
    e.survey_unit = text::trim(f[c_unit]);
    const auto d = text::parse_double(f[c_d]);
    e.se = opt(c_se, ok);
    e.ci_low = opt(c_lo, ok);
    e.ci_high = opt(c_hi, ok);
    const auto n = text::parse_int(f[c_n]);
    if (!d || !ok || !n || *n < 0) {
      problems.push_back(at + "malformed number");
      continue;
    }
    e.density_per_km2 = *d;
    e.n_units = static_cast<std::size_t>(*n);
    out.push_back(std::move(e));
  }
  if (!problems.empty()) throw ValidationError("estimate CSV has invalid rows", problems);
  return out;
}

}  // namespace wildsurvey
