#pragma once

// Comparison of density estimates across methods: least-squares factor
// models (treatment coding), type II ANOVA and Tukey HSD.
//
//   densities.csv   survey_unit,method,density

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "wildsurvey/errors.hpp"
#include "wildsurvey/estimate.hpp"
#include "wildsurvey/special.hpp"
#include "wildsurvey/text.hpp"

namespace wildsurvey {

struct DensityRow {
  std::string survey_unit;
  Method method = Method::naive;
  double density = 0.0;
};

struct DensityTable {
  std::vector<DensityRow> rows;

  /// Methods present, in the order rem, naive, bootstrap, zinb.
  std::vector<Method> methods() const {
    std::vector<Method> out;
    for (Method m : {Method::rem, Method::naive, Method::bootstrap, Method::zinb}) {
      if (std::any_of(rows.begin(), rows.end(), [&](const auto& r) { return r.method == m; })) {
        out.push_back(m);
      }
    }
    return out;
  }

  /// Survey units in order of first appearance.
  std::vector<std::string> units() const {
    std::vector<std::string> out;
    for (const auto& r : rows) {
      if (std::find(out.begin(), out.end(), r.survey_unit) == out.end()) out.push_back(r.survey_unit);
    }
    return out;
  }

  /// "unit/method" labels of cells with no observation.
  std::vector<std::string> missing_cells() const {
    std::vector<std::string> out;
    for (const auto& u : units()) {
      for (Method m : methods()) {
        const bool found = std::any_of(rows.begin(), rows.end(), [&](const auto& r) {
          return r.survey_unit == u && r.method == m;
        });
        if (!found) out.push_back(u + "/" + to_string(m));
      }
    }
    return out;
  }
};

inline DensityTable read_density_table(std::istream& in) {
  const auto rows = text::read_csv(in);
  if (rows.empty()) throw ValidationError("density table: empty file");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].fields.size(); ++i) col[text::trim(rows[0].fields[i])] = i;
  for (const char* name : {"survey_unit", "method", "density"}) {
    if (!col.count(name)) {
      throw ValidationError(std::string("density table: missing column '") + name + "'");
    }
  }
  DensityTable table;
  std::vector<std::string> problems;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string at = "line " + std::to_string(r.line) + ": ";
    if (r.fields.size() != rows[0].fields.size()) {
      problems.push_back(at + "wrong number of fields");
      continue;
    }
    DensityRow row;
    row.survey_unit = text::trim(r.fields[col["survey_unit"]]);
    if (row.survey_unit.empty()) problems.push_back(at + "empty survey_unit");
    try {
      row.method = method_from_string(text::trim(r.fields[col["method"]]));
    } catch (const ValidationError& e) {
      problems.push_back(at + e.what());
      continue;
    }
    const auto d = text::parse_double(r.fields[col["density"]]);
    if (!d) {
      problems.push_back(at + "density is not a finite number");
      continue;
    }
    row.density = *d;
    table.rows.push_back(row);
  }
  if (!problems.empty()) throw ValidationError("density table has invalid rows", problems);
  if (table.rows.empty()) throw ValidationError("density table: no data rows");
  return table;
}

inline DensityTable density_table_from_estimates(const std::vector<DensityEstimate>& estimates) {
  DensityTable t;
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (estimates[i].survey_unit.empty()) {
      problems.push_back("estimate " + std::to_string(i + 1) + " has no survey_unit");
    }
    t.rows.push_back({estimates[i].survey_unit, estimates[i].method, estimates[i].density_per_km2});
  }
  if (!problems.empty()) throw ValidationError("estimates cannot form a density table", problems);
  return t;
}

struct Factor {
  std::string name;
  std::vector<std::string> levels;
  std::vector<std::size_t> codes;  // one per observation
};

struct FactorModel {
  std::vector<double> y;
  std::vector<Factor> factors;
};

struct ModelFit {
  FactorModel model;
  std::vector<double> coefficients;  // intercept, then treatment contrasts
  std::vector<double> fitted;
  std::vector<double> residuals;
  double rss = 0.0;
  std::size_t rank = 0;
  std::size_t df_resid = 0;
};

namespace stats_detail {

inline Eigen::MatrixXd design_matrix(const FactorModel& m, const std::vector<bool>& include) {
  const std::size_t n = m.y.size();
  std::size_t cols = 1;
  for (std::size_t f = 0; f < m.factors.size(); ++f) {
    if (include[f]) cols += m.factors[f].levels.size() - 1;
  }
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols));
  x.col(0).setOnes();
  Eigen::Index offset = 1;
  for (std::size_t f = 0; f < m.factors.size(); ++f) {
    if (!include[f]) continue;
    const auto& fac = m.factors[f];
    for (std::size_t i = 0; i < n; ++i) {
      if (fac.codes[i] > 0) x(static_cast<Eigen::Index>(i), offset + static_cast<Eigen::Index>(fac.codes[i]) - 1) = 1.0;
    }
    offset += static_cast<Eigen::Index>(fac.levels.size()) - 1;
  }
  return x;
}

struct LsResult {
  Eigen::VectorXd coef;
  Eigen::VectorXd fitted;
  double rss = 0.0;
  std::size_t rank = 0;
};

inline LsResult least_squares(const FactorModel& m, const std::vector<bool>& include) {
  const Eigen::MatrixXd x = design_matrix(m, include);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(m.y.data(), static_cast<Eigen::Index>(m.y.size()));
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  LsResult r;
  r.rank = static_cast<std::size_t>(qr.rank());
  if (r.rank < static_cast<std::size_t>(x.cols())) {
    throw NumericError("factor model is rank deficient (rank " + std::to_string(r.rank) +
                       " < " + std::to_string(x.cols()) + " columns)");
  }
  r.coef = qr.solve(y);
  r.fitted = x * r.coef;
  r.rss = (y - r.fitted).squaredNorm();
  return r;
}

inline void validate(const FactorModel& m) {
  if (m.y.empty()) throw ValidationError("factor model: no observations");
  for (double v : m.y) {
    if (!std::isfinite(v)) throw ValidationError("factor model: non-finite response");
  }
  for (const auto& f : m.factors) {
    if (f.codes.size() != m.y.size()) throw ValidationError("factor " + f.name + ": code count mismatch");
    if (f.levels.size() < 2) throw ValidationError("factor " + f.name + " needs at least 2 levels");
    for (auto c : f.codes) {
      if (c >= f.levels.size()) throw ValidationError("factor " + f.name + ": code out of range");
    }
  }
}

}  // namespace stats_detail

inline ModelFit fit_factor_model(FactorModel model) {
  stats_detail::validate(model);
  const std::vector<bool> all(model.factors.size(), true);
  const auto ls = stats_detail::least_squares(model, all);
  ModelFit fit;
  fit.coefficients.assign(ls.coef.data(), ls.coef.data() + ls.coef.size());
  fit.fitted.assign(ls.fitted.data(), ls.fitted.data() + ls.fitted.size());
  for (std::size_t i = 0; i < model.y.size(); ++i) fit.residuals.push_back(model.y[i] - fit.fitted[i]);
  fit.rss = ls.rss;
  fit.rank = ls.rank;
  fit.df_resid = model.y.size() - ls.rank;
  fit.model = std::move(model);
  return fit;
}

/// Residual sum of squares of the model restricted to the included factors.
inline double residual_ss(const FactorModel& model, const std::vector<bool>& include) {
  return stats_detail::least_squares(model, include).rss;
}

/// Additive method + survey_unit model.
inline ModelFit fit_additive_model(const DensityTable& table) {
  const auto methods = table.methods();
  const auto units = table.units();
  Factor method{"method", {}, {}};
  for (Method m : methods) method.levels.push_back(to_string(m));
  Factor unit{"survey_unit", units, {}};
  FactorModel model;
  for (const auto& r : table.rows) {
    model.y.push_back(r.density);
    method.codes.push_back(static_cast<std::size_t>(
        std::find(methods.begin(), methods.end(), r.method) - methods.begin()));
    unit.codes.push_back(static_cast<std::size_t>(
        std::find(units.begin(), units.end(), r.survey_unit) - units.begin()));
  }
  model.factors = {method, unit};
  return fit_factor_model(std::move(model));
}

struct AnovaRow {
  std::string term;
  double ss = 0.0;
  std::size_t df = 0;
  double ms = 0.0;
  double f = 0.0;
  double p = 1.0;
};

struct AnovaResult {
  std::vector<AnovaRow> terms;
  double residual_ss = 0.0;
  std::size_t residual_df = 0;
  double residual_ms = 0.0;
  double total_ss = 0.0;  // about the grand mean

  const AnovaRow& term(const std::string& name) const {
    for (const auto& t : terms) {
      if (t.term == name) return t;
    }
    throw ValidationError("no ANOVA term '" + name + "'");
  }
};

/// Type II ANOVA: each factor's SS is the RSS increase when that factor
/// alone is dropped from the full model.
inline AnovaResult anova_type2(const ModelFit& fit) {
  const auto& m = fit.model;
  if (fit.df_resid == 0) throw NumericError("ANOVA: zero residual degrees of freedom, p undefined");
  const double mean = std::accumulate(m.y.begin(), m.y.end(), 0.0) / static_cast<double>(m.y.size());
  double tss = 0.0;
  for (double v : m.y) tss += (v - mean) * (v - mean);
  if (!(tss > 0.0) || fit.rss <= 1e-20 * tss) {
    throw NumericError("ANOVA: residual variance is zero, F and p undefined");
  }
  AnovaResult out;
  out.residual_ss = fit.rss;
  out.residual_df = fit.df_resid;
  out.residual_ms = fit.rss / static_cast<double>(fit.df_resid);
  out.total_ss = tss;
  for (std::size_t f = 0; f < m.factors.size(); ++f) {
    std::vector<bool> include(m.factors.size(), true);
    include[f] = false;
    AnovaRow row;
    row.term = m.factors[f].name;
    row.ss = std::max(0.0, residual_ss(m, include) - fit.rss);
    row.df = m.factors[f].levels.size() - 1;
    row.ms = row.ss / static_cast<double>(row.df);
    row.f = row.ms / out.residual_ms;
    row.p = special::f_upper_tail(row.f, static_cast<double>(row.df),
                                  static_cast<double>(out.residual_df));
    out.terms.push_back(row);
  }
  return out;
}

/// Sequential (type I) SS with factors entered in the given order.
inline std::vector<double> sequential_ss(const ModelFit& fit, const std::vector<std::size_t>& order) {
  const auto& m = fit.model;
  std::vector<bool> include(m.factors.size(), false);
  double prev = residual_ss(m, include);
  std::vector<double> out(m.factors.size(), 0.0);
  for (auto f : order) {
    include.at(f) = true;
    const double now = residual_ss(m, include);
    out[f] = prev - now;
    prev = now;
  }
  return out;
}

struct TukeyRow {
  std::string level_a;
  std::string level_b;
  double mean_diff = 0.0;  // mean_a - mean_b
  double q_statistic = 0.0;
  double p_adjusted = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct TukeyResult {
  std::string factor;
  std::vector<std::string> levels;
  std::vector<double> level_means;
  std::size_t n_per_level = 0;
  double residual_ms = 0.0;
  std::size_t residual_df = 0;
  double confidence = 0.95;
  double q_critical = 0.0;
  std::vector<TukeyRow> rows;
};

/// Balanced Tukey HSD on one factor of a fitted model.
inline TukeyResult tukey_hsd(const ModelFit& fit, const std::string& factor = "method",
                             double confidence = 0.95) {
  const auto& m = fit.model;
  auto it = std::find_if(m.factors.begin(), m.factors.end(),
                         [&](const auto& f) { return f.name == factor; });
  if (it == m.factors.end()) throw ValidationError("Tukey: no factor named '" + factor + "'");
  if (fit.df_resid < 1) throw NumericError("Tukey: zero residual degrees of freedom");
  const auto& fac = *it;
  const std::size_t k = fac.levels.size();
  std::vector<double> sums(k, 0.0);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < m.y.size(); ++i) {
    sums[fac.codes[i]] += m.y[i];
    ++counts[fac.codes[i]];
  }
  if (std::any_of(counts.begin(), counts.end(), [&](auto c) { return c != counts[0]; })) {
    throw ValidationError("Tukey: levels of '" + factor + "' are unbalanced");
  }

  TukeyResult out;
  out.factor = factor;
  out.levels = fac.levels;
  out.n_per_level = counts[0];
  out.residual_df = fit.df_resid;
  out.residual_ms = fit.rss / static_cast<double>(fit.df_resid);
  out.confidence = confidence;
  for (std::size_t a = 0; a < k; ++a) out.level_means.push_back(sums[a] / static_cast<double>(counts[a]));
  const double df = static_cast<double>(fit.df_resid);
  const double se = std::sqrt(out.residual_ms / static_cast<double>(out.n_per_level));
  if (!(se > 0.0)) throw NumericError("Tukey: residual variance is zero");
  out.q_critical = special::studentized_range_quantile(confidence, static_cast<int>(k), df);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      TukeyRow row;
      row.level_a = fac.levels[a];
      row.level_b = fac.levels[b];
      row.mean_diff = out.level_means[a] - out.level_means[b];
      row.q_statistic = std::abs(row.mean_diff) / se;
      row.p_adjusted = std::clamp(
          1.0 - special::studentized_range_cdf(row.q_statistic, static_cast<int>(k), df), 0.0, 1.0);
      row.ci_low = row.mean_diff - out.q_critical * se;
      row.ci_high = row.mean_diff + out.q_critical * se;
      out.rows.push_back(row);
    }
  }
  return out;
}

inline nlohmann::json to_json(const AnovaResult& a) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : a.terms) {
    terms.push_back({{"term", t.term}, {"ss", t.ss}, {"df", t.df}, {"ms", t.ms}, {"f", t.f}, {"p", t.p}});
  }
  return {{"type", "II"},
          {"terms", terms},
          {"residual", {{"ss", a.residual_ss}, {"df", a.residual_df}, {"ms", a.residual_ms}}},
          {"total_ss", a.total_ss}};
}

inline nlohmann::json to_json(const TukeyResult& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"level_a", r.level_a}, {"level_b", r.level_b}, {"mean_diff", r.mean_diff},
                    {"q_statistic", r.q_statistic}, {"p_adjusted", r.p_adjusted},
                    {"ci_low", r.ci_low}, {"ci_high", r.ci_high}});
  }
  nlohmann::json means = nlohmann::json::object();
  for (std::size_t i = 0; i < t.levels.size(); ++i) means[t.levels[i]] = t.level_means[i];
  return {{"factor", t.factor}, {"confidence", t.confidence}, {"n_per_level", t.n_per_level},
          {"residual_ms", t.residual_ms}, {"residual_df", t.residual_df},
          {"q_critical", t.q_critical}, {"level_means", means}, {"comparisons", rows}};
}

namespace stats_detail {

inline std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

inline std::string fmt_p(double p) {
  if (p < 1e-4) {
    std::ostringstream os;
    os.precision(2);
    os << std::scientific << p;
    return os.str();
  }
  return text::format_fixed(p, 4);
}

}  // namespace stats_detail

inline std::string to_text(const AnovaResult& a) {
  using stats_detail::pad;
  std::string out = "Type II ANOVA\n";
  out += pad("term", 12) + pad("SS", 14) + pad("df", 5) + pad("MS", 14) + pad("F", 10) + pad("p", 10) + "\n";
  for (const auto& t : a.terms) {
    out += pad(t.term, 12) + pad(text::format_fixed(t.ss, 4), 14) + pad(std::to_string(t.df), 5) +
           pad(text::format_fixed(t.ms, 4), 14) + pad(text::format_fixed(t.f, 3), 10) +
           pad(stats_detail::fmt_p(t.p), 10) + "\n";
  }
  out += pad("residual", 12) + pad(text::format_fixed(a.residual_ss, 4), 14) +
         pad(std::to_string(a.residual_df), 5) + pad(text::format_fixed(a.residual_ms, 4), 14) + "\n";
  return out;
}

inline std::string to_text(const TukeyResult& t) {
  using stats_detail::pad;
  std::string out = "Tukey HSD on " + t.factor + " (" + text::format_fixed(100 * t.confidence, 0) +
                    "% family-wise, q_crit " + text::format_fixed(t.q_critical, 4) + ")\n";
  out += pad("a", 10) + pad("b", 10) + pad("diff", 12) + pad("q", 9) + pad("p_adj", 10) +
         pad("ci_low", 12) + pad("ci_high", 12) + "\n";
  for (const auto& r : t.rows) {
    out += pad(r.level_a, 10) + pad(r.level_b, 10) + pad(text::format_fixed(r.mean_diff, 3), 12) +
           pad(text::format_fixed(r.q_statistic, 3), 9) + pad(stats_detail::fmt_p(r.p_adjusted), 10) +
           pad(text::format_fixed(r.ci_low, 3), 12) + pad(text::format_fixed(r.ci_high, 3), 12) + "\n";
  }
  return out;
}

}  // namespace wildsurvey
