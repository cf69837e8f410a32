#pragma once

// Zero-inflated negative binomial model for transect counts with a log-area
// offset.
//
//   P(y = 0) = pi + (1 - pi) * NB(0; mu, k)
//   P(y > 0) = (1 - pi) * NB(y; mu, k)
//   log mu_i = beta0 + log(area_i)
//   NB(y; mu, k) = Gamma(y + k) / (Gamma(k) y!) (k / (k + mu))^k (mu / (k + mu))^y
//
// so exp(beta0) is the expected count per km2 of the count process and
// (1 - pi) exp(beta0) is the marginal density. The fit runs BFGS on the
// unconstrained scale theta = (logit pi, beta0, log k) with an analytic
// gradient, restarting from jittered initial points; the covariance is the
// inverse of the negative numerical Hessian at the optimum.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "wildsurvey/data_io.hpp"
#include "wildsurvey/errors.hpp"
#include "wildsurvey/estimate.hpp"
#include "wildsurvey/rng.hpp"

namespace wildsurvey {

/// Unconstrained parameters.
struct ZinbTheta {
  double logit_pi = 0.0;
  double beta0 = 0.0;
  double log_k = 0.0;

  std::array<double, 3> as_array() const { return {logit_pi, beta0, log_k}; }
  static ZinbTheta from(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }
};

struct ZinbOptions {
  std::size_t max_iter = 10000;
  double tol = 1e-8;
  std::size_t n_starts = 3;
  std::uint64_t seed = 0;
};

using Matrix3 = std::array<std::array<double, 3>, 3>;

struct ZinbFit {
  double beta0 = 0.0;
  double pi = 0.0;
  double k = 0.0;
  ZinbTheta theta;
  Matrix3 covariance{};       // on (logit pi, beta0, log k)
  bool covariance_ok = false;
  double loglik = -std::numeric_limits<double>::infinity();
  bool converged = false;
  std::size_t n_iterations = 0;
  std::array<double, 3> gradient{};
  std::vector<double> start_logliks;  // loglik at each initial point

  double se(std::size_t i) const { return std::sqrt(covariance[i][i]); }
};

namespace zinb_detail {

inline double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double log_add_exp(double a, double b) noexcept {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

// log NB(y; mu, k) written to stay accurate as k grows large:
//   y log mu + sum_{j<y} log1p((j - mu)/(k + mu)) - log y! - k log1p(mu/k)
inline double log_nb(std::int64_t y, double mu, double k) noexcept {
  double s = -k * std::log1p(mu / k) - std::lgamma(static_cast<double>(y) + 1.0);
  if (y == 0) return s;
  s += static_cast<double>(y) * std::log(mu);
  if (y <= 10000) {
    for (std::int64_t j = 0; j < y; ++j) {
      s += std::log1p((static_cast<double>(j) - mu) / (k + mu));
    }
  } else {
    s += std::lgamma(static_cast<double>(y) + k) - std::lgamma(k) -
         static_cast<double>(y) * std::log(k + mu);
  }
  return s;
}

}  // namespace zinb_detail

inline double zinb_loglik(const std::vector<TransectCount>& counts,
                          const ZinbTheta& t) {
  using namespace zinb_detail;
  const double log_p = -softplus(-t.logit_pi);
  const double log_1mp = -softplus(t.logit_pi);
  const double k = std::exp(t.log_k);
  double ll = 0.0;
  for (const auto& c : counts) {
    const double mu = std::exp(t.beta0) * c.covered_area_km2;
    if (c.animal_count == 0) {
      ll += log_add_exp(log_p, log_1mp + log_nb(0, mu, k));
    } else {
      ll += log_1mp + log_nb(c.animal_count, mu, k);
    }
  }
  return ll;
}

inline std::array<double, 3> zinb_gradient(const std::vector<TransectCount>& counts,
                                           const ZinbTheta& t) {
  using namespace zinb_detail;
  const double log_p = -softplus(-t.logit_pi);
  const double log_1mp = -softplus(t.logit_pi);
  const double p = std::exp(log_p);
  const double k = std::exp(t.log_k);
  std::array<double, 3> g{0.0, 0.0, 0.0};
  for (const auto& c : counts) {
    const double mu = std::exp(t.beta0) * c.covered_area_km2;
    const double kmu = k + mu;
    const double log1p_mu_k = std::log1p(mu / k);
    if (c.animal_count == 0) {
      const double log_f0 = -k * log1p_mu_k;
      const double log_l0 = log_add_exp(log_p, log_1mp + log_f0);
      // Posterior probability that the zero came from the count process.
      const double w = std::exp(log_1mp + log_f0 - log_l0);
      const double one_minus_f0 = -std::expm1(log_f0);
      g[0] += std::exp(log_p - log_l0) * std::exp(log_1mp) * one_minus_f0;
      g[1] += w * (-k * mu / kmu);
      g[2] += w * k * (mu / kmu - log1p_mu_k);
    } else {
      const auto y = static_cast<double>(c.animal_count);
      double harmonic = 0.0;  // digamma(y + k) - digamma(k)
      for (std::int64_t j = 0; j < c.animal_count; ++j) {
        harmonic += 1.0 / (k + static_cast<double>(j));
      }
      g[0] += -p;
      g[1] += k * (y - mu) / kmu;
      g[2] += k * (harmonic - log1p_mu_k + (mu - y) / kmu);
    }
  }
  return g;
}

namespace zinb_detail {

constexpr double kParamBound = 50.0;

struct RunResult {
  ZinbTheta theta;
  double loglik = -std::numeric_limits<double>::infinity();
  std::array<double, 3> gradient{};
  bool converged = false;
  std::size_t iterations = 0;
};

inline double inf_norm(const std::array<double, 3>& g) {
  return std::max({std::abs(g[0]), std::abs(g[1]), std::abs(g[2])});
}

// BFGS on f = -loglik with Armijo backtracking.
inline RunResult bfgs(const std::vector<TransectCount>& counts, ZinbTheta start,
                      const ZinbOptions& opt) {
  using Vec = Eigen::Vector3d;
  auto to_vec = [](const ZinbTheta& t) { return Vec(t.logit_pi, t.beta0, t.log_k); };
  auto to_theta = [](const Vec& v) { return ZinbTheta{v[0], v[1], v[2]}; };
  auto grad_f = [&](const Vec& x) {
    const auto g = zinb_gradient(counts, to_theta(x));
    return Vec(-g[0], -g[1], -g[2]);
  };
  auto f = [&](const Vec& x) { return -zinb_loglik(counts, to_theta(x)); };

  Vec x = to_vec(start);
  double fx = f(x);
  Vec g = grad_f(x);
  Eigen::Matrix3d h_inv = Eigen::Matrix3d::Identity();
  RunResult res;
  std::size_t stalls = 0;
  const double grad_tight = 1e-9 * std::max<double>(1.0, static_cast<double>(counts.size()));

  for (std::size_t it = 0; it < opt.max_iter; ++it) {
    res.iterations = it + 1;
    if (g.cwiseAbs().maxCoeff() < grad_tight) {
      res.converged = true;
      break;
    }
    Vec dir = -h_inv * g;
    if (dir.dot(g) >= 0.0) {
      h_inv.setIdentity();
      dir = -g;
    }
    const double max_step = dir.cwiseAbs().maxCoeff();
    double step = max_step > 5.0 ? 5.0 / max_step : 1.0;
    Vec x_new;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = (x + step * dir).cwiseMax(-kParamBound).cwiseMin(kParamBound);
      f_new = f(x_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * g.dot(dir)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (h_inv.isIdentity()) break;
      h_inv.setIdentity();
      continue;
    }
    const Vec g_new = grad_f(x_new);
    const Vec s = x_new - x;
    const Vec y = g_new - g;
    const double sy = s.dot(y);
    const double df = fx - f_new;
    x = x_new;
    fx = f_new;
    g = g_new;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::Matrix3d eye = Eigen::Matrix3d::Identity();
      h_inv = (eye - rho * s * y.transpose()) * h_inv * (eye - rho * y * s.transpose()) +
              rho * s * s.transpose();
    }
    if (std::abs(df) < opt.tol) {
      if (g.cwiseAbs().maxCoeff() < 1e-6) {
        res.converged = true;
        break;
      }
      if (++stalls > 50) break;
    } else {
      stalls = 0;
    }
  }
  res.theta = to_theta(x);
  res.loglik = -fx;
  const Vec gl = -g;
  res.gradient = {gl[0], gl[1], gl[2]};
  return res;
}

inline Matrix3 numeric_hessian(const std::vector<TransectCount>& counts,
                               const ZinbTheta& at) {
  Matrix3 h{};
  const auto x = at.as_array();
  for (int j = 0; j < 3; ++j) {
    const double step = 1e-4 * std::max(1.0, std::abs(x[j]));
    auto xp = x, xm = x;
    xp[j] += step;
    xm[j] -= step;
    const auto gp = zinb_gradient(counts, ZinbTheta::from(xp));
    const auto gm = zinb_gradient(counts, ZinbTheta::from(xm));
    for (int i = 0; i < 3; ++i) h[i][j] = (gp[i] - gm[i]) / (2.0 * step);
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      const double avg = 0.5 * (h[i][j] + h[j][i]);
      h[i][j] = h[j][i] = avg;
    }
  }
  return h;
}

}  // namespace zinb_detail

inline ZinbFit fit_zinb(const std::vector<TransectCount>& counts,
                        const ZinbOptions& options = {}) {
  if (counts.empty()) throw NumericError("zinb: no transects");
  if (options.n_starts < 1) throw ValidationError("zinb: n_starts must be >= 1");
  double animals = 0.0, area = 0.0;
  std::size_t zeros = 0;
  for (const auto& c : counts) {
    if (!(c.covered_area_km2 > 0.0)) {
      throw ValidationError("zinb: transect " + c.transect_id + " has non-positive area");
    }
    animals += static_cast<double>(c.animal_count);
    area += c.covered_area_km2;
    zeros += c.animal_count == 0 ? 1 : 0;
  }
  if (animals == 0.0) {
    throw NumericError("zinb: all counts are zero, the model is not identifiable");
  }

  const double zero_frac = static_cast<double>(zeros) / static_cast<double>(counts.size());
  const double pi0 = std::clamp(0.5 * zero_frac, 0.05, 0.9);
  const ZinbTheta base{std::log(pi0 / (1.0 - pi0)),
                       std::log(animals / area / (1.0 - pi0)), 0.0};

  const CounterRng root = CounterRng(options.seed).substream("zinb");
  ZinbFit fit;
  zinb_detail::RunResult best;
  bool have_best = false;
  std::size_t total_iterations = 0;
  for (std::size_t s = 0; s < options.n_starts; ++s) {
    ZinbTheta start = base;
    if (s > 0) {
      CounterRng rng = root.substream(static_cast<std::uint64_t>(s));
      start.logit_pi += rng.normal(0.0, 0.5);
      start.beta0 += rng.normal(0.0, 0.5);
      start.log_k += rng.normal(0.0, 0.5);
    }
    fit.start_logliks.push_back(zinb_loglik(counts, start));
    const auto run = zinb_detail::bfgs(counts, start, options);
    total_iterations += run.iterations;
    const bool better_status = run.converged && !best.converged;
    const bool same_status = run.converged == best.converged;
    if (!have_best || better_status || (same_status && run.loglik > best.loglik)) {
      best = run;
      have_best = true;
    }
  }

  if (!best.converged) {
    throw NumericError("zinb: no start converged within " +
                       std::to_string(options.max_iter) +
                       " iterations; best loglik " + std::to_string(best.loglik));
  }

  fit.theta = best.theta;
  fit.beta0 = best.theta.beta0;
  fit.pi = 1.0 / (1.0 + std::exp(-best.theta.logit_pi));
  fit.k = std::exp(best.theta.log_k);
  fit.loglik = best.loglik;
  fit.gradient = best.gradient;
  fit.converged = true;
  fit.n_iterations = total_iterations;

  const Matrix3 h = zinb_detail::numeric_hessian(counts, best.theta);
  Eigen::Matrix3d neg;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) neg(i, j) = -h[i][j];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(neg);
  const auto& ev = eig.eigenvalues();
  if (eig.info() == Eigen::Success && ev.minCoeff() > 1e-10 * std::max(1.0, ev.maxCoeff())) {
    const Eigen::Matrix3d cov = eig.eigenvectors() * ev.cwiseInverse().asDiagonal() *
                                eig.eigenvectors().transpose();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) fit.covariance[i][j] = 0.5 * (cov(i, j) + cov(j, i));
    }
    fit.covariance_ok = true;
  } else {
    for (auto& row : fit.covariance) row.fill(std::numeric_limits<double>::quiet_NaN());
  }
  return fit;
}

/// Marginal density (1 - pi) exp(beta0) with a delta-method SE and a normal
/// interval floored at zero.
inline DensityEstimate zinb_density(const ZinbFit& fit,
                                    const std::vector<TransectCount>& counts) {
  if (!fit.converged) {
    throw NumericError("zinb density: the fit did not converge (loglik " +
                       std::to_string(fit.loglik) + ")");
  }
  const double mean_rate = std::exp(fit.beta0);
  const double d = (1.0 - fit.pi) * mean_rate;
  DensityEstimate e;
  e.method = Method::zinb;
  e.density_per_km2 = d;
  e.n_units = counts.size();
  e.diagnostics["pi"] = fit.pi;
  e.diagnostics["beta0"] = fit.beta0;
  e.diagnostics["k"] = fit.k;
  e.diagnostics["loglik"] = fit.loglik;
  e.diagnostics["iterations"] = fit.n_iterations;

  double fitted = 0.0, area = 0.0;
  for (const auto& c : counts) {
    fitted += (1.0 - fit.pi) * mean_rate * c.covered_area_km2;
    area += c.covered_area_km2;
  }
  if (area > 0.0) e.diagnostics["fitted_sum_per_area"] = fitted / area;

  if (fit.covariance_ok) {
    const std::array<double, 3> grad{-fit.pi * (1.0 - fit.pi) * mean_rate, d, 0.0};
    double var = 0.0;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) var += grad[i] * fit.covariance[i][j] * grad[j];
    }
    const double se = std::sqrt(std::max(var, 0.0));
    e.se = se;
    e.ci_low = std::max(0.0, d - 1.96 * se);
    e.ci_high = d + 1.96 * se;
  } else {
    e.diagnostics["warning"] = "negative Hessian not positive definite; SE unavailable";
  }
  return e;
}

}  // namespace wildsurvey
