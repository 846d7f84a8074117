#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "positivity/dataset.hpp"
#include "positivity/errors.hpp"

namespace positivity {

inline double expit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + e^x) without overflow.
inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

/// A design over covariate level codes: each term multiplies a set of
/// covariates (empty set is the intercept). Level codes enter numerically,
/// which is exact for binary covariates.
struct Design {
  std::vector<std::vector<int>> terms;

  static Design main_effects(std::size_t n_covariates) {
    Design d;
    d.terms.push_back({});
    for (std::size_t j = 0; j < n_covariates; ++j) d.terms.push_back({static_cast<int>(j)});
    return d;
  }

  /// Intercept, main effects, and all interaction products.
  static Design saturated(std::size_t n_covariates) {
    Design d;
    std::vector<std::vector<int>> by_size(n_covariates + 1);
    for (unsigned mask = 0; mask < (1u << n_covariates); ++mask) {
      std::vector<int> term;
      for (std::size_t j = 0; j < n_covariates; ++j)
        if (mask & (1u << j)) term.push_back(static_cast<int>(j));
      d.terms.push_back(std::move(term));
    }
    std::stable_sort(d.terms.begin(), d.terms.end(),
                     [](const auto& a, const auto& b) { return a.size() < b.size(); });
    return d;
  }

  double value(std::size_t term, const Pattern& z) const {
    double v = 1.0;
    for (int j : terms[term]) v *= static_cast<double>(z.at(static_cast<std::size_t>(j)));
    return v;
  }

  std::string term_name(std::size_t term, const std::vector<std::string>& names) const {
    if (terms[term].empty()) return "(Intercept)";
    std::string s;
    for (std::size_t i = 0; i < terms[term].size(); ++i) {
      if (i) s += ":";
      int j = terms[term][i];
      s += static_cast<std::size_t>(j) < names.size() ? names[j] : "z" + std::to_string(j);
    }
    return s;
  }
};

struct LogisticFit {
  std::vector<double> coefficients;
  Design design;
  bool converged = false;
  bool separation_detected = false;
  int iterations = 0;
  double final_gradient_norm = 0.0;

  double linear_predictor(const Pattern& z) const {
    double eta = 0.0;
    for (std::size_t j = 0; j < coefficients.size(); ++j) eta += coefficients[j] * design.value(j, z);
    return eta;
  }

  /// Fitted Pr(A=1|z), kept strictly inside (0,1): finite coefficients can
  /// never yield an exact 0 or 1, and the clamp preserves that under the
  /// rounding of expit.
  double predict(const Pattern& z) const {
    double p = expit(linear_predictor(z));
    if (p >= 1.0) p = 1.0 - 0x1p-53;
    if (p <= 0.0) p = 1e-300;
    return p;
  }
};

/// Newton/IRLS maximum-likelihood fit on the stratum sufficient statistics.
/// Stops when the score norm drops to `tol` or after `max_iter` steps, with
/// step-halving whenever a full step would lower the likelihood.
inline LogisticFit fit_logistic(const Dataset& data, const Design& design, double tol = 1e-10,
                                int max_iter = 100) {
  StratumTable strata = build_strata(data);
  const std::size_t m = strata.cells.size();
  const std::size_t p = design.terms.size();
  if (m == 0) throw Error(ErrorCode::EmptyData, "cannot fit a logistic model on empty data");

  std::vector<Pattern> patterns;
  Eigen::VectorXd n_z(m), t_z(m);
  {
    std::size_t i = 0;
    for (const auto& [z, c] : strata.cells) {
      patterns.push_back(z);
      n_z(i) = static_cast<double>(c.n_total);
      t_z(i) = static_cast<double>(c.n_by_arm[1]);
      ++i;
    }
  }
  double treated_total = t_z.sum();
  if (treated_total == 0.0 || treated_total == n_z.sum())
    throw Error(ErrorCode::NoActionVariation, "action does not vary: all units have the same A");

  Eigen::MatrixXd X(m, p);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j) X(i, j) = design.value(j, patterns[i]);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (static_cast<std::size_t>(qr.rank()) < p)
    throw Error(ErrorCode::RankDeficientDesign,
                "design matrix has rank " + std::to_string(qr.rank()) + " < " + std::to_string(p) +
                    " on the observed covariate patterns");

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);

  auto log_likelihood = [&](const Eigen::VectorXd& b) {
    Eigen::VectorXd eta = X * b;
    double ll = 0.0;
    for (std::size_t i = 0; i < m; ++i) ll += t_z(i) * eta(i) - n_z(i) * softplus(eta(i));
    return ll;
  };
  // Per-cell score residual t - n*pi, computed from the complement side when
  // eta > 0 so it stays accurate as pi approaches 1.
  auto residuals = [&](const Eigen::VectorXd& eta) {
    Eigen::VectorXd r(m);
    for (std::size_t i = 0; i < m; ++i) {
      if (eta(i) >= 0.0) {
        double q = expit(-eta(i));
        r(i) = (t_z(i) - n_z(i)) + n_z(i) * q;
      } else {
        r(i) = t_z(i) - n_z(i) * expit(eta(i));
      }
    }
    return r;
  };

  LogisticFit fit;
  fit.design = design;
  double ll = log_likelihood(beta);
  double gnorm = 0.0;

  for (int iter = 0; iter < max_iter; ++iter) {
    Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd r = residuals(eta);
    Eigen::VectorXd g = X.transpose() * r;
    gnorm = g.norm();
    if (gnorm <= tol) break;

    Eigen::VectorXd w(m);
    for (std::size_t i = 0; i < m; ++i) {
      double pi = expit(eta(i));
      w(i) = n_z(i) * std::max(pi * (1.0 - pi), 1e-12);
    }
    Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
    Eigen::VectorXd delta = H.ldlt().solve(g);

    double step = 1.0;
    double ll_new = log_likelihood(beta + step * delta);
    int halvings = 0;
    while (ll_new < ll && halvings < 40) {
      step *= 0.5;
      ll_new = log_likelihood(beta + step * delta);
      ++halvings;
    }
    if (ll_new < ll) break;  // no ascent direction left
    beta += step * delta;
    ll = ll_new;
    fit.iterations = iter + 1;
  }

  Eigen::VectorXd eta = X * beta;
  gnorm = (X.transpose() * residuals(eta)).norm();
  fit.coefficients.assign(beta.data(), beta.data() + p);
  fit.final_gradient_norm = gnorm;
  fit.converged = gnorm <= tol;
  for (std::size_t i = 0; i < m; ++i) {
    double pi = expit(eta(i));
    if (pi < 1e-6 || pi > 1.0 - 1e-6) fit.separation_detected = true;
  }
  return fit;
}

}  // namespace positivity
