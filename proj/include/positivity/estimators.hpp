#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "positivity/dataset.hpp"
#include "positivity/errors.hpp"
#include "positivity/plan.hpp"
#include "positivity/propensity.hpp"
#include "positivity/rng.hpp"

namespace positivity {

/// What is being estimated. Plan means subsume the counterfactual means and
/// the ACE: E[Y^1] is the all-treat plan mean and the ACE is the all-treat
/// minus all-control contrast.
struct Estimand {
  enum class Kind { Mean, Ace, PlanMean, Att, NaturalCourse };

  Kind kind = Kind::Ace;
  int action = 1;            // Mean only
  std::optional<Plan> plan;  // PlanMean only

  static Estimand mean(int a) {
    Estimand e;
    e.kind = Kind::Mean;
    e.action = a;
    return e;
  }
  static Estimand ace() { return {}; }
  static Estimand plan_mean(Plan p) {
    Estimand e;
    e.kind = Kind::PlanMean;
    e.plan = std::move(p);
    return e;
  }
  static Estimand att() {
    Estimand e;
    e.kind = Kind::Att;
    return e;
  }
  static Estimand natural_course() {
    Estimand e;
    e.kind = Kind::NaturalCourse;
    return e;
  }

  std::string describe() const {
    switch (kind) {
      case Kind::Mean: return action == 1 ? "E[Y^1]" : "E[Y^0]";
      case Kind::Ace: return "ACE";
      case Kind::PlanMean: return "E[Y^g*] (plan '" + plan->label + "')";
      case Kind::Att: return "ATT";
      case Kind::NaturalCourse: return "natural course";
    }
    return "";
  }
};

struct EstimateDiagnostics {
  double min_propensity = 1.0;  ///< smallest propensity any required arm relied on
  double max_weight = 1.0;      ///< largest weight applied to an outcome
  std::optional<double> truncation;
  std::string provenance;  ///< restriction trail of the data the estimate used
};

struct Estimate {
  double value = 0.0;
  std::string estimand;
  std::string method;
  std::int64_t n_used = 0;
  EstimateDiagnostics diagnostics;
};

struct BoundsResult {
  double lower = 0.0;
  double upper = 0.0;
  double width = 0.0;
  double violating_mass = 0.0;  ///< probability mass of the substituted cells
  std::string estimand;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  int replicates = 0;
  std::uint64_t seed = 0;
  int failed = 0;  ///< replicates where the estimator raised an error
  double level = 0.95;
};

namespace detail {

/// Plan weight on action 1 at z; the action-0 weight is its complement.
inline std::function<double(const Pattern&)> plan_weight(const Estimand& e) {
  switch (e.kind) {
    case Estimand::Kind::Mean: {
      double w = e.action == 1 ? 1.0 : 0.0;
      return [w](const Pattern&) { return w; };
    }
    case Estimand::Kind::PlanMean: {
      const Plan& p = *e.plan;
      return [&p](const Pattern& z) { return p.assign_probability(z); };
    }
    default:
      throw Error(ErrorCode::InvalidArgument,
                  "estimand '" + e.describe() + "' is not a weighted mean");
  }
}

/// Plug-in standardization of one plan-weighted mean over the cells.
inline double plugin_mean(const StratumTable& table,
                          const std::function<double(const Pattern&)>& g1,
                          EstimateDiagnostics& diag) {
  const double n = static_cast<double>(table.n);
  double total = 0.0;
  for (const auto& [z, c] : table.cells) {
    double w1 = g1(z);
    double w[2] = {1.0 - w1, w1};
    double cell = 0.0;
    for (int a = 0; a < 2; ++a) {
      if (w[a] == 0.0) continue;
      if (c.n_by_arm[a] == 0)
        throw Error(ErrorCode::UndefinedCellMean,
                    "no units with A=" + std::to_string(a) + " in stratum " +
                        pattern_to_string(z, table.covariate_names) +
                        "; its outcome mean is undefined",
                    z, a);
      double mean_a = c.outcome_sum_by_arm[a] / static_cast<double>(c.n_by_arm[a]);
      cell += w[a] * mean_a;
      double p_hat = static_cast<double>(c.n_by_arm[a]) / static_cast<double>(c.n_total);
      diag.min_propensity = std::min(diag.min_propensity, p_hat);
      diag.max_weight = std::max(diag.max_weight, w[a] / p_hat);
    }
    total += (static_cast<double>(c.n_total) / n) * cell;
  }
  return total;
}

}  // namespace detail

/// Standardization: the outcome mean of each required arm within each cell,
/// averaged over the cell distribution. The ACE is computed as the all-treat
/// plan mean minus the all-control plan mean.
inline Estimate gcomp_plugin(const StratumTable& table, const Estimand& estimand) {
  if (table.cells.empty() || table.n == 0)
    throw Error(ErrorCode::EmptyTable, "cannot estimate from an empty stratum table");

  Estimate est;
  est.estimand = estimand.describe();
  est.method = "gcomp";
  est.n_used = table.n;
  est.diagnostics.min_propensity = 1.0;
  est.diagnostics.max_weight = 1.0;

  if (estimand.kind == Estimand::Kind::Ace) {
    auto treat = detail::plan_weight(Estimand::mean(1));
    auto control = detail::plan_weight(Estimand::mean(0));
    est.value = detail::plugin_mean(table, treat, est.diagnostics) -
                detail::plugin_mean(table, control, est.diagnostics);
  } else {
    est.value = detail::plugin_mean(table, detail::plan_weight(estimand), est.diagnostics);
  }
  return est;
}

struct IpwOptions {
  std::optional<double> truncation;  ///< clamp propensities to [b, 1-b]
  bool hajek = false;                ///< normalize by the weight sum instead of n
};

/// Inverse probability weighting, Horvitz-Thompson form: each required-arm
/// outcome is weighted by (plan weight)/(propensity of the unit's own arm)
/// and the sum divided by n. The Hajek option divides by the realized weight
/// sum instead; it is a common variant, not the primary display.
inline Estimate ipw_estimate(const Dataset& data, const PropensityEstimator& ps,
                             const Estimand& estimand, const IpwOptions& options = {}) {
  if (data.records.empty()) throw Error(ErrorCode::EmptyData, "cannot estimate from empty data");
  if (options.truncation && !(*options.truncation > 0.0 && *options.truncation <= 0.5))
    throw Error(ErrorCode::InvalidArgument, "truncation bound must lie in (0, 0.5]");
  if (estimand.kind == Estimand::Kind::Att || estimand.kind == Estimand::Kind::NaturalCourse)
    throw Error(ErrorCode::InvalidArgument,
                "estimand '" + estimand.describe() + "' has a dedicated estimator");

  const bool ace = estimand.kind == Estimand::Kind::Ace;
  auto g1 = ace ? std::function<double(const Pattern&)>([](const Pattern&) { return 1.0; })
                : detail::plan_weight(estimand);

  Estimate est;
  est.estimand = estimand.describe();
  est.method = options.hajek ? "ipw-hajek" : "ipw";
  est.n_used = static_cast<std::int64_t>(data.records.size());
  est.diagnostics.truncation = options.truncation;
  est.diagnostics.provenance = data.provenance;
  est.diagnostics.min_propensity = 1.0;
  est.diagnostics.max_weight = 0.0;

  double sum[2] = {0.0, 0.0};   // weighted outcome sums per arm
  double wsum[2] = {0.0, 0.0};  // realized weight sums per arm
  for (const auto& r : data.records) {
    double p1 = ps.predict(r.covariates);
    if (options.truncation) {
      double b = *options.truncation;
      p1 = std::clamp(p1, b, 1.0 - b);
    }
    double p[2] = {1.0 - p1, p1};
    double w1 = g1(r.covariates);
    // For the ACE both arms are required (it is a contrast of the two
    // single-arm means); otherwise w0 is the plan's complement weight.
    double w[2] = {ace ? 1.0 : 1.0 - w1, w1};
    for (int a = 0; a < 2; ++a) {
      if (w[a] == 0.0) continue;
      if (p[a] == 0.0)
        throw Error(ErrorCode::PositivityViolation,
                    "estimated Pr(A=" + std::to_string(a) + "|Z=" +
                        pattern_to_string(r.covariates, data.covariate_names) +
                        ") is zero; the weighted estimator divides by zero",
                    r.covariates, a);
      est.diagnostics.min_propensity = std::min(est.diagnostics.min_propensity, p[a]);
      if (r.action == a) {
        double weight = w[a] / p[a];
        est.diagnostics.max_weight = std::max(est.diagnostics.max_weight, weight);
        sum[a] += weight * r.outcome;
        wsum[a] += weight;
      }
    }
  }

  const double n = static_cast<double>(data.records.size());
  if (options.hajek) {
    auto normalized = [&](int a) {
      if (wsum[a] == 0.0)
        throw Error(ErrorCode::InvalidArgument,
                    "normalized weights for arm " + std::to_string(a) + " sum to zero");
      return sum[a] / wsum[a];
    };
    if (ace) est.value = normalized(1) - normalized(0);
    else if (estimand.kind == Estimand::Kind::Mean) est.value = normalized(estimand.action);
    else {
      if (wsum[0] + wsum[1] == 0.0)
        throw Error(ErrorCode::InvalidArgument, "normalized weights sum to zero");
      est.value = (sum[0] + sum[1]) / (wsum[0] + wsum[1]);
    }
  } else {
    if (ace) est.value = sum[1] / n - sum[0] / n;
    else if (estimand.kind == Estimand::Kind::Mean) est.value = sum[estimand.action] / n;
    else est.value = (sum[0] + sum[1]) / n;
  }
  return est;
}

/// Average treatment effect in the treated: the treated outcome mean minus
/// the untreated outcome mean standardized to the treated covariate
/// distribution. Needs untreated units only where treated units exist.
/// The construction is the standard one; the source material names the
/// estimand without displaying a formula.
inline Estimate att_estimate(const StratumTable& table) {
  if (table.cells.empty() || table.n == 0)
    throw Error(ErrorCode::EmptyTable, "cannot estimate from an empty stratum table");
  std::int64_t n_treated = 0;
  double treated_outcome_sum = 0.0;
  for (const auto& [z, c] : table.cells) {
    n_treated += c.n_by_arm[1];
    treated_outcome_sum += c.outcome_sum_by_arm[1];
  }
  if (n_treated == 0) throw Error(ErrorCode::NoTreatedUnits, "no units with A=1 in the data");

  Estimate est;
  est.estimand = "ATT";
  est.method = "att";
  est.n_used = table.n;
  est.diagnostics.min_propensity = 1.0;
  est.diagnostics.max_weight = 0.0;

  double counterfactual = 0.0;
  for (const auto& [z, c] : table.cells) {
    if (c.n_by_arm[1] == 0) continue;
    if (c.n_by_arm[0] == 0)
      throw Error(ErrorCode::UndefinedCellMean,
                  "stratum " + pattern_to_string(z, table.covariate_names) +
                      " has treated units but no untreated units; its A=0 mean is undefined",
                  z, 0);
    double mean0 = c.outcome_sum_by_arm[0] / static_cast<double>(c.n_by_arm[0]);
    counterfactual +=
        (static_cast<double>(c.n_by_arm[1]) / static_cast<double>(n_treated)) * mean0;
    double p1 = static_cast<double>(c.n_by_arm[1]) / static_cast<double>(c.n_total);
    double p0 = 1.0 - p1;
    est.diagnostics.min_propensity = std::min(est.diagnostics.min_propensity, p0);
    est.diagnostics.max_weight = std::max(est.diagnostics.max_weight, p1 / p0);
  }
  est.value = treated_outcome_sum / static_cast<double>(n_treated) - counterfactual;
  return est;
}

/// Mean outcome under the observed action distribution: the sample mean of Y.
inline Estimate natural_course(const Dataset& data) {
  if (data.records.empty()) throw Error(ErrorCode::EmptyData, "cannot estimate from empty data");
  double sum = 0.0;
  for (const auto& r : data.records) sum += r.outcome;
  Estimate est;
  est.value = sum / static_cast<double>(data.records.size());
  est.estimand = "natural course";
  est.method = "natural-course";
  est.n_used = static_cast<std::int64_t>(data.records.size());
  est.diagnostics.provenance = data.provenance;
  return est;
}

namespace detail {

struct MeanBound {
  double lower = 0.0;
  double upper = 0.0;
  double missing_mass = 0.0;
};

inline MeanBound bound_mean(const StratumTable& table, int a,
                            std::pair<double, double> outcome_range) {
  const double n = static_cast<double>(table.n);
  double identified = 0.0, mass = 0.0;
  for (const auto& [z, c] : table.cells) {
    double share = static_cast<double>(c.n_total) / n;
    if (c.n_by_arm[a] == 0) {
      mass += share;
    } else {
      identified += share * (c.outcome_sum_by_arm[a] / static_cast<double>(c.n_by_arm[a]));
    }
  }
  return {identified + mass * outcome_range.first, identified + mass * outcome_range.second, mass};
}

}  // namespace detail

/// Worst-case bounds on a counterfactual mean or the ACE: cells whose
/// required arm is empty contribute their full outcome range instead of a
/// point mean. Identified cells stay point-identified. The construction is
/// the standard one; the source material cites bounds without displaying
/// them.
inline BoundsResult manski_bounds(const StratumTable& table, const Estimand& estimand,
                                  std::pair<double, double> outcome_range) {
  if (table.cells.empty() || table.n == 0)
    throw Error(ErrorCode::EmptyTable, "cannot bound an estimand on an empty stratum table");
  if (!(outcome_range.first <= outcome_range.second))
    throw Error(ErrorCode::InvalidArgument, "outcome range must satisfy y_min <= y_max");

  BoundsResult b;
  b.estimand = estimand.describe();
  if (estimand.kind == Estimand::Kind::Mean) {
    auto m = detail::bound_mean(table, estimand.action, outcome_range);
    b.lower = m.lower;
    b.upper = m.upper;
    b.violating_mass = m.missing_mass;
  } else if (estimand.kind == Estimand::Kind::Ace) {
    auto m1 = detail::bound_mean(table, 1, outcome_range);
    auto m0 = detail::bound_mean(table, 0, outcome_range);
    b.lower = m1.lower - m0.upper;
    b.upper = m1.upper - m0.lower;
    b.violating_mass = m1.missing_mass + m0.missing_mass;
  } else {
    throw Error(ErrorCode::InvalidArgument,
                "bounds are defined for counterfactual means and the ACE only");
  }
  b.width = b.upper - b.lower;
  return b;
}

/// Nonparametric bootstrap percentile interval. Replicate r resamples n
/// units with replacement from the stream derive_seed(seed, r), so replicates
/// are independent and order-insensitive. Replicates where the recipe raises
/// an error are counted; exceeding the failure cap aborts.
inline Interval bootstrap_ci(const Dataset& data,
                             const std::function<double(const Dataset&)>& recipe, int replicates,
                             std::uint64_t seed, double level = 0.95, double failure_cap = 0.1) {
  if (replicates < 1)
    throw Error(ErrorCode::InvalidArgument, "replicates must be at least 1");
  if (!(level > 0.0 && level < 1.0))
    throw Error(ErrorCode::InvalidLevel, "coverage level must lie in (0,1)");
  if (!(failure_cap >= 0.0 && failure_cap <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "failure cap must lie in [0,1]");
  if (data.records.empty()) throw Error(ErrorCode::EmptyData, "cannot resample empty data");

  const std::size_t n = data.records.size();
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(replicates));
  int failed = 0;
  for (int rep = 0; rep < replicates; ++rep) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(rep)));
    Dataset resample;
    resample.covariate_names = data.covariate_names;
    resample.covariate_levels = data.covariate_levels;
    resample.outcome_range = data.outcome_range;
    resample.provenance = data.provenance.empty() ? "bootstrap resample"
                                                  : data.provenance + "; bootstrap resample";
    resample.records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) resample.records.push_back(data.records[rng.below(n)]);
    try {
      values.push_back(recipe(resample));
    } catch (const Error&) {
      ++failed;
    }
  }
  if (failed > failure_cap * replicates || values.empty())
    throw Error(ErrorCode::TooManyFailedReplicates,
                std::to_string(failed) + " of " + std::to_string(replicates) +
                    " bootstrap replicates failed (cap " + std::to_string(failure_cap) + ")");

  std::sort(values.begin(), values.end());
  auto percentile = [&](double q) {
    double h = q * static_cast<double>(values.size() - 1);
    std::size_t lo = static_cast<std::size_t>(h);
    std::size_t hi = std::min(lo + 1, values.size() - 1);
    double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
  };
  Interval iv;
  iv.lower = percentile((1.0 - level) / 2.0);
  iv.upper = percentile(1.0 - (1.0 - level) / 2.0);
  iv.replicates = replicates;
  iv.seed = seed;
  iv.failed = failed;
  iv.level = level;
  return iv;
}

}  // namespace positivity
