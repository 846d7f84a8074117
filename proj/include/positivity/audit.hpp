#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "positivity/dataset.hpp"
#include "positivity/errors.hpp"
#include "positivity/plan.hpp"

namespace positivity {

struct PositivityConfig {
  /// Near-violation threshold. Advisory: flags never block estimation.
  double epsilon = 0.01;

  void validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0))
      throw Error(ErrorCode::InvalidArgument, "epsilon must lie in (0,1)");
  }
};

/// Declared population-level treatment probabilities, one entry per pattern.
/// An arm whose declared probability is exactly zero is a structural zero:
/// that action is impossible for the pattern, not merely unlikely.
struct StructuralSpec {
  std::map<Pattern, double> pr_a1;
  std::string label;
  std::vector<std::string> covariate_names;

  double declared(const Pattern& z, int arm) const {
    auto it = pr_a1.find(z);
    if (it == pr_a1.end())
      throw Error(ErrorCode::SpecPatternMissing,
                  "spec '" + label + "' does not cover pattern " +
                      pattern_to_string(z, covariate_names),
                  z);
    return arm == 1 ? it->second : 1.0 - it->second;
  }

  bool structural_zero(const Pattern& z, int arm) const { return declared(z, arm) == 0.0; }

  void validate() const {
    for (const auto& [z, p] : pr_a1)
      if (!(p >= 0.0 && p <= 1.0))
        throw Error(ErrorCode::InvalidSpec,
                    "declared probability outside [0,1] at " + pattern_to_string(z, covariate_names));
  }

  /// The bundled reference populations. S=1 declares action 0 structurally
  /// impossible at (V=0,W=0); S=2 declares Pr(A=0|V=0,W=0) = 0.01.
  static StructuralSpec table1_s1() {
    StructuralSpec s;
    s.label = "table1-s1";
    s.covariate_names = {"V", "W"};
    s.pr_a1[{0, 0}] = 1.0;
    s.pr_a1[{0, 1}] = 75.0 / 100.0;
    s.pr_a1[{1, 0}] = 38.0 / 64.0;
    s.pr_a1[{1, 1}] = 17.0 / 67.0;
    return s;
  }
  static StructuralSpec table1_s2() {
    StructuralSpec s = table1_s1();
    s.label = "table1-s2";
    s.pr_a1[{0, 0}] = 0.99;
    return s;
  }
};

/// Structural-spec file: covariate columns plus `pr_a1`, whose value is a
/// probability or one of the markers `zero_a1` (action 1 impossible) /
/// `zero_a0` (action 0 impossible).
inline StructuralSpec load_structural_spec_csv(std::istream& in,
                                               const std::vector<std::string>& covariate_names,
                                               const std::string& source_name = "<stream>") {
  csv::Table t = csv::read(in, source_name);
  std::vector<int> zcols;
  for (const auto& name : covariate_names) zcols.push_back(t.require_column(name));
  int pcol = t.require_column("pr_a1");

  StructuralSpec s;
  s.label = source_name;
  s.covariate_names = covariate_names;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    std::string where = source_name + ": row " + std::to_string(i + 1);
    Pattern z;
    for (std::size_t j = 0; j < zcols.size(); ++j)
      z.push_back(detail::parse_level_code(row[zcols[j]], where));
    const std::string v = csv::trim(row[pcol]);
    double p;
    if (v == "zero_a1") p = 0.0;
    else if (v == "zero_a0") p = 1.0;
    else p = csv::parse_double(v, where);
    s.pr_a1[z] = p;
  }
  s.validate();
  return s;
}

inline StructuralSpec load_structural_spec_csv(const std::string& path,
                                               const std::vector<std::string>& covariate_names) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open file: " + path);
  return load_structural_spec_csv(in, covariate_names, path);
}

// ---------------------------------------------------------------------------
// Reports

struct CellFinding {
  Pattern pattern;
  std::int64_t n_total = 0;
  std::array<std::int64_t, 2> n_by_arm = {0, 0};
  /// Empirical propensities (sample audit) or declared probabilities
  /// (structural and plan audits), indexed by arm.
  std::array<double, 2> propensity = {0.0, 0.0};
  std::array<bool, 2> exact_violation = {false, false};
  std::array<bool, 2> near_violation = {false, false};
  std::array<bool, 2> deterministic_violation = {false, false};
  std::optional<double> plan_value;  // g*(z), plan audits only
  std::string classification;  // "deterministic" | "stochastic" | "indeterminate" | ""
};

struct PositivityReport {
  enum class Kind { Sample, Structural, Plan };

  Kind kind = Kind::Sample;
  double epsilon = 0.0;
  std::vector<CellFinding> findings;  // lexicographic pattern order
  bool violated = false;
  std::string note;
  std::string population;  // spec label, when a spec was involved
  std::string plan_label;

  std::string verdict() const { return violated ? "violated" : "satisfied"; }

  const CellFinding& finding(const Pattern& z) const {
    for (const auto& f : findings)
      if (f.pattern == z) return f;
    throw Error(ErrorCode::UnknownStratum, "no finding for " + pattern_to_string(z), z);
  }
};

// ---------------------------------------------------------------------------
// Operations

/// Exact sample propensity for one cell and arm. Arm 0 is returned as the
/// complement of arm 1 so the two always sum to exactly 1.
inline double empirical_propensity(const StratumTable& table, const Pattern& z, int arm) {
  const CellCounts& c = table.at(z);
  double p1 = static_cast<double>(c.n_by_arm[1]) / static_cast<double>(c.n_total);
  return arm == 1 ? p1 : 1.0 - p1;
}

/// Audit the sample condition: every observed pattern must show both arms.
inline PositivityReport audit_sample(const StratumTable& table, const PositivityConfig& config,
                                     const StructuralSpec* spec = nullptr) {
  config.validate();
  if (table.cells.empty() || table.n == 0)
    throw Error(ErrorCode::EmptyTable, "cannot audit an empty stratum table");

  PositivityReport rep;
  rep.kind = PositivityReport::Kind::Sample;
  rep.epsilon = config.epsilon;
  if (spec) rep.population = spec->label;

  bool any_indeterminate = false;
  for (const auto& [z, c] : table.cells) {
    CellFinding f;
    f.pattern = z;
    f.n_total = c.n_total;
    f.n_by_arm = c.n_by_arm;
    double p1 = static_cast<double>(c.n_by_arm[1]) / static_cast<double>(c.n_total);
    f.propensity = {1.0 - p1, p1};
    for (int a = 0; a < 2; ++a) {
      f.exact_violation[a] = c.n_total > 0 && c.n_by_arm[a] == 0;
      f.near_violation[a] = f.propensity[a] > 0.0 && f.propensity[a] < config.epsilon;
    }
    if (f.exact_violation[0] || f.exact_violation[1]) {
      rep.violated = true;
      if (spec) {
        int a = f.exact_violation[0] ? 0 : 1;
        f.classification = spec->structural_zero(z, a) ? "deterministic" : "stochastic";
      } else {
        f.classification = "indeterminate";
        any_indeterminate = true;
      }
    }
    rep.findings.push_back(std::move(f));
  }
  if (any_indeterminate)
    rep.note =
        "empty-arm cells are indeterminate: distinguishing deterministic from "
        "stochastic violations requires background knowledge";
  return rep;
}

/// Audit the declared population condition: every arm of every pattern must
/// have declared probability >= epsilon. When a sample table is supplied, its
/// empty-arm cells are classified against the spec.
inline PositivityReport audit_structural(const StructuralSpec& spec, const PositivityConfig& config,
                                         const StratumTable* table = nullptr) {
  config.validate();
  spec.validate();
  if (table)
    for (const auto& [z, c] : table->cells)
      if (!spec.pr_a1.count(z))
        throw Error(ErrorCode::SpecPatternMissing,
                    "spec '" + spec.label + "' does not cover observed pattern " +
                        pattern_to_string(z, spec.covariate_names),
                    z);

  PositivityReport rep;
  rep.kind = PositivityReport::Kind::Structural;
  rep.epsilon = config.epsilon;
  rep.population = spec.label;

  for (const auto& [z, p1] : spec.pr_a1) {
    CellFinding f;
    f.pattern = z;
    f.propensity = {1.0 - p1, p1};
    for (int a = 0; a < 2; ++a) {
      f.deterministic_violation[a] = f.propensity[a] < config.epsilon;
      if (f.deterministic_violation[a]) rep.violated = true;
    }
    if (table) {
      auto it = table->cells.find(z);
      if (it != table->cells.end()) {
        f.n_total = it->second.n_total;
        f.n_by_arm = it->second.n_by_arm;
        for (int a = 0; a < 2; ++a)
          if (f.n_total > 0 && f.n_by_arm[a] == 0) {
            f.exact_violation[a] = true;
            f.classification = spec.structural_zero(z, a) ? "deterministic" : "stochastic";
          }
      }
    }
    rep.findings.push_back(std::move(f));
  }
  return rep;
}

/// Plan-specific condition: the arms a plan can assign must have declared
/// probability >= epsilon. Deterministic plans constrain only the prescribed
/// arm; probabilistic plans constrain arm 1 where g* > 0 and arm 0 where
/// g* < 1 (the two-sided reading).
inline PositivityReport check_plan_positivity(const StructuralSpec& spec, const Plan& plan,
                                              const PositivityConfig& config) {
  config.validate();
  spec.validate();

  PositivityReport rep;
  rep.kind = PositivityReport::Kind::Plan;
  rep.epsilon = config.epsilon;
  rep.population = spec.label;
  rep.plan_label = plan.label;

  for (const auto& [z, p1] : spec.pr_a1) {
    double g = plan.assign_probability(z);  // throws PlanPatternMissing if undefined
    CellFinding f;
    f.pattern = z;
    f.propensity = {1.0 - p1, p1};
    f.plan_value = g;
    if (plan.kind == Plan::Kind::Deterministic) {
      int a = g > 0.5 ? 1 : 0;
      f.deterministic_violation[a] = f.propensity[a] < config.epsilon;
    } else {
      if (g > 0.0) f.deterministic_violation[1] = f.propensity[1] < config.epsilon;
      if (g < 1.0) f.deterministic_violation[0] = f.propensity[0] < config.epsilon;
    }
    if (f.deterministic_violation[0] || f.deterministic_violation[1]) rep.violated = true;
    rep.findings.push_back(std::move(f));
  }
  return rep;
}

}  // namespace positivity
