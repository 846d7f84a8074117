#pragma once

#include <map>
#include <optional>
#include <string>

#include "positivity/csv.hpp"
#include "positivity/dataset.hpp"
#include "positivity/errors.hpp"

namespace positivity {

/// An action-assignment rule g*(z): deterministic (per-pattern action) or
/// probabilistic (per-pattern probability of action 1). Evaluating a pattern
/// the plan does not cover throws PlanPatternMissing.
struct Plan {
  enum class Kind { Deterministic, Probabilistic };

  Kind kind = Kind::Deterministic;
  std::map<Pattern, double> by_pattern;
  std::optional<double> fallback;  // applies to patterns not listed
  std::string label;

  /// Probability the plan assigns to action 1 at z. Deterministic plans
  /// return exactly 0.0 or 1.0.
  double assign_probability(const Pattern& z) const {
    auto it = by_pattern.find(z);
    if (it != by_pattern.end()) return it->second;
    if (fallback) return *fallback;
    throw Error(ErrorCode::PlanPatternMissing,
                "plan '" + label + "' is not defined at " + pattern_to_string(z), z);
  }

  static Plan all_treat() {
    return {Kind::Deterministic, {}, 1.0, "all-treat"};
  }
  static Plan all_control() {
    return {Kind::Deterministic, {}, 0.0, "all-control"};
  }
  static Plan fixed_action(int a) { return a == 1 ? all_treat() : all_control(); }
};

/// Plan file: covariate columns plus either an `action` column (deterministic,
/// values 0/1) or a `pr_a1` column (probabilistic, values in [0,1]).
inline Plan load_plan_csv(std::istream& in, const std::vector<std::string>& covariate_names,
                          const std::string& source_name = "<stream>") {
  csv::Table t = csv::read(in, source_name);
  std::vector<int> zcols;
  for (const auto& name : covariate_names) zcols.push_back(t.require_column(name));
  int action_col = t.column("action");
  int prob_col = t.column("pr_a1");
  if ((action_col < 0) == (prob_col < 0))
    throw Error(ErrorCode::InvalidArgument,
                source_name + ": plan file needs exactly one of the columns 'action' or 'pr_a1'");

  Plan p;
  p.kind = action_col >= 0 ? Plan::Kind::Deterministic : Plan::Kind::Probabilistic;
  p.label = source_name;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    std::string where = source_name + ": row " + std::to_string(i + 1);
    Pattern z;
    for (std::size_t j = 0; j < zcols.size(); ++j)
      z.push_back(detail::parse_level_code(row[zcols[j]], where));
    double v;
    if (action_col >= 0) {
      long a = csv::parse_int(row[action_col], where);
      if (a != 0 && a != 1)
        throw Error(ErrorCode::InvalidArgument, where + ": plan action must be 0 or 1");
      v = static_cast<double>(a);
    } else {
      v = csv::parse_double(row[prob_col], where);
      if (v < 0.0 || v > 1.0)
        throw Error(ErrorCode::InvalidArgument, where + ": plan probability outside [0,1]");
    }
    p.by_pattern[z] = v;
  }
  return p;
}

inline Plan load_plan_csv(const std::string& path, const std::vector<std::string>& covariate_names) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open file: " + path);
  return load_plan_csv(in, covariate_names, path);
}

}  // namespace positivity
