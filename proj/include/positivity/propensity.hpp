#pragma once

#include <string>
#include <variant>

#include "positivity/audit.hpp"
#include "positivity/dataset.hpp"
#include "positivity/forest.hpp"
#include "positivity/logistic.hpp"
#include "positivity/tree.hpp"

namespace positivity {

/// One interface over the four propensity models: z -> Pr(A=1|z). The
/// empirical variant reproduces the sample cell ratios exactly (and refuses
/// unseen patterns); the model variants extrapolate.
struct PropensityEstimator {
  std::variant<StratumTable, LogisticFit, TreeFit, ForestFit> model;

  static PropensityEstimator empirical(StratumTable table) { return {std::move(table)}; }
  static PropensityEstimator logistic(LogisticFit fit) { return {std::move(fit)}; }
  static PropensityEstimator tree(TreeFit fit) { return {std::move(fit)}; }
  static PropensityEstimator forest(ForestFit fit) { return {std::move(fit)}; }

  double predict(const Pattern& z) const {
    if (const auto* t = std::get_if<StratumTable>(&model)) return empirical_propensity(*t, z, 1);
    if (const auto* l = std::get_if<LogisticFit>(&model)) return l->predict(z);
    if (const auto* tr = std::get_if<TreeFit>(&model)) return tr->predict(z);
    return std::get<ForestFit>(model).predict(z);
  }

  std::string kind() const {
    switch (model.index()) {
      case 0: return "empirical";
      case 1: return "logistic";
      case 2: return "tree";
      default: return "forest";
    }
  }

  const LogisticFit* as_logistic() const { return std::get_if<LogisticFit>(&model); }
  const TreeFit* as_tree() const { return std::get_if<TreeFit>(&model); }
  const ForestFit* as_forest() const { return std::get_if<ForestFit>(&model); }
};

}  // namespace positivity
