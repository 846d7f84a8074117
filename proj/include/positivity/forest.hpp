#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "positivity/dataset.hpp"
#include "positivity/errors.hpp"
#include "positivity/rng.hpp"
#include "positivity/tree.hpp"

namespace positivity {

struct ForestFit {
  std::vector<TreeFit> trees;
  std::uint64_t seed = 0;
  std::int64_t min_leaf = 1;
  bool bootstrap = true;

  /// Mean of the per-tree predictions. When every tree predicts the same
  /// value the mean is returned without dividing, so a forest of identical
  /// trees agrees with a single tree bit for bit.
  double predict(const Pattern& z) const {
    double first = trees.front().predict(z);
    bool all_equal = true;
    double sum = 0.0;
    for (const auto& tr : trees) {
      double p = tr.predict(z);
      if (p != first) all_equal = false;
      sum += p;
    }
    if (all_equal) return first;
    return sum / static_cast<double>(trees.size());
  }
};

/// Fits `n_trees` greedy trees. With bootstrap on, tree i is grown on a
/// with-replacement resample of size n drawn from the stream
/// derive_seed(seed, i), so any subset of trees can be rebuilt independently.
inline ForestFit fit_forest(const Dataset& data, int n_trees, std::int64_t min_leaf,
                            std::uint64_t seed, bool bootstrap = true) {
  if (n_trees < 1)
    throw Error(ErrorCode::InvalidArgument,
                "n_trees must be at least 1, got " + std::to_string(n_trees));
  if (data.records.empty()) throw Error(ErrorCode::EmptyData, "cannot fit a forest on empty data");

  ForestFit forest;
  forest.seed = seed;
  forest.min_leaf = min_leaf;
  forest.bootstrap = bootstrap;
  const std::size_t n = data.records.size();

  for (int i = 0; i < n_trees; ++i) {
    if (!bootstrap) {
      forest.trees.push_back(fit_tree(data, min_leaf));
      continue;
    }
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    std::map<Pattern, std::pair<std::int64_t, std::int64_t>> tally;  // z -> (n, treated)
    for (std::size_t k = 0; k < n; ++k) {
      const UnitRecord& rec = data.records[rng.below(n)];
      auto& [cnt, tr] = tally[rec.covariates];
      ++cnt;
      tr += rec.action;
    }
    std::vector<detail::TreeCell> cells;
    cells.reserve(tally.size());
    for (const auto& [z, ct] : tally) cells.push_back({z, ct.first, ct.second});
    forest.trees.push_back(
        detail::fit_tree_from_cells(std::move(cells), data.covariate_levels, min_leaf));
  }
  return forest;
}

}  // namespace positivity
