#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "positivity/dataset.hpp"
#include "positivity/errors.hpp"

namespace positivity {

namespace detail {

/// Aggregated counts for one covariate pattern: units and treated units.
struct TreeCell {
  Pattern z;
  std::int64_t n = 0;
  std::int64_t treated = 0;
};

/// A candidate split's summed within-child impurity, kept as the exact
/// rational num/den with den > 0 so ties compare without rounding.
/// The score is sum_child t*(n-t)/n, a monotone transform of the Gini
/// decrease, so minimizing it maximizes the decrease.
struct GiniScore {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static GiniScore split(std::int64_t t_l, std::int64_t n_l, std::int64_t t_r, std::int64_t n_r) {
    GiniScore s;
    s.num = t_l * (n_l - t_l) * n_r + t_r * (n_r - t_r) * n_l;
    s.den = n_l * n_r;
    return s;
  }
  static GiniScore single(std::int64_t t, std::int64_t n) { return {t * (n - t), n}; }

  bool operator<(const GiniScore& o) const {
    return static_cast<__int128>(num) * o.den < static_cast<__int128>(o.num) * den;
  }
};

}  // namespace detail

struct TreeNode {
  int covariate = -1;  ///< split covariate index; -1 marks a leaf
  int level = -1;      ///< units with z[covariate] == level go left
  int left = -1;
  int right = -1;
  std::int64_t n = 0;
  std::int64_t treated = 0;
  double probability = 0.0;  ///< treated / n at this node

  bool is_leaf() const { return covariate < 0; }
};

/// A greedy binary classification tree over covariate patterns, splitting one
/// level against the rest and predicting the leaf treatment frequency.
struct TreeFit {
  std::vector<TreeNode> nodes;  ///< nodes[0] is the root
  std::int64_t min_leaf = 1;

  const TreeNode& leaf_for(const Pattern& z) const {
    int i = 0;
    while (!nodes[i].is_leaf()) {
      const TreeNode& nd = nodes[i];
      i = z.at(static_cast<std::size_t>(nd.covariate)) == nd.level ? nd.left : nd.right;
    }
    return nodes[i];
  }

  double predict(const Pattern& z) const { return leaf_for(z).probability; }

  std::size_t n_leaves() const {
    std::size_t k = 0;
    for (const auto& nd : nodes)
      if (nd.is_leaf()) ++k;
    return k;
  }
};

namespace detail {

inline int grow_tree(TreeFit& fit, std::vector<TreeCell> cells, const std::vector<int>& levels,
                     std::int64_t min_leaf) {
  std::int64_t n = 0, t = 0;
  for (const auto& c : cells) {
    n += c.n;
    t += c.treated;
  }

  int index = static_cast<int>(fit.nodes.size());
  fit.nodes.push_back({});
  fit.nodes[index].n = n;
  fit.nodes[index].treated = t;
  fit.nodes[index].probability = static_cast<double>(t) / static_cast<double>(n);

  GiniScore parent = GiniScore::single(t, n);
  bool found = false;
  GiniScore best;
  int best_covariate = -1, best_level = -1;
  // Scan covariates and levels in ascending order; a later candidate wins
  // only on a strictly smaller score, so ties keep the earliest candidate.
  for (std::size_t j = 0; j < levels.size(); ++j) {
    for (int code = 0; code < levels[j]; ++code) {
      std::int64_t n_l = 0, t_l = 0;
      for (const auto& c : cells) {
        if (c.z[j] == code) {
          n_l += c.n;
          t_l += c.treated;
        }
      }
      std::int64_t n_r = n - n_l, t_r = t - t_l;
      if (n_l < min_leaf || n_r < min_leaf) continue;
      GiniScore s = GiniScore::split(t_l, n_l, t_r, n_r);
      if (!(s < parent)) continue;
      if (!found || s < best) {
        found = true;
        best = s;
        best_covariate = static_cast<int>(j);
        best_level = code;
      }
    }
  }
  if (!found) return index;

  std::vector<TreeCell> left, right;
  for (auto& c : cells) {
    (c.z[static_cast<std::size_t>(best_covariate)] == best_level ? left : right)
        .push_back(std::move(c));
  }
  cells.clear();
  fit.nodes[index].covariate = best_covariate;
  fit.nodes[index].level = best_level;
  int l = grow_tree(fit, std::move(left), levels, min_leaf);
  fit.nodes[index].left = l;
  int r = grow_tree(fit, std::move(right), levels, min_leaf);
  fit.nodes[index].right = r;
  return index;
}

inline TreeFit fit_tree_from_cells(std::vector<TreeCell> cells, const std::vector<int>& levels,
                                   std::int64_t min_leaf) {
  if (min_leaf < 1)
    throw Error(ErrorCode::InvalidArgument,
                "min_leaf must be at least 1, got " + std::to_string(min_leaf));
  if (cells.empty()) throw Error(ErrorCode::EmptyData, "cannot fit a tree on empty data");
  TreeFit fit;
  fit.min_leaf = min_leaf;
  grow_tree(fit, std::move(cells), levels, min_leaf);
  return fit;
}

}  // namespace detail

inline TreeFit fit_tree(const Dataset& data, std::int64_t min_leaf = 1) {
  std::vector<detail::TreeCell> cells;
  StratumTable strata = build_strata(data);
  for (const auto& [z, c] : strata.cells) cells.push_back({z, c.n_total, c.n_by_arm[1]});
  return detail::fit_tree_from_cells(std::move(cells), data.covariate_levels, min_leaf);
}

}  // namespace positivity
