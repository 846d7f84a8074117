#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "positivity/audit.hpp"
#include "positivity/csv.hpp"
#include "positivity/dataset.hpp"
#include "positivity/errors.hpp"
#include "positivity/rng.hpp"

namespace positivity {

/// A fully specified target population over discrete covariate patterns:
/// pattern masses, per-pattern treatment probabilities, and per-pattern
/// per-arm outcome probabilities (binary outcomes).
struct PopulationSpec {
  struct Cell {
    Pattern z;
    double mass = 0.0;
    double pr_a1 = 0.5;
    std::array<double, 2> pr_y1 = {0.5, 0.5};  // Pr(Y=1 | A=a, z), indexed by arm
  };

  std::vector<Cell> cells;
  std::string label;
  std::vector<std::string> covariate_names;

  void validate() const {
    if (cells.empty()) throw Error(ErrorCode::InvalidSpec, "population spec declares no cells");
    double total = 0.0;
    for (const auto& c : cells) {
      if (c.z.size() != covariate_names.size())
        throw Error(ErrorCode::InvalidSpec, "pattern length mismatch in population spec");
      if (!(c.mass >= 0.0))
        throw Error(ErrorCode::InvalidSpec,
                    "negative mass at " + pattern_to_string(c.z, covariate_names));
      if (!(c.pr_a1 >= 0.0 && c.pr_a1 <= 1.0) || !(c.pr_y1[0] >= 0.0 && c.pr_y1[0] <= 1.0) ||
          !(c.pr_y1[1] >= 0.0 && c.pr_y1[1] <= 1.0))
        throw Error(ErrorCode::InvalidSpec,
                    "probability outside [0,1] at " + pattern_to_string(c.z, covariate_names));
      total += c.mass;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw Error(ErrorCode::InvalidSpec,
                  "pattern masses sum to " + csv::format_double(total) + ", expected 1");
    for (std::size_t i = 0; i < cells.size(); ++i)
      for (std::size_t j = i + 1; j < cells.size(); ++j)
        if (cells[i].z == cells[j].z)
          throw Error(ErrorCode::InvalidSpec,
                      "duplicate pattern " + pattern_to_string(cells[i].z, covariate_names));
  }

  /// The treatment margins as a structural spec, for audits/classification.
  StructuralSpec structural() const {
    StructuralSpec s;
    s.label = label;
    s.covariate_names = covariate_names;
    for (const auto& c : cells) s.pr_a1[c.z] = c.pr_a1;
    return s;
  }

  std::vector<int> covariate_level_counts() const {
    std::vector<int> levels(covariate_names.size(), 1);
    for (const auto& c : cells)
      for (std::size_t j = 0; j < c.z.size(); ++j)
        if (c.z[j] + 1 > levels[j]) levels[j] = c.z[j] + 1;
    return levels;
  }

  /// The bundled populations. Masses and treatment probabilities follow the
  /// reference table; outcome probabilities are the table's per-cell outcome
  /// means. The untreated outcome probability at (V=0,W=0) is unidentified
  /// there (no untreated units) and defaults to 0.5. table1-s1 makes A=0
  /// structurally impossible at (V=0,W=0); table1-s2 gives it probability
  /// 0.01 instead.
  static PopulationSpec table1_s1() {
    PopulationSpec s;
    s.label = "table1-s1";
    s.covariate_names = {"V", "W"};
    s.cells = {
        {{0, 0}, 15.0 / 246.0, 1.0, {0.5, 7.0 / 15.0}},
        {{0, 1}, 100.0 / 246.0, 75.0 / 100.0, {11.0 / 25.0, 15.0 / 75.0}},
        {{1, 0}, 64.0 / 246.0, 38.0 / 64.0, {11.0 / 26.0, 9.0 / 38.0}},
        {{1, 1}, 67.0 / 246.0, 17.0 / 67.0, {18.0 / 50.0, 7.0 / 17.0}},
    };
    return s;
  }
  static PopulationSpec table1_s2() {
    PopulationSpec s = table1_s1();
    s.label = "table1-s2";
    s.cells[0].pr_a1 = 0.99;
    return s;
  }
};

/// Population file: covariate columns plus mass, pr_a1, pr_y1_a0, pr_y1_a1.
/// pr_a1 accepts the structural-zero markers zero_a1 / zero_a0.
inline PopulationSpec load_population_csv(std::istream& in,
                                          const std::vector<std::string>& covariate_names,
                                          const std::string& source_name = "<stream>") {
  csv::Table t = csv::read(in, source_name);
  std::vector<int> zcols;
  for (const auto& name : covariate_names) zcols.push_back(t.require_column(name));
  int mcol = t.require_column("mass");
  int acol = t.require_column("pr_a1");
  int y0col = t.require_column("pr_y1_a0");
  int y1col = t.require_column("pr_y1_a1");

  PopulationSpec s;
  s.label = source_name;
  s.covariate_names = covariate_names;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    std::string where = source_name + ": row " + std::to_string(i + 1);
    PopulationSpec::Cell c;
    for (std::size_t j = 0; j < zcols.size(); ++j)
      c.z.push_back(detail::parse_level_code(row[zcols[j]], where));
    c.mass = csv::parse_double(row[mcol], where);
    const std::string a = csv::trim(row[acol]);
    if (a == "zero_a1") c.pr_a1 = 0.0;
    else if (a == "zero_a0") c.pr_a1 = 1.0;
    else c.pr_a1 = csv::parse_double(a, where);
    c.pr_y1[0] = csv::parse_double(row[y0col], where);
    c.pr_y1[1] = csv::parse_double(row[y1col], where);
    s.cells.push_back(std::move(c));
  }
  s.validate();
  return s;
}

inline PopulationSpec load_population_csv(const std::string& path,
                                          const std::vector<std::string>& covariate_names) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open file: " + path);
  return load_population_csv(in, covariate_names, path);
}

namespace detail {

inline std::vector<double> cumulative_masses(const PopulationSpec& spec) {
  std::vector<double> cum;
  cum.reserve(spec.cells.size());
  double total = 0.0;
  for (const auto& c : spec.cells) {
    total += c.mass;
    cum.push_back(total);
  }
  return cum;
}

inline std::size_t draw_cell(const std::vector<double>& cum, double u) {
  for (std::size_t i = 0; i + 1 < cum.size(); ++i)
    if (u < cum[i]) return i;
  return cum.size() - 1;
}

}  // namespace detail

/// n independent draws of (Z, A, Y), exactly three uniform deviates per unit
/// in the order pattern, action, outcome. run_study consumes the generator
/// with the same call pattern, so its tallies match this function's output
/// draw for draw.
inline Dataset sample_population(const PopulationSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  std::vector<double> cum = detail::cumulative_masses(spec);

  Dataset d;
  d.covariate_names = spec.covariate_names;
  d.covariate_levels = spec.covariate_level_counts();
  d.outcome_range = {0.0, 1.0};
  d.provenance =
      spec.label + " (n=" + std::to_string(n) + ", seed=" + std::to_string(seed) + ")";
  d.records.reserve(n);

  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const PopulationSpec::Cell& cell = spec.cells[detail::draw_cell(cum, rng.uniform01())];
    UnitRecord r;
    r.covariates = cell.z;
    r.action = rng.bernoulli(cell.pr_a1) ? 1 : 0;
    r.outcome = rng.bernoulli(cell.pr_y1[r.action]) ? 1.0 : 0.0;
    d.records.push_back(std::move(r));
  }
  return d;
}

struct CellViolationProbability {
  Pattern z;
  double probability = 0.0;
};

/// Exact per-cell probability that a size-n sample shows the pattern but
/// misses one of its arms:
///   [(1-p*pi)^n - (1-p)^n] + [(1-p*(1-pi))^n - (1-p)^n]
/// with p the pattern mass and pi = Pr(A=1|z). The two terms are disjoint
/// events (an observed cell cannot miss both arms). A structural zero
/// (pi = 1) collapses the expression to 1-(1-p)^n. No closed form is given
/// for the any-cell probability: cells are multinomially dependent, so that
/// figure is Monte Carlo only.
inline std::vector<CellViolationProbability> violation_probability_analytic(
    const PopulationSpec& spec, std::int64_t n) {
  spec.validate();
  if (n < 0) throw Error(ErrorCode::InvalidArgument, "sample size must be non-negative");
  std::vector<CellViolationProbability> out;
  for (const auto& c : spec.cells) {
    double none = std::pow(1.0 - c.mass, static_cast<double>(n));
    double arm1_absent = std::pow(1.0 - c.mass * c.pr_a1, static_cast<double>(n)) - none;
    double arm0_absent = std::pow(1.0 - c.mass * (1.0 - c.pr_a1), static_cast<double>(n)) - none;
    double prob = std::max(0.0, arm1_absent) + std::max(0.0, arm0_absent);
    out.push_back({c.z, std::min(prob, 1.0)});
  }
  return out;
}

struct SimCellResult {
  Pattern z;
  double analytic = 0.0;
  double mc_frequency = 0.0;
};

struct SimSizeResult {
  std::int64_t n = 0;
  std::vector<SimCellResult> cells;
  double any_violation_frequency = 0.0;
};

struct SimResult {
  std::vector<SimSizeResult> by_n;
  int replicates = 0;
  std::uint64_t seed = 0;
  std::string spec_label;
};

/// Monte Carlo violation frequencies against the analytic per-cell values.
/// Replicate r of grid entry i uses the stream derive_seed(seed,
/// i*replicates + r); replicates are independent and may be computed in any
/// order. Each replicate draws with sample_population's generator call
/// pattern and tallies arm counts directly.
inline SimResult run_study(const PopulationSpec& spec, const std::vector<std::int64_t>& n_grid,
                           int replicates, std::uint64_t seed) {
  spec.validate();
  if (replicates < 1) throw Error(ErrorCode::InvalidArgument, "replicates must be at least 1");
  if (n_grid.empty()) throw Error(ErrorCode::InvalidArgument, "sample-size grid is empty");
  for (std::int64_t n : n_grid)
    if (n < 0) throw Error(ErrorCode::InvalidArgument, "sample size must be non-negative");

  std::vector<double> cum = detail::cumulative_masses(spec);
  const std::size_t k = spec.cells.size();

  SimResult result;
  result.replicates = replicates;
  result.seed = seed;
  result.spec_label = spec.label;

  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    const std::int64_t n = n_grid[i];
    std::vector<std::int64_t> cell_hits(k, 0);
    std::int64_t any_hits = 0;
    std::vector<std::array<std::int64_t, 2>> counts(k);

    for (int rep = 0; rep < replicates; ++rep) {
      std::uint64_t stream = static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(replicates) +
                             static_cast<std::uint64_t>(rep);
      Rng rng(derive_seed(seed, stream));
      for (auto& c : counts) c = {0, 0};
      for (std::int64_t u = 0; u < n; ++u) {
        std::size_t cell = detail::draw_cell(cum, rng.uniform01());
        int a = rng.bernoulli(spec.cells[cell].pr_a1) ? 1 : 0;
        rng.bernoulli(spec.cells[cell].pr_y1[a]);  // outcome draw, not tallied
        ++counts[cell][a];
      }
      bool any = false;
      for (std::size_t c = 0; c < k; ++c) {
        bool observed = counts[c][0] + counts[c][1] > 0;
        bool violated = observed && (counts[c][0] == 0 || counts[c][1] == 0);
        if (violated) {
          ++cell_hits[c];
          any = true;
        }
      }
      if (any) ++any_hits;
    }

    SimSizeResult size_result;
    size_result.n = n;
    size_result.any_violation_frequency =
        static_cast<double>(any_hits) / static_cast<double>(replicates);
    auto analytic = violation_probability_analytic(spec, n);
    for (std::size_t c = 0; c < k; ++c)
      size_result.cells.push_back(
          {spec.cells[c].z, analytic[c].probability,
           static_cast<double>(cell_hits[c]) / static_cast<double>(replicates)});
    result.by_n.push_back(std::move(size_result));
  }
  return result;
}

/// CSV emission: one row per (n, cell) plus an "any" row per n. The any-cell
/// analytic column is left empty (see violation_probability_analytic).
inline std::string study_csv(const SimResult& r) {
  std::ostringstream os;
  os << "n,cell,analytic,mc_frequency,replicates,seed\n";
  for (const auto& size_result : r.by_n) {
    for (const auto& cell : size_result.cells) {
      os << size_result.n << ",";
      for (std::size_t j = 0; j < cell.z.size(); ++j) os << (j ? ":" : "") << cell.z[j];
      os << "," << csv::format_double(cell.analytic) << ","
         << csv::format_double(cell.mc_frequency) << "," << r.replicates << "," << r.seed << "\n";
    }
    os << size_result.n << ",any,," << csv::format_double(size_result.any_violation_frequency)
       << "," << r.replicates << "," << r.seed << "\n";
  }
  return os.str();
}

}  // namespace positivity
