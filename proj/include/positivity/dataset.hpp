#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "positivity/csv.hpp"
#include "positivity/errors.hpp"

namespace positivity {

/// A covariate pattern: one categorical level code per covariate.
using Pattern = std::vector<int>;

inline std::string pattern_to_string(const Pattern& z, const std::vector<std::string>& names = {}) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (i) os << ",";
    if (i < names.size()) os << names[i] << "=";
    os << z[i];
  }
  os << ")";
  return os.str();
}

struct UnitRecord {
  Pattern covariates;
  int action = 0;      // binary {0,1}
  double outcome = 0.0;
};

struct ColumnSchema {
  std::vector<std::string> covariates;
  std::string action = "A";
  std::string outcome = "Y";
};

/// Unit-level data plus the categorical metadata every downstream module
/// relies on. Immutable after construction.
struct Dataset {
  std::vector<UnitRecord> records;
  std::vector<std::string> covariate_names;
  std::vector<int> covariate_levels;  // per covariate: codes run 0..levels-1
  std::optional<std::pair<double, double>> outcome_range;  // needed only by bounds
  std::string provenance;  // restriction trail, for reports

  std::size_t size() const { return records.size(); }
  std::size_t n_covariates() const { return covariate_names.size(); }

  void validate() const {
    for (const auto& r : records) {
      if (r.action != 0 && r.action != 1)
        throw Error(ErrorCode::NonBinaryAction, "action must be 0 or 1");
      if (r.covariates.size() != covariate_names.size())
        throw Error(ErrorCode::InvalidArgument, "covariate count mismatch in record");
      for (std::size_t j = 0; j < r.covariates.size(); ++j)
        if (r.covariates[j] < 0 || r.covariates[j] >= covariate_levels[j])
          throw Error(ErrorCode::InvalidArgument,
                      "covariate '" + covariate_names[j] + "' code " +
                          std::to_string(r.covariates[j]) + " outside declared levels");
      if (outcome_range &&
          (r.outcome < outcome_range->first || r.outcome > outcome_range->second))
        throw Error(ErrorCode::InvalidArgument, "outcome outside declared outcome_range");
    }
  }
};

struct CellCounts {
  std::int64_t n_total = 0;
  std::array<std::int64_t, 2> n_by_arm = {0, 0};
  std::array<double, 2> outcome_sum_by_arm = {0.0, 0.0};
};

/// Exact per-stratum sufficient statistics. Cells iterate in lexicographic
/// pattern order (std::map).
struct StratumTable {
  std::map<Pattern, CellCounts> cells;
  std::vector<std::string> covariate_names;
  std::int64_t n = 0;

  bool contains(const Pattern& z) const { return cells.count(z) > 0; }

  const CellCounts& at(const Pattern& z) const {
    auto it = cells.find(z);
    if (it == cells.end() || it->second.n_total == 0)
      throw Error(ErrorCode::UnknownStratum,
                  "no observations for stratum " + pattern_to_string(z, covariate_names), z);
    return it->second;
  }
};

// ---------------------------------------------------------------------------
// Loading

namespace detail {

inline int parse_level_code(const std::string& field, const std::string& where) {
  // Categorical level codes only; reals are rejected so the stratum counts
  // stay exact. A value like "1.5" names a continuous covariate.
  const std::string s = csv::trim(field);
  double d = csv::parse_double(s, where);
  double rounded = std::nearbyint(d);
  if (d != rounded)
    throw Error(ErrorCode::UnparseableValue,
                where + ": covariate value '" + field +
                    "' is not a categorical level code (continuous covariates are not supported)");
  if (rounded < 0 || rounded > 1e6)
    throw Error(ErrorCode::UnparseableValue,
                where + ": covariate level code '" + field + "' out of range");
  return static_cast<int>(rounded);
}

inline int parse_action(const std::string& field, const std::string& where) {
  const std::string s = csv::trim(field);
  if (s == "0") return 0;
  if (s == "1") return 1;
  throw Error(ErrorCode::NonBinaryAction, where + ": action value '" + field + "' is not 0 or 1");
}

inline void finalize_metadata(Dataset& d) {
  // Levels inferred from observed values; outcome_range defaults to [0,1]
  // when the outcome is binary, otherwise stays undeclared.
  d.covariate_levels.assign(d.covariate_names.size(), 1);
  bool binary = true;
  for (const auto& r : d.records) {
    for (std::size_t j = 0; j < r.covariates.size(); ++j)
      if (r.covariates[j] + 1 > d.covariate_levels[j])
        d.covariate_levels[j] = r.covariates[j] + 1;
    if (r.outcome != 0.0 && r.outcome != 1.0) binary = false;
  }
  if (binary) d.outcome_range = {0.0, 1.0};
}

}  // namespace detail

/// Load unit-level rows: header + one row per unit.
inline Dataset load_csv(std::istream& in, const ColumnSchema& schema,
                        const std::string& source_name = "<stream>") {
  csv::Table t = csv::read(in, source_name);
  std::vector<int> zcols;
  for (const auto& name : schema.covariates) zcols.push_back(t.require_column(name));
  int acol = t.require_column(schema.action);
  int ycol = t.require_column(schema.outcome);

  Dataset d;
  d.covariate_names = schema.covariates;
  d.provenance = source_name;
  d.records.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    std::string where = source_name + ": row " + std::to_string(i + 1);
    UnitRecord r;
    for (std::size_t j = 0; j < zcols.size(); ++j)
      r.covariates.push_back(
          detail::parse_level_code(row[zcols[j]], where + ", column '" + schema.covariates[j] + "'"));
    r.action = detail::parse_action(row[acol], where + ", column '" + schema.action + "'");
    r.outcome = csv::parse_double(row[ycol], where + ", column '" + schema.outcome + "'");
    d.records.push_back(std::move(r));
  }
  detail::finalize_metadata(d);
  return d;
}

inline Dataset load_csv(const std::string& path, const ColumnSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open file: " + path);
  return load_csv(in, schema, path);
}

/// Load the counts format: one row per (pattern, action, outcome value) with
/// a count column; each row expands to `count` unit records.
inline Dataset load_counts_csv(std::istream& in, const ColumnSchema& schema,
                               const std::string& source_name = "<stream>",
                               const std::string& count_column = "count") {
  csv::Table t = csv::read(in, source_name);
  std::vector<int> zcols;
  for (const auto& name : schema.covariates) zcols.push_back(t.require_column(name));
  int acol = t.require_column(schema.action);
  int ycol = t.require_column(schema.outcome);
  int ccol = t.require_column(count_column);

  Dataset d;
  d.covariate_names = schema.covariates;
  d.provenance = source_name;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    std::string where = source_name + ": row " + std::to_string(i + 1);
    UnitRecord r;
    for (std::size_t j = 0; j < zcols.size(); ++j)
      r.covariates.push_back(
          detail::parse_level_code(row[zcols[j]], where + ", column '" + schema.covariates[j] + "'"));
    r.action = detail::parse_action(row[acol], where + ", column '" + schema.action + "'");
    r.outcome = csv::parse_double(row[ycol], where + ", column '" + schema.outcome + "'");
    long count = csv::parse_int(row[ccol], where + ", column '" + count_column + "'");
    if (count < 0)
      throw Error(ErrorCode::UnparseableValue, where + ": negative count");
    for (long c = 0; c < count; ++c) d.records.push_back(r);
  }
  detail::finalize_metadata(d);
  return d;
}

inline Dataset load_counts_csv(const std::string& path, const ColumnSchema& schema,
                               const std::string& count_column = "count") {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open file: " + path);
  return load_counts_csv(in, schema, path, count_column);
}

/// Serialize to the counts format (rows keyed by distinct (z, a, y), in
/// lexicographic order). Outcome values are printed with full precision so a
/// reload reproduces the strata exactly.
inline std::string write_counts_csv(const Dataset& d, const ColumnSchema& schema) {
  std::map<std::pair<Pattern, std::pair<int, double>>, std::int64_t> groups;
  for (const auto& r : d.records)
    ++groups[{r.covariates, {r.action, r.outcome}}];
  std::ostringstream os;
  for (const auto& name : schema.covariates) os << name << ",";
  os << schema.action << "," << schema.outcome << ",count\n";
  char buf[64];
  for (const auto& [key, count] : groups) {
    for (int code : key.first) os << code << ",";
    std::snprintf(buf, sizeof buf, "%.17g", key.second.second);
    os << key.second.first << "," << buf << "," << count << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Strata

/// Counts-format serialization of a stratum table. Requires binary outcomes:
/// each arm's outcome sum must be an integer so it splits into y=1 and y=0
/// row counts.
inline std::string write_counts_csv(const StratumTable& t, const ColumnSchema& schema) {
  std::ostringstream os;
  for (const auto& name : schema.covariates) os << name << ",";
  os << schema.action << "," << schema.outcome << ",count\n";
  for (const auto& [z, c] : t.cells) {
    for (int a = 0; a < 2; ++a) {
      double s = c.outcome_sum_by_arm[a];
      if (s != std::nearbyint(s) || s < 0 || s > static_cast<double>(c.n_by_arm[a]))
        throw Error(ErrorCode::InvalidArgument,
                    "stratum table is not binary-outcome; serialize the dataset instead");
      std::int64_t y1 = static_cast<std::int64_t>(s);
      std::int64_t y0 = c.n_by_arm[a] - y1;
      for (int y = 0; y < 2; ++y) {
        std::int64_t count = y == 0 ? y0 : y1;
        if (count == 0) continue;
        for (int code : z) os << code << ",";
        os << a << "," << y << "," << count << "\n";
      }
    }
  }
  return os.str();
}

inline StratumTable build_strata(const Dataset& data) {
  StratumTable t;
  t.covariate_names = data.covariate_names;
  t.n = static_cast<std::int64_t>(data.records.size());
  for (const auto& r : data.records) {
    CellCounts& c = t.cells[r.covariates];
    c.n_total += 1;
    c.n_by_arm[r.action] += 1;
    c.outcome_sum_by_arm[r.action] += r.outcome;
  }
  return t;
}

/// Restrict to the sub-population where `predicate(z)` holds. Metadata is
/// preserved; `description` is appended to the provenance trail.
inline Dataset restrict(const Dataset& data, const std::function<bool(const Pattern&)>& predicate,
                        const std::string& description = "restricted") {
  Dataset out;
  out.covariate_names = data.covariate_names;
  out.covariate_levels = data.covariate_levels;
  out.outcome_range = data.outcome_range;
  out.provenance = data.provenance.empty() ? description : data.provenance + "; " + description;
  for (const auto& r : data.records)
    if (predicate(r.covariates)) out.records.push_back(r);
  return out;
}

}  // namespace positivity
