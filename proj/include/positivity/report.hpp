#pragma once

#include <cmath>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "positivity/audit.hpp"
#include "positivity/csv.hpp"
#include "positivity/dataset.hpp"
#include "positivity/errors.hpp"
#include "positivity/estimators.hpp"
#include "positivity/propensity.hpp"
#include "positivity/simulate.hpp"

namespace positivity::report {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Serializer with a fixed numeric contract: floating-point values print with
/// 12 significant digits, so a report is byte-stable for given inputs.
/// Non-finite values (which no supported pipeline emits) degrade to null
/// rather than producing invalid JSON.
inline void dump(const json& v, std::ostream& os, int depth = 0) {
  auto indent = [&os](int d) {
    for (int i = 0; i < d; ++i) os << "  ";
  };
  switch (v.type()) {
    case json::value_t::object: {
      if (v.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      std::size_t i = 0;
      for (auto it = v.begin(); it != v.end(); ++it, ++i) {
        indent(depth + 1);
        os << json(it.key()).dump() << ": ";
        dump(it.value(), os, depth + 1);
        if (i + 1 < v.size()) os << ",";
        os << "\n";
      }
      indent(depth);
      os << "}";
      return;
    }
    case json::value_t::array: {
      if (v.empty()) {
        os << "[]";
        return;
      }
      os << "[\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        indent(depth + 1);
        dump(v[i], os, depth + 1);
        if (i + 1 < v.size()) os << ",";
        os << "\n";
      }
      indent(depth);
      os << "]";
      return;
    }
    case json::value_t::number_float: {
      double d = v.get<double>();
      if (!std::isfinite(d)) {
        os << "null";
        return;
      }
      os << csv::format_double(d);
      return;
    }
    default:
      os << v.dump();
      return;
  }
}

inline std::string to_string(const json& v) {
  std::ostringstream os;
  dump(v, os);
  os << "\n";
  return os.str();
}

inline json pattern_json(const Pattern& z) {
  json a = json::array();
  for (int code : z) a.push_back(code);
  return a;
}

inline json dataset_json(const Dataset& d) {
  json j;
  j["n"] = d.records.size();
  j["covariates"] = d.covariate_names;
  j["covariate_levels"] = d.covariate_levels;
  if (d.outcome_range)
    j["outcome_range"] = json::array({d.outcome_range->first, d.outcome_range->second});
  else
    j["outcome_range"] = nullptr;
  j["provenance"] = d.provenance;
  return j;
}

inline json positivity_json(const PositivityReport& r,
                            const std::vector<std::string>& covariate_names) {
  json j;
  switch (r.kind) {
    case PositivityReport::Kind::Sample: j["kind"] = "sample"; break;
    case PositivityReport::Kind::Structural: j["kind"] = "structural"; break;
    case PositivityReport::Kind::Plan: j["kind"] = "plan"; break;
  }
  j["epsilon"] = r.epsilon;
  j["verdict"] = r.verdict();
  if (!r.population.empty()) j["population"] = r.population;
  if (!r.plan_label.empty()) j["plan"] = r.plan_label;
  if (!r.note.empty()) j["note"] = r.note;
  json findings = json::array();
  for (const auto& f : r.findings) {
    json cell;
    cell["pattern"] = pattern_json(f.pattern);
    cell["label"] = pattern_to_string(f.pattern, covariate_names);
    if (r.kind != PositivityReport::Kind::Plan) {
      cell["n_total"] = f.n_total;
      cell["n_by_arm"] = json::array({f.n_by_arm[0], f.n_by_arm[1]});
    }
    cell["propensity"] = json::array({f.propensity[0], f.propensity[1]});
    cell["exact_violation"] = json::array({f.exact_violation[0], f.exact_violation[1]});
    cell["near_violation"] = json::array({f.near_violation[0], f.near_violation[1]});
    cell["deterministic_violation"] =
        json::array({f.deterministic_violation[0], f.deterministic_violation[1]});
    if (f.plan_value) cell["plan_value"] = *f.plan_value;
    if (!f.classification.empty()) cell["classification"] = f.classification;
    findings.push_back(std::move(cell));
  }
  j["findings"] = std::move(findings);
  return j;
}

inline json estimate_json(const Estimate& e) {
  json j;
  j["estimand"] = e.estimand;
  j["method"] = e.method;
  j["value"] = e.value;
  j["n_used"] = e.n_used;
  json d;
  d["min_propensity"] = e.diagnostics.min_propensity;
  d["max_weight"] = e.diagnostics.max_weight;
  if (e.diagnostics.truncation)
    d["truncation"] = *e.diagnostics.truncation;
  else
    d["truncation"] = nullptr;
  d["provenance"] = e.diagnostics.provenance;
  j["diagnostics"] = std::move(d);
  return j;
}

inline json bounds_json(const BoundsResult& b) {
  json j;
  j["estimand"] = b.estimand;
  j["lower"] = b.lower;
  j["upper"] = b.upper;
  j["width"] = b.width;
  j["violating_mass"] = b.violating_mass;
  return j;
}

inline json interval_json(const Interval& iv) {
  json j;
  j["lower"] = iv.lower;
  j["upper"] = iv.upper;
  j["level"] = iv.level;
  j["replicates"] = iv.replicates;
  j["failed"] = iv.failed;
  j["seed"] = iv.seed;
  return j;
}

inline json tree_json(const TreeFit& t) {
  json j;
  j["min_leaf"] = t.min_leaf;
  json nodes = json::array();
  for (const auto& nd : t.nodes) {
    json n;
    n["leaf"] = nd.is_leaf();
    if (!nd.is_leaf()) {
      n["covariate"] = nd.covariate;
      n["level"] = nd.level;
      n["left"] = nd.left;
      n["right"] = nd.right;
    }
    n["n"] = nd.n;
    n["treated"] = nd.treated;
    n["probability"] = nd.probability;
    nodes.push_back(std::move(n));
  }
  j["nodes"] = std::move(nodes);
  return j;
}

/// Fitted-model report object: coefficients for the logistic variant, node
/// structure for trees, summary plus per-pattern predictions otherwise.
inline json model_json(const PropensityEstimator& ps,
                       const std::vector<std::string>& covariate_names,
                       const StratumTable* observed = nullptr) {
  json j;
  j["kind"] = ps.kind();
  if (const auto* fit = ps.as_logistic()) {
    j["converged"] = fit->converged;
    j["separation_detected"] = fit->separation_detected;
    j["iterations"] = fit->iterations;
    j["final_gradient_norm"] = fit->final_gradient_norm;
    json coefs = json::array();
    for (std::size_t k = 0; k < fit->coefficients.size(); ++k) {
      json c;
      c["term"] = fit->design.term_name(k, covariate_names);
      c["value"] = fit->coefficients[k];
      coefs.push_back(std::move(c));
    }
    j["coefficients"] = std::move(coefs);
  } else if (const auto* tree = ps.as_tree()) {
    j["tree"] = tree_json(*tree);
  } else if (const auto* forest = ps.as_forest()) {
    j["n_trees"] = forest->trees.size();
    j["min_leaf"] = forest->min_leaf;
    j["bootstrap"] = forest->bootstrap;
    j["seed"] = forest->seed;
  }
  if (observed) {
    json preds = json::array();
    for (const auto& [z, c] : observed->cells) {
      json p;
      p["pattern"] = pattern_json(z);
      p["label"] = pattern_to_string(z, covariate_names);
      p["pr_a1"] = ps.predict(z);
      preds.push_back(std::move(p));
    }
    j["propensity_by_pattern"] = std::move(preds);
  }
  return j;
}

inline json error_json(const Error& e) {
  json j;
  j["code"] = error_code_name(e.code());
  j["message"] = e.what();
  if (e.pattern()) j["pattern"] = pattern_json(*e.pattern());
  if (e.arm()) j["arm"] = *e.arm();
  return j;
}

}  // namespace positivity::report
