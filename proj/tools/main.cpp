// positivity: audit positivity assumptions in discrete-covariate data and
// estimate average causal effects (and weakened estimands) by g-computation
// and inverse probability weighting.
//
// Exit codes: 0 success; 1 input/validation error; 2 estimation blocked by a
// positivity violation (the JSON report names the offending cell and arm);
// 64 usage error. Reports are byte-identical for fixed inputs and --seed.
// Output is plain JSON/CSV; no color is ever emitted, so NO_COLOR is honored
// vacuously.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "positivity/audit.hpp"
#include "positivity/csv.hpp"
#include "positivity/dataset.hpp"
#include "positivity/errors.hpp"
#include "positivity/estimators.hpp"
#include "positivity/forest.hpp"
#include "positivity/logistic.hpp"
#include "positivity/plan.hpp"
#include "positivity/propensity.hpp"
#include "positivity/report.hpp"
#include "positivity/restrict_expr.hpp"
#include "positivity/simulate.hpp"
#include "positivity/tree.hpp"

namespace {

using positivity::Dataset;
using positivity::Error;
using positivity::ErrorCode;
using positivity::Estimand;
using positivity::Plan;
using positivity::PopulationSpec;
using positivity::PositivityConfig;
using positivity::PropensityEstimator;
using positivity::StratumTable;
using positivity::StructuralSpec;
using json = positivity::report::json;

constexpr std::uint64_t kDefaultSeed = 20250814;

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::PositivityViolation:
    case ErrorCode::UndefinedCellMean:
    case ErrorCode::NoTreatedUnits:
      return 2;
    case ErrorCode::UsageError:
      return 64;
    default:
      return 1;
  }
}

void write_output(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot open output file: " + out_path);
  out << text;
}

struct DataArgs {
  std::string path;
  bool counts = false;
  std::vector<std::string> covariates;
  std::string action = "A";
  std::string outcome = "Y";
  std::string restrict_text;

  void add_options(CLI::App* cmd, bool required) {
    auto* d = cmd->add_option("--data", path, "input CSV file");
    if (required) d->required();
    cmd->add_flag("--counts", counts,
                  "input is in counts form (columns z..., action, outcome, count)");
    cmd->add_option("--covariates", covariates, "covariate column names (comma separated)")
        ->delimiter(',');
    cmd->add_option("--action", action, "action column name (default A)");
    cmd->add_option("--outcome", outcome, "outcome column name (default Y)");
    cmd->add_option("--restrict", restrict_text,
                    "restrict to patterns where this expression holds, e.g. \"!(V=0&W=0)\"");
  }

  Dataset load() const {
    if (covariates.empty())
      throw Error(ErrorCode::UsageError, "--covariates is required when --data is given");
    positivity::ColumnSchema schema{covariates, action, outcome};
    Dataset d = counts ? positivity::load_counts_csv(path, schema)
                       : positivity::load_csv(path, schema);
    if (!restrict_text.empty()) {
      auto expr = positivity::RestrictExpr::parse(restrict_text, d.covariate_names);
      d = positivity::restrict(d, expr.predicate(), "restrict: " + restrict_text);
    }
    d.validate();
    return d;
  }
};

StructuralSpec resolve_spec(const std::string& name_or_path,
                            const std::vector<std::string>& covariate_names) {
  if (name_or_path == "table1-s1") return StructuralSpec::table1_s1();
  if (name_or_path == "table1-s2") return StructuralSpec::table1_s2();
  return positivity::load_structural_spec_csv(
      name_or_path, covariate_names.empty() ? std::vector<std::string>{"V", "W"} : covariate_names);
}

PopulationSpec resolve_population(const std::string& name_or_path,
                                  const std::vector<std::string>& covariate_names) {
  if (name_or_path == "table1-s1") return PopulationSpec::table1_s1();
  if (name_or_path == "table1-s2") return PopulationSpec::table1_s2();
  return positivity::load_population_csv(name_or_path, covariate_names);
}

Plan resolve_plan(const std::string& name_or_path,
                  const std::vector<std::string>& covariate_names) {
  if (name_or_path == "all-treat") return Plan::all_treat();
  if (name_or_path == "all-control") return Plan::all_control();
  return positivity::load_plan_csv(name_or_path, covariate_names);
}

json argv_json(int argc, char** argv) {
  json a = json::array();
  for (int i = 0; i < argc; ++i) a.push_back(std::string(argv[i]));
  return a;
}

// ---------------------------------------------------------------------------
// audit

struct AuditArgs {
  DataArgs data;
  std::string spec;
  std::string plan;
  double epsilon = 0.01;
  std::string out;
};

int run_audit(const AuditArgs& args, const json& argv_echo) {
  json rep;
  rep["schema_version"] = positivity::report::kSchemaVersion;
  rep["command"] = "audit";
  rep["argv"] = argv_echo;
  try {
    if (args.data.path.empty() && args.spec.empty())
      throw Error(ErrorCode::UsageError, "audit needs --data, --spec, or both");
    if (!(args.epsilon > 0.0 && args.epsilon < 1.0))
      throw Error(ErrorCode::UsageError, "--epsilon must lie in (0,1)");
    PositivityConfig config{args.epsilon};

    std::optional<Dataset> data;
    std::optional<StratumTable> table;
    if (!args.data.path.empty()) {
      data = args.data.load();
      table = positivity::build_strata(*data);
      rep["dataset"] = positivity::report::dataset_json(*data);
    }
    std::optional<StructuralSpec> spec;
    if (!args.spec.empty()) {
      auto names = data ? data->covariate_names : args.data.covariates;
      spec = resolve_spec(args.spec, names);
    }

    std::vector<std::string> names =
        data ? data->covariate_names : (spec ? spec->covariate_names : args.data.covariates);
    if (table) {
      auto sample = positivity::audit_sample(*table, config, spec ? &*spec : nullptr);
      rep["sample"] = positivity::report::positivity_json(sample, names);
    }
    if (spec) {
      auto structural = positivity::audit_structural(*spec, config, table ? &*table : nullptr);
      rep["structural"] = positivity::report::positivity_json(structural, names);
    }
    if (!args.plan.empty()) {
      if (!spec)
        throw Error(ErrorCode::UsageError, "--plan requires --spec (the plan condition is "
                                           "checked against declared probabilities)");
      Plan plan = resolve_plan(args.plan, names);
      auto plan_report = positivity::check_plan_positivity(*spec, plan, config);
      rep["plan"] = positivity::report::positivity_json(plan_report, names);
    }
    rep["exit_code"] = 0;
    write_output(positivity::report::to_string(rep), args.out);
    return 0;
  } catch (const Error& e) {
    int code = exit_code_for(e.code());
    rep["error"] = positivity::report::error_json(e);
    rep["exit_code"] = code;
    write_output(positivity::report::to_string(rep), args.out);
    return code;
  }
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
  DataArgs data;
  std::string estimand = "ace";
  std::string plan;
  std::string method = "gcomp";
  std::string ps = "empirical";
  std::int64_t min_leaf = 1;
  int n_trees = 100;
  bool no_bootstrap = false;
  double truncate = 0.0;  // 0 = off
  bool hajek = false;
  double epsilon = 0.01;
  std::string spec;
  bool bounds = false;
  std::vector<double> outcome_range;
  int ci = 0;
  double level = 0.95;
  double failure_cap = 0.1;
  std::uint64_t seed = kDefaultSeed;
  std::string out;
};

PropensityEstimator build_ps(const EstimateArgs& args, const Dataset& data,
                             const StratumTable& table) {
  if (args.ps == "empirical") return PropensityEstimator::empirical(table);
  if (args.ps == "logistic")
    return PropensityEstimator::logistic(
        positivity::fit_logistic(data, positivity::Design::main_effects(data.n_covariates())));
  if (args.ps == "logistic-saturated")
    return PropensityEstimator::logistic(
        positivity::fit_logistic(data, positivity::Design::saturated(data.n_covariates())));
  if (args.ps == "tree") return PropensityEstimator::tree(positivity::fit_tree(data, args.min_leaf));
  return PropensityEstimator::forest(
      positivity::fit_forest(data, args.n_trees, args.min_leaf, args.seed, !args.no_bootstrap));
}

int run_estimate(const EstimateArgs& args, const json& argv_echo) {
  json rep;
  rep["schema_version"] = positivity::report::kSchemaVersion;
  rep["command"] = "estimate";
  rep["argv"] = argv_echo;
  std::string out_path = args.out;
  try {
    if (!(args.epsilon > 0.0 && args.epsilon < 1.0))
      throw Error(ErrorCode::UsageError, "--epsilon must lie in (0,1)");
    if (args.truncate != 0.0 && !(args.truncate > 0.0 && args.truncate <= 0.5))
      throw Error(ErrorCode::UsageError, "--truncate must lie in (0, 0.5]");
    if (!(args.level > 0.0 && args.level < 1.0))
      throw Error(ErrorCode::UsageError, "--level must lie in (0,1)");
    if (!(args.failure_cap >= 0.0 && args.failure_cap <= 1.0))
      throw Error(ErrorCode::UsageError, "--failure-cap must lie in [0,1]");
    if (args.min_leaf < 1) throw Error(ErrorCode::UsageError, "--min-leaf must be at least 1");
    if (args.n_trees < 1) throw Error(ErrorCode::UsageError, "--n-trees must be at least 1");

    Dataset data = args.data.load();
    StratumTable table = positivity::build_strata(data);
    rep["dataset"] = positivity::report::dataset_json(data);

    std::optional<StructuralSpec> spec;
    if (!args.spec.empty()) spec = resolve_spec(args.spec, data.covariate_names);

    PositivityConfig config{args.epsilon};
    auto audit = positivity::audit_sample(table, config, spec ? &*spec : nullptr);
    rep["positivity"] = positivity::report::positivity_json(audit, data.covariate_names);

    std::vector<std::string> warnings;
    for (const auto& f : audit.findings)
      if (f.near_violation[0] || f.near_violation[1])
        warnings.push_back("near-violation: empirical propensity below epsilon at " +
                           positivity::pattern_to_string(f.pattern, data.covariate_names));

    Estimand estimand;
    if (args.estimand == "mean1") estimand = Estimand::mean(1);
    else if (args.estimand == "mean0") estimand = Estimand::mean(0);
    else if (args.estimand == "ace") estimand = Estimand::ace();
    else if (args.estimand == "att") estimand = Estimand::att();
    else if (args.estimand == "natural") estimand = Estimand::natural_course();
    else {
      if (args.plan.empty())
        throw Error(ErrorCode::UsageError, "--estimand plan requires --plan");
      estimand = Estimand::plan_mean(resolve_plan(args.plan, data.covariate_names));
    }

    const bool weighted = estimand.kind == Estimand::Kind::Mean ||
                          estimand.kind == Estimand::Kind::Ace ||
                          estimand.kind == Estimand::Kind::PlanMean;
    const bool use_ipw = weighted && args.method == "ipw";
    positivity::IpwOptions ipw_options;
    if (args.truncate != 0.0) ipw_options.truncation = args.truncate;
    ipw_options.hajek = args.hajek;

    std::optional<PropensityEstimator> model;
    if (use_ipw) {
      model = build_ps(args, data, table);
      rep["model"] = positivity::report::model_json(*model, data.covariate_names, &table);
      if (const auto* fit = model->as_logistic()) {
        if (!fit->converged) warnings.push_back("logistic fit did not converge");
        if (fit->separation_detected)
          warnings.push_back(
              "separation detected: a fitted probability is within 1e-6 of 0 or 1");
      }
      if (ipw_options.truncation)
        warnings.push_back("propensities truncated to [" +
                           positivity::csv::format_double(*ipw_options.truncation) + ", " +
                           positivity::csv::format_double(1.0 - *ipw_options.truncation) + "]");
    }

    // Bounds stay identified when the point estimate is blocked, so they are
    // computed first and survive into error reports.
    if (args.bounds) {
      if (estimand.kind != Estimand::Kind::Mean && estimand.kind != Estimand::Kind::Ace)
        throw Error(ErrorCode::UsageError,
                    "--bounds applies to the estimands mean0, mean1, and ace");
      std::pair<double, double> range;
      if (!args.outcome_range.empty()) {
        if (args.outcome_range.size() != 2)
          throw Error(ErrorCode::UsageError, "--outcome-range takes two values: min,max");
        range = {args.outcome_range[0], args.outcome_range[1]};
      } else if (data.outcome_range) {
        range = *data.outcome_range;
      } else {
        throw Error(ErrorCode::UsageError,
                    "--bounds needs --outcome-range (outcomes are not binary)");
      }
      rep["bounds"] =
          positivity::report::bounds_json(positivity::manski_bounds(table, estimand, range));
    }

    positivity::Estimate estimate;
    if (estimand.kind == Estimand::Kind::Att) estimate = positivity::att_estimate(table);
    else if (estimand.kind == Estimand::Kind::NaturalCourse)
      estimate = positivity::natural_course(data);
    else if (use_ipw) estimate = positivity::ipw_estimate(data, *model, estimand, ipw_options);
    else estimate = positivity::gcomp_plugin(table, estimand);
    if (estimate.diagnostics.provenance.empty()) estimate.diagnostics.provenance = data.provenance;
    rep["estimate"] = positivity::report::estimate_json(estimate);

    if (args.ci > 0) {
      auto recipe = [&](const Dataset& resample) -> double {
        StratumTable t = positivity::build_strata(resample);
        if (estimand.kind == Estimand::Kind::Att) return positivity::att_estimate(t).value;
        if (estimand.kind == Estimand::Kind::NaturalCourse)
          return positivity::natural_course(resample).value;
        if (!use_ipw) return positivity::gcomp_plugin(t, estimand).value;
        PropensityEstimator m = build_ps(args, resample, t);
        return positivity::ipw_estimate(resample, m, estimand, ipw_options).value;
      };
      auto interval = positivity::bootstrap_ci(data, recipe, args.ci, args.seed, args.level,
                                               args.failure_cap);
      rep["interval"] = positivity::report::interval_json(interval);
      if (interval.failed > 0)
        warnings.push_back(std::to_string(interval.failed) + " of " +
                           std::to_string(interval.replicates) +
                           " bootstrap replicates failed and were excluded");
    }

    rep["warnings"] = warnings;
    rep["exit_code"] = 0;
    write_output(positivity::report::to_string(rep), out_path);
    return 0;
  } catch (const Error& e) {
    int code = exit_code_for(e.code());
    rep["error"] = positivity::report::error_json(e);
    rep["exit_code"] = code;
    write_output(positivity::report::to_string(rep), out_path);
    return code;
  }
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string spec = "table1-s2";
  std::vector<std::string> covariates = {"V", "W"};
  std::vector<std::int64_t> n_grid = {50, 246, 2000, 20000};
  int replicates = 2000;
  std::uint64_t seed = kDefaultSeed;
  std::string out;
};

int run_simulate(const SimulateArgs& args) {
  try {
    if (args.replicates < 1)
      throw Error(ErrorCode::UsageError, "--replicates must be at least 1");
    PopulationSpec spec = resolve_population(args.spec, args.covariates);
    auto result = positivity::run_study(spec, args.n_grid, args.replicates, args.seed);
    write_output(positivity::study_csv(result), args.out);
    return 0;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e.code());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "positivity: audit positivity assumptions and estimate causal effects\n"
      "in discrete-covariate observational data"};
  app.require_subcommand(1);

  AuditArgs audit_args;
  auto* audit_cmd = app.add_subcommand(
      "audit", "report exact and near positivity violations, with optional structural "
               "classification and plan checks; always exits 0 on a completed audit");
  audit_args.data.add_options(audit_cmd, false);
  audit_cmd->add_option("--spec", audit_args.spec,
                        "declared treatment probabilities: table1-s1, table1-s2, or a CSV path");
  audit_cmd->add_option("--plan", audit_args.plan,
                        "plan to check against the spec: all-treat, all-control, or a CSV path");
  audit_cmd->add_option("--epsilon", audit_args.epsilon,
                        "near-violation threshold in (0,1), default 0.01");
  audit_cmd->add_option("--out", audit_args.out, "write the JSON report here instead of stdout");

  EstimateArgs est_args;
  auto* est_cmd = app.add_subcommand("estimate",
                                     "estimate an average causal effect or weakened estimand");
  est_args.data.add_options(est_cmd, true);
  est_cmd->add_option("--estimand", est_args.estimand,
                      "mean1 | mean0 | ace | plan | att | natural (default ace)")
      ->check(CLI::IsMember({"mean1", "mean0", "ace", "plan", "att", "natural"}));
  est_cmd->add_option("--plan", est_args.plan,
                      "plan for --estimand plan: all-treat, all-control, or a CSV path");
  est_cmd->add_option("--method", est_args.method,
                      "gcomp (plug-in standardization) or ipw; att/natural use their own "
                      "estimators (default gcomp)")
      ->check(CLI::IsMember({"gcomp", "ipw"}));
  est_cmd->add_option("--ps", est_args.ps,
                      "propensity model for ipw: empirical | logistic | logistic-saturated | "
                      "tree | forest (default empirical)")
      ->check(CLI::IsMember({"empirical", "logistic", "logistic-saturated", "tree", "forest"}));
  est_cmd->add_option("--min-leaf", est_args.min_leaf,
                      "minimum records per tree leaf (tree/forest, default 1)");
  est_cmd->add_option("--n-trees", est_args.n_trees, "forest size (default 100)");
  est_cmd->add_flag("--no-bootstrap", est_args.no_bootstrap,
                    "train every forest tree on the full data instead of resamples");
  est_cmd->add_option("--truncate", est_args.truncate,
                      "clamp propensities to [b, 1-b], b in (0, 0.5]; default off");
  est_cmd->add_flag("--hajek", est_args.hajek,
                    "normalize IPW by the realized weight sum instead of n");
  est_cmd->add_option("--epsilon", est_args.epsilon,
                      "near-violation threshold in (0,1), default 0.01");
  est_cmd->add_option("--spec", est_args.spec,
                      "structural spec used to classify sample zeros in the audit section");
  est_cmd->add_flag("--bounds", est_args.bounds,
                    "also report worst-case bounds (mean0/mean1/ace only)");
  est_cmd->add_option("--outcome-range", est_args.outcome_range,
                      "outcome range min,max for bounds (default: [0,1] for binary outcomes)")
      ->delimiter(',');
  est_cmd->add_option("--ci", est_args.ci,
                      "bootstrap percentile interval with this many replicates (default off)");
  est_cmd->add_option("--level", est_args.level, "interval coverage in (0,1), default 0.95");
  est_cmd->add_option("--failure-cap", est_args.failure_cap,
                      "abort if more than this fraction of replicates fail, default 0.1");
  est_cmd->add_option("--seed", est_args.seed, "master seed for forest/bootstrap randomness");
  est_cmd->add_option("--out", est_args.out, "write the JSON report here instead of stdout");

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand(
      "simulate", "violation-frequency study: analytic per-cell probabilities vs Monte Carlo, "
                  "emitted as CSV");
  sim_cmd->add_option("--spec", sim_args.spec,
                      "population: table1-s1, table1-s2, or a CSV path (default table1-s2)");
  sim_cmd->add_option("--covariates", sim_args.covariates,
                      "covariate column names for file specs (default V,W)")
      ->delimiter(',');
  sim_cmd->add_option("--n-grid", sim_args.n_grid,
                      "sample sizes (comma separated, default 50,246,2000,20000)")
      ->delimiter(',');
  sim_cmd->add_option("--replicates", sim_args.replicates,
                      "Monte Carlo replicates per sample size (default 2000)");
  sim_cmd->add_option("--seed", sim_args.seed, "master seed; replicates derive their own streams");
  sim_cmd->add_option("--out", sim_args.out, "write the CSV here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "UsageError: " << e.what() << "\n";
    return 64;
  }

  json argv_echo = argv_json(argc, argv);
  if (app.got_subcommand(audit_cmd)) return run_audit(audit_args, argv_echo);
  if (app.got_subcommand(est_cmd)) return run_estimate(est_args, argv_echo);
  return run_simulate(sim_args);
}
