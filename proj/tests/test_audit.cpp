#include <algorithm>
#include <random>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "positivity/audit.hpp"
#include "positivity/dataset.hpp"
#include "positivity/errors.hpp"
#include "positivity/plan.hpp"
#include "positivity/simulate.hpp"

using namespace positivity;

TEST_CASE("empirical propensities are exact cell ratios") {
  StratumTable t = build_strata(testutil::load_table1());
  CHECK(empirical_propensity(t, {1, 1}, 1) == 17.0 / 67.0);
  CHECK(empirical_propensity(t, {1, 0}, 1) == 38.0 / 64.0);
  CHECK(empirical_propensity(t, {1, 0}, 1) == 0.59375);
  CHECK(empirical_propensity(t, {0, 1}, 1) == 0.75);
  CHECK(empirical_propensity(t, {0, 0}, 1) == 1.0);
  CHECK(empirical_propensity(t, {0, 0}, 0) == 0.0);
  CHECK_THROWS_AS(empirical_propensity(t, {2, 0}, 1), Error);

  for (const auto& [z, c] : t.cells)
    CHECK(empirical_propensity(t, z, 0) + empirical_propensity(t, z, 1) == 1.0);
}

TEST_CASE("sample audit flags the single empty arm") {
  StratumTable t = build_strata(testutil::load_table1());
  PositivityReport rep = audit_sample(t, PositivityConfig{});

  CHECK(rep.kind == PositivityReport::Kind::Sample);
  CHECK(rep.violated);
  CHECK(rep.verdict() == "violated");
  CHECK(rep.findings.size() == 4);

  int exact_flags = 0;
  for (const auto& f : rep.findings)
    exact_flags += (f.exact_violation[0] ? 1 : 0) + (f.exact_violation[1] ? 1 : 0);
  CHECK(exact_flags == 1);

  const CellFinding& f = rep.finding({0, 0});
  CHECK(f.exact_violation[0]);
  CHECK(!f.exact_violation[1]);
  CHECK(f.n_total == 15);
  CHECK(f.n_by_arm[0] == 0);
  CHECK(f.classification == "indeterminate");
  CHECK(rep.note.find("background knowledge") != std::string::npos);
}

TEST_CASE("sample audit on a table with both arms everywhere") {
  StratumTable t = build_strata(testutil::table1_restricted());
  PositivityReport rep = audit_sample(t, PositivityConfig{});
  CHECK(!rep.violated);
  CHECK(rep.verdict() == "satisfied");
  for (const auto& f : rep.findings) {
    CHECK(!f.exact_violation[0]);
    CHECK(!f.exact_violation[1]);
    CHECK(!f.near_violation[0]);
    CHECK(!f.near_violation[1]);
    CHECK(f.classification.empty());
  }
  CHECK(rep.note.empty());
}

TEST_CASE("near violations respond to epsilon") {
  StratumTable t = build_strata(testutil::load_table1());
  PositivityReport rep = audit_sample(t, PositivityConfig{0.3});
  CHECK(rep.finding({1, 1}).near_violation[1]);  // 17/67 < 0.3
  CHECK(rep.finding({0, 1}).near_violation[0]);  // 25/100 < 0.3
  CHECK(!rep.finding({1, 0}).near_violation[0]);  // 26/64 >= 0.3
  CHECK(!rep.finding({1, 0}).near_violation[1]);
  // A propensity of exactly zero is an exact violation, not a near one.
  CHECK(!rep.finding({0, 0}).near_violation[0]);

  PositivityReport tight = audit_sample(t, PositivityConfig{0.01});
  for (const auto& f : tight.findings) {
    CHECK(!f.near_violation[0]);
    CHECK(!f.near_violation[1]);
  }

  CHECK_THROWS_AS(audit_sample(t, PositivityConfig{0.0}), Error);
  CHECK_THROWS_AS(audit_sample(t, PositivityConfig{1.0}), Error);
}

TEST_CASE("sample audit is permutation invariant") {
  Dataset d = testutil::load_table1();
  Dataset shuffled = d;
  std::mt19937_64 g(7);
  std::shuffle(shuffled.records.begin(), shuffled.records.end(), g);

  PositivityReport a = audit_sample(build_strata(d), PositivityConfig{0.3});
  PositivityReport b = audit_sample(build_strata(shuffled), PositivityConfig{0.3});
  REQUIRE(a.findings.size() == b.findings.size());
  for (std::size_t i = 0; i < a.findings.size(); ++i) {
    CHECK(a.findings[i].pattern == b.findings[i].pattern);
    CHECK(a.findings[i].n_total == b.findings[i].n_total);
    CHECK(a.findings[i].n_by_arm == b.findings[i].n_by_arm);
    CHECK(a.findings[i].propensity == b.findings[i].propensity);
    CHECK(a.findings[i].exact_violation == b.findings[i].exact_violation);
    CHECK(a.findings[i].near_violation == b.findings[i].near_violation);
  }
  CHECK(a.violated == b.violated);
}

TEST_CASE("empty tables cannot be audited") {
  StratumTable t;
  CHECK_THROWS_AS(audit_sample(t, PositivityConfig{}), Error);
}

TEST_CASE("structural audit classifies the zero cell") {
  StratumTable t = build_strata(testutil::load_table1());
  PositivityConfig config;

  StructuralSpec s1 = StructuralSpec::table1_s1();
  PositivityReport r1 = audit_structural(s1, config, &t);
  CHECK(r1.kind == PositivityReport::Kind::Structural);
  CHECK(r1.population == "table1-s1");
  CHECK(r1.violated);  // declared Pr(A=0|(0,0)) = 0 < epsilon
  CHECK(r1.finding({0, 0}).deterministic_violation[0]);
  CHECK(r1.finding({0, 0}).exact_violation[0]);
  CHECK(r1.finding({0, 0}).classification == "deterministic");

  StructuralSpec s2 = StructuralSpec::table1_s2();
  PositivityReport r2 = audit_structural(s2, config, &t);
  CHECK(!r2.violated);  // 0.01 >= default epsilon
  for (const auto& f : r2.findings) {
    CHECK(!f.deterministic_violation[0]);
    CHECK(!f.deterministic_violation[1]);
  }
  CHECK(r2.finding({0, 0}).classification == "stochastic");

  // A sample audit against the spec reaches the same classification.
  CHECK(audit_sample(t, config, &s1).finding({0, 0}).classification == "deterministic");
  CHECK(audit_sample(t, config, &s2).finding({0, 0}).classification == "stochastic");
}

TEST_CASE("structural audit without a table") {
  StructuralSpec spec;
  spec.label = "all-half";
  spec.covariate_names = {"V"};
  spec.pr_a1[{0}] = 0.5;
  spec.pr_a1[{1}] = 0.5;
  PositivityReport rep = audit_structural(spec, PositivityConfig{});
  CHECK(!rep.violated);
  CHECK(rep.verdict() == "satisfied");
  for (const auto& f : rep.findings) CHECK(f.n_total == 0);
}

TEST_CASE("spec must cover every observed pattern") {
  StratumTable t = build_strata(testutil::load_table1());
  StructuralSpec spec = StructuralSpec::table1_s1();
  spec.pr_a1.erase({0, 0});
  try {
    audit_structural(spec, PositivityConfig{}, &t);
    FAIL("expected SpecPatternMissing");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SpecPatternMissing);
    REQUIRE(e.pattern().has_value());
    CHECK(*e.pattern() == Pattern{0, 0});
  }
}

TEST_CASE("spec files load with structural-zero markers") {
  StructuralSpec s1 = load_structural_spec_csv(testutil::data_path("spec_table1_s1.csv"),
                                               {"V", "W"});
  StructuralSpec builtin = StructuralSpec::table1_s1();
  REQUIRE(s1.pr_a1.size() == builtin.pr_a1.size());
  for (const auto& [z, p] : builtin.pr_a1) CHECK(s1.declared(z, 1) == p);
  CHECK(s1.structural_zero({0, 0}, 0));

  StructuralSpec s2 = load_structural_spec_csv(testutil::data_path("spec_table1_s2.csv"),
                                               {"V", "W"});
  CHECK(s2.declared({0, 0}, 1) == 0.99);
  CHECK(!s2.structural_zero({0, 0}, 0));
}

TEST_CASE("plan positivity under the two populations") {
  PositivityConfig config;
  StructuralSpec s1 = StructuralSpec::table1_s1();
  StructuralSpec s2 = StructuralSpec::table1_s2();
  Plan selective_plan = load_plan_csv(testutil::data_path("plan_selective.csv"), {"V", "W"});

  // The plan assigns A=0 at (0,0), where S=1 declares Pr(A=0)=0.
  PositivityReport r1 = check_plan_positivity(s1, selective_plan, config);
  CHECK(r1.kind == PositivityReport::Kind::Plan);
  CHECK(r1.violated);
  CHECK(r1.finding({0, 0}).deterministic_violation[0]);
  CHECK(r1.finding({0, 0}).plan_value == 0.0);
  for (const auto& f : r1.findings)
    if (f.pattern != Pattern{0, 0}) {
      CHECK(!f.deterministic_violation[0]);
      CHECK(!f.deterministic_violation[1]);
    }

  // Under S=2 the same plan needs Pr(A=0|(0,0)) = 0.01 >= epsilon: satisfied.
  CHECK(!check_plan_positivity(s2, selective_plan, config).violated);
  // With a stricter epsilon the 0.01 arm fails again.
  CHECK(check_plan_positivity(s2, selective_plan, PositivityConfig{0.05}).violated);

  CHECK(!check_plan_positivity(s1, Plan::all_treat(), config).violated);
  CHECK(check_plan_positivity(s1, Plan::all_control(), config).violated);

  // Probabilistic plans are checked on both sides wherever 0 < g* < 1.
  Plan half;
  half.kind = Plan::Kind::Probabilistic;
  half.fallback = 0.5;
  half.label = "half";
  PositivityReport rhalf = check_plan_positivity(s1, half, config);
  CHECK(rhalf.violated);
  CHECK(rhalf.finding({0, 0}).deterministic_violation[0]);
  CHECK(!rhalf.finding({0, 0}).deterministic_violation[1]);

  Plan undefined;
  undefined.label = "nowhere";
  CHECK_THROWS_AS(check_plan_positivity(s1, undefined, config), Error);
  try {
    check_plan_positivity(s1, undefined, config);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PlanPatternMissing);
  }
}

TEST_CASE("structural zeros force sample zeros wherever the pattern appears") {
  // Population-level failure implies sample-level failure: any draw from the
  // S=1 population that shows (0,0) must show it with an empty A=0 arm.
  PopulationSpec spec = PopulationSpec::table1_s1();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Dataset d = sample_population(spec, 120, seed);
    StratumTable t = build_strata(d);
    if (!t.contains({0, 0})) continue;
    PositivityReport rep = audit_sample(t, PositivityConfig{});
    CHECK(rep.violated);
    CHECK(rep.finding({0, 0}).exact_violation[0]);
  }
}
