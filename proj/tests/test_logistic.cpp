#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "positivity/dataset.hpp"
#include "positivity/errors.hpp"
#include "positivity/logistic.hpp"

using namespace positivity;
using testutil::DatasetBuilder;

TEST_CASE("design terms") {
  Design main = Design::main_effects(2);
  REQUIRE(main.terms.size() == 3);
  CHECK(main.term_name(0, {"V", "W"}) == "(Intercept)");
  CHECK(main.term_name(1, {"V", "W"}) == "V");
  CHECK(main.term_name(2, {"V", "W"}) == "W");

  Design sat = Design::saturated(2);
  REQUIRE(sat.terms.size() == 4);
  CHECK(sat.term_name(3, {"V", "W"}) == "V:W");
  CHECK(sat.value(3, {1, 1}) == 1.0);
  CHECK(sat.value(3, {1, 0}) == 0.0);
  CHECK(sat.value(0, {1, 0}) == 1.0);
}

TEST_CASE("main-effects fit solves the score equations") {
  Dataset d = testutil::load_table1();
  LogisticFit fit = fit_logistic(d, Design::main_effects(2));

  CHECK(fit.converged);
  CHECK(fit.iterations <= 100);
  CHECK(fit.final_gradient_norm <= 1e-10);

  // Residuals of the score equations, term by term, over the raw records.
  for (std::size_t j = 0; j < fit.design.terms.size(); ++j) {
    double r = 0.0;
    for (const auto& rec : d.records)
      r += (rec.action - fit.predict(rec.covariates)) * fit.design.value(j, rec.covariates);
    CHECK(std::abs(r) < 1e-8);
  }

  // Against an independent reference fit of the same model.
  REQUIRE(fit.coefficients.size() == 3);
  CHECK(fit.coefficients[0] == doctest::Approx(2.738598419391).epsilon(1e-6));
  CHECK(fit.coefficients[1] == doctest::Approx(-2.299750469108).epsilon(1e-6));
  CHECK(fit.coefficients[2] == doctest::Approx(-1.590791733706).epsilon(1e-6));

  CHECK(fit.predict({0, 0}) == doctest::Approx(0.939266192429).epsilon(1e-9));
  CHECK(fit.predict({0, 1}) == doctest::Approx(0.759110071136).epsilon(1e-9));
  CHECK(fit.predict({1, 0}) == doctest::Approx(0.607984486150).epsilon(1e-9));
  CHECK(fit.predict({1, 1}) == doctest::Approx(0.240134222186).epsilon(1e-9));

  for (int v = 0; v < 2; ++v)
    for (int w = 0; w < 2; ++w) {
      double p = fit.predict({v, w});
      CHECK(p > 0.0);
      CHECK(p < 1.0);
    }

  CHECK(!fit.separation_detected);
  CHECK(fit.predict({0, 0}) == expit(fit.coefficients[0]));
}

TEST_CASE("saturated fit detects separation and limps to near-zero") {
  Dataset d = testutil::load_table1();
  LogisticFit fit = fit_logistic(d, Design::saturated(2));

  CHECK(fit.separation_detected);
  CHECK(fit.iterations <= 100);
  // The (0,0) cell is all treated, so Pr(A=0|(0,0)) is pushed toward zero
  // but never reaches it.
  double p0 = 1.0 - fit.predict({0, 0});
  CHECK(p0 < 1e-3);
  CHECK(p0 > 0.0);

  // The identified cells still recover their ratios (saturated model).
  CHECK(fit.predict({0, 1}) == doctest::Approx(0.75).epsilon(1e-6));
  CHECK(fit.predict({1, 0}) == doctest::Approx(0.59375).epsilon(1e-6));
  CHECK(fit.predict({1, 1}) == doctest::Approx(17.0 / 67.0).epsilon(1e-6));
}

TEST_CASE("zero coefficients predict one half") {
  LogisticFit fit;
  fit.design = Design::main_effects(2);
  fit.coefficients = {0.0, 0.0, 0.0};
  CHECK(fit.predict({0, 0}) == 0.5);
  CHECK(fit.predict({1, 1}) == 0.5);
}

TEST_CASE("degenerate designs are rejected") {
  Dataset all_treated =
      DatasetBuilder({"V"}).add({0}, 1, 1.0, 5).add({1}, 1, 0.0, 5).finalize();
  try {
    fit_logistic(all_treated, Design::main_effects(1));
    FAIL("expected NoActionVariation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoActionVariation);
  }

  Dataset none_treated =
      DatasetBuilder({"V"}).add({0}, 0, 1.0, 5).add({1}, 0, 0.0, 5).finalize();
  CHECK_THROWS_AS(fit_logistic(none_treated, Design::main_effects(1)), Error);

  // A duplicated covariate makes the main-effects design rank deficient.
  Dataset dup = DatasetBuilder({"V", "V2"})
                    .add({0, 0}, 1, 1.0, 3)
                    .add({0, 0}, 0, 0.0, 3)
                    .add({1, 1}, 1, 1.0, 3)
                    .add({1, 1}, 0, 0.0, 3)
                    .finalize();
  try {
    fit_logistic(dup, Design::main_effects(2));
    FAIL("expected RankDeficientDesign");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RankDeficientDesign);
  }

  Dataset empty;
  empty.covariate_names = {"V"};
  CHECK_THROWS_AS(fit_logistic(empty, Design::main_effects(1)), Error);
}

TEST_CASE("expit is stable at extremes") {
  CHECK(expit(0.0) == 0.5);
  CHECK(expit(800.0) == 1.0);
  CHECK(expit(-800.0) == 0.0);
  CHECK(expit(40.0) + expit(-40.0) == doctest::Approx(1.0).epsilon(1e-15));
}
