#include <doctest.h>

#include "medpath/error.hpp"
#include "medpath/nuisance.hpp"
#include "medpath/rng.hpp"
#include "medpath/simulation.hpp"
#include "support/discrete.hpp"

#include <cmath>

using namespace medpath;

namespace {

FittedGlm fixed_logistic(const std::string& formula, std::vector<double> coef) {
  FittedGlm g;
  g.family = GlmFamily::logistic;
  g.formula = parse_formula(formula);
  g.coef = Eigen::Map<Vector>(coef.data(), static_cast<Index>(coef.size()));
  g.converged = true;
  return g;
}

Dataset small_mediator_data(std::vector<double> m_values) {
  const auto n = static_cast<Index>(m_values.size());
  Vector a(n);
  for (Index i = 0; i < n; ++i) a[i] = i % 2;
  return Dataset(Matrix::Zero(n, 1), a, Matrix::Zero(n, 1),
                 Eigen::Map<Vector>(m_values.data(), n), Vector::Zero(n), {"c0"},
                 {"c1"});
}

/// Covariate-shifted draw: f(a | C0) reaches expit(10) at the top of C0.
Dataset shifted_data(Index n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix c0(n, 1), c1(n, 1);
  Vector a(n), m(n), y(n);
  for (Index i = 0; i < n; ++i) {
    c0(i, 0) = rng.uniform(0, 10);
    a[i] = rng.bernoulli(expit(-2 + 1.2 * c0(i, 0)));
    c1(i, 0) = rng.normal() + a[i];
    m[i] = rng.normal() + c1(i, 0);
    y[i] = rng.normal() + m[i];
  }
  return Dataset(c0, a, c1, m, y, {"c0"}, {"c1"});
}

}  // namespace

TEST_SUITE("nuisance") {

TEST_CASE("density ratio from identical models is one") {
  const Dataset d = small_mediator_data({0.1, -0.3, 1.0, 2.0});
  const FittedGlm g = fixed_logistic("1 + M", {0.2, -0.7});
  const DensityRatioModel r = density_ratio(g, g, {});
  CHECK(r.compatible);
  const Vector v = evaluate(r, d);
  for (Index i = 0; i < v.size(); ++i) CHECK(v[i] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("density ratio odds algebra") {
  const Dataset d = small_mediator_data({1.0, 0.0, -0.5, 2.0});
  const DensityRatioModel r = density_ratio(fixed_logistic("1 + M", {0.5, 1.0}),
                                            fixed_logistic("1", {0.5}), {});
  CHECK(r.compatible);
  const Vector v = evaluate(r, d, {.positivity_floor = 0.0});
  CHECK(std::abs(v[0] - 2.718282) < 1e-6);
  for (Index i = 0; i < v.size(); ++i) {
    CHECK(std::abs(v[i] - std::exp(d.m()[i])) < 1e-12 * std::exp(d.m()[i]));
  }
}

TEST_CASE("density ratio positivity") {
  const Dataset d = small_mediator_data({0.0, 9.0, 0.0, 0.0});
  const DensityRatioModel r = density_ratio(fixed_logistic("1 + M", {0.0, 1.0}),
                                            fixed_logistic("1", {0.0}), {});
  try {
    evaluate(r, d, {.positivity_floor = 1e-3});
    FAIL("expected positivity error");
  } catch (const PositivityError& e) {
    CHECK(e.rows == std::vector<std::size_t>{1});
  }
  CHECK_NOTHROW(evaluate(r, d, {.positivity_floor = 1e-3,
                                .policy = PositivityPolicy::warn}));
  CHECK_THROWS_AS(density_ratio(fixed_logistic("1", {0}),
                                FittedGlm{.family = GlmFamily::linear}, {}),
                  ContractError);
}

TEST_CASE("Bayes consistency on the discrete oracle") {
  const auto law = testing::random_law(3);
  const Dataset d = testing::sample(law, 2000, 4);
  const NuisanceSet set = assemble_nuisances(d, testing::saturated_spec(), {});
  const Vector mr = evaluate(set.m_ratio, d);
  const Vector cr = evaluate(set.c1_ratio, d);
  double worst = 0;
  for (Index i = 0; i < d.n(); ++i) {
    worst = std::max(worst, std::abs(mr[i] - testing::empirical_m_ratio(d, i)));
    worst = std::max(worst, std::abs(cr[i] - testing::empirical_c1_ratio(d, i)));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("compatible_formula_union examples") {
  CHECK(compatible_formula_union(parse_formula("1 + c0"), parse_formula("c0 + c1")) ==
        parse_formula("1 + c0 + c1"));
  CHECK(compatible_formula_union(parse_formula("1 + c0"), parse_formula("m")) ==
        parse_formula("1 + c0 + m"));
  CHECK(compatible_formula_union(parse_formula("1 + c0 + c0^2"),
                                 parse_formula("c0^2")) ==
        parse_formula("1 + c0 + c0^2"));
}

TEST_CASE("property: compatibility containment after the union") {
  const Dataset d = generate({}, 2000, 8);
  NuisanceSpec spec = scenario_models(ScenarioId::int_).nuisances;
  spec.cascade.kind = CascadeKind::regression;
  spec.c1_denominator.reset();
  spec.m_denominator.reset();
  spec.c1_numerator.formula = parse_formula("c11 + c12 + c13");
  spec.m_numerator.formula = parse_formula("M + c11:M");
  spec.enforce_compatibility = true;
  const NuisanceSet set = assemble_nuisances(d, spec, {});
  CHECK(set.c1_ratio.compatible);
  CHECK(set.m_ratio.compatible);
  for (const auto& t : set.c1_ratio.denominator.formula.terms()) {
    CHECK(set.c1_ratio.numerator.formula.contains(t));
  }
  for (const auto& t : set.m_ratio.denominator.formula.terms()) {
    CHECK(set.m_ratio.numerator.formula.contains(t));
  }
  CHECK(set.m_ratio.denominator.formula == set.c1_ratio.numerator.formula);
}

TEST_CASE("cascade with an M-free outcome model") {
  const Dataset d = generate({}, 3000, 2);
  const OutcomeCascade c = fit_outcome_cascade(
      d, parse_formula("1 + c0 + A + c11 + c12 + c13 + A:c11"),
      parse_formula("1 + c0 + c11 + c12 + c13"), parse_formula("1 + c0"), {});
  const Vector u1 = c.b_reference(d);
  const Vector bp = c.b_prime_values(d);
  CHECK((u1 - bp).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("cascade on a constant outcome") {
  const Dataset d = generate({}, 500, 3).with_y(Vector::Constant(500, 3.0));
  const OutcomeCascade c = fit_outcome_cascade(
      d, parse_formula("1 + c0 + A + c11 + c12 + c13 + M + A:M"),
      parse_formula("1 + c0 + c11 + c12 + c13"), parse_formula("1 + c0"), {});
  CHECK((c.b_reference(d).array() - 3.0).abs().maxCoeff() < 1e-10);
  CHECK((c.b_prime_values(d).array() - 3.0).abs().maxCoeff() < 1e-10);
  CHECK((c.b_pprime_values(d).array() - 3.0).abs().maxCoeff() < 1e-10);
}

TEST_CASE("saturated cascade equals enumeration") {
  for (std::uint64_t seed : {1u, 2u, 5u}) {
    const auto law = testing::random_law(seed);
    const Dataset d = testing::sample(law, 2000, seed + 100);
    const auto spec = testing::saturated_spec();
    const OutcomeCascade c = fit_outcome_cascade(d, spec.cascade.b, spec.cascade.b_prime,
                                                 spec.cascade.b_pprime, {});
    CHECK(std::abs(c.b_pprime_values(d).mean() - testing::enumeration_beta(d)) < 1e-10);
  }
}

TEST_CASE("property: cascade uses only its strata") {
  const Dataset d = generate({}, 2000, 6);
  const auto spec = scenario_models(ScenarioId::int_).nuisances.cascade;
  const OutcomeCascade c = fit_outcome_cascade(d, spec.b, spec.b_prime, spec.b_pprime, {});
  std::vector<Index> treated;
  for (Index i = 0; i < d.n(); ++i) {
    if (d.a()[i] == 1.0) treated.push_back(i);
  }
  const Dataset sub = d.rows(treated);
  const FittedGlm refit = fit(sub, spec.b_prime, c.b_reference(sub), GlmFamily::linear);
  CHECK((refit.coef - c.b_prime->coef).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("plug-in cascade matches the closed form at large n") {
  const Dataset d = generate({}, 200000, 12);
  const auto spec = scenario_models(ScenarioId::int_).nuisances.cascade;
  const OutcomeCascade c = fit_plugin_cascade(d, spec.b, spec.mediator_mean, spec.c1_mean, {});
  // B'' = 1.447 + 1.231 c0 for the default generator
  const Vector bpp = c.b_pprime_values(d);
  for (Index i = 0; i < 5; ++i) {
    CHECK(std::abs(bpp[i] - (1.447 + 1.231 * d.c0()(i, 0))) < 0.05);
  }
  CHECK_THROWS_AS(fit_plugin_cascade(d, parse_formula("1 + M^2"), spec.mediator_mean,
                                     spec.c1_mean, {}),
                  ContractError);
}

TEST_CASE("fit_propensity") {
  Rng rng(21);
  const Index n = 1000;
  Vector a(n);
  for (Index i = 0; i < n; ++i) a[i] = i < 500 ? 1.0 : 0.0;
  Matrix c0(n, 1);
  for (Index i = 0; i < n; ++i) c0(i, 0) = rng.normal();
  const Dataset d(c0, a, Matrix::Zero(n, 1), Vector::Zero(n), Vector::Zero(n),
                  {"c0"}, {"c1"});
  const FittedGlm g = fit_propensity(d, parse_formula("1"), GlmFamily::logistic, {});
  CHECK(std::abs(g.coef[0] - logit(0.5)) < 1e-10);

  const Dataset sim = generate({}, 5000, 4);
  const FittedGlm pr = fit_propensity(sim, parse_formula("1 + c0"), GlmFamily::probit, {});
  CHECK(pr.converged);
  CHECK(pr.family == GlmFamily::probit);

  const Dataset all_one(c0, Vector::Ones(n), Matrix::Zero(n, 1), Vector::Zero(n),
                        Vector::Zero(n), {"c0"}, {"c1"});
  CHECK_THROWS_AS(fit_propensity(all_one, parse_formula("1"), GlmFamily::logistic, {}),
                  DegenerateResponseError);
  CHECK_THROWS_AS(fit_propensity(sim, parse_formula("1 + A"), GlmFamily::logistic, {}),
                  FormulaError);
  CHECK_THROWS_AS(fit_propensity(sim, parse_formula("1"), GlmFamily::linear, {}),
                  ContractError);
}

TEST_CASE("assemble_nuisances on a simulated draw") {
  const Dataset d = generate({}, 5000, 77);
  for (const auto id : {ScenarioId::int_, ScenarioId::a, ScenarioId::b, ScenarioId::c}) {
    const NuisanceSet set = assemble_nuisances(d, scenario_models(id).nuisances, {});
    CHECK(set.cascade.b.converged);
    CHECK(set.f_a_c0.converged);
    CHECK(set.c1_ratio.numerator.converged);
    CHECK(set.c1_ratio.denominator.converged);
    CHECK(set.m_ratio.numerator.converged);
    CHECK(set.m_ratio.denominator.converged);
    CHECK(set.fitted_ranges.size() == 5);
    for (const auto& r : set.fitted_ranges) {
      CHECK(r.min > 0.0);
      CHECK(r.max < 1.0);
      CHECK(r.min <= r.max);
    }
  }
}

TEST_CASE("assemble_nuisances error paths") {
  const Dataset d = generate({}, 300, 5);
  std::vector<Index> keep;
  bool seen_treated = false;
  for (Index i = 0; i < d.n(); ++i) {
    if (d.a()[i] == 0.0) keep.push_back(i);
    else if (!seen_treated) {
      keep.push_back(i);
      seen_treated = true;
    }
  }
  NuisanceSpec spec = scenario_models(ScenarioId::int_).nuisances;
  spec.cascade.kind = CascadeKind::regression;
  CHECK_THROWS_AS(assemble_nuisances(d.rows(keep), spec, {}), StratumError);

  const Dataset shifted = shifted_data(3000, 9);
  NuisanceSpec simple;
  simple.cascade.b = parse_formula("1 + c0 + A + c1 + M");
  simple.cascade.b_prime = parse_formula("1 + c0 + c1");
  simple.cascade.b_pprime = parse_formula("1 + c0");
  simple.f_a_c0 = {parse_formula("1 + c0")};
  simple.c1_numerator = {parse_formula("1 + c0 + c1")};
  simple.m_numerator = {parse_formula("1 + c0 + c1 + M")};
  simple.positivity_floor = 0.01;
  CHECK_THROWS_AS(assemble_nuisances(shifted, simple, {}), PositivityError);
  simple.policy = PositivityPolicy::warn;
  const NuisanceSet set = assemble_nuisances(shifted, simple, {});
  CHECK(set.positivity_violations > 0);
}

}  // TEST_SUITE
