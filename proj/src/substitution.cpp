#include "medpath/substitution.hpp"

#include "medpath/error.hpp"

#include <algorithm>

namespace medpath {

SubstitutionResult stabilized_substitution(const Dataset& data,
                                           const SubstitutionFormulas& formulas,
                                           const FittedGlm& f_a_c0,
                                           const DensityRatioModel& c1_ratio,
                                           const DensityRatioModel& m_ratio,
                                           const TreatmentCoding& coding,
                                           const WeightingOptions& options) {
  coding.validate();
  const std::pair<const Formula*, const char*> checks[] = {
      {&formulas.b, "B"}, {&formulas.b_prime, "B'"}, {&formulas.b_pprime, "B''"}};
  for (const auto& [f, label] : checks) {
    if (!f->has_intercept()) {
      throw ContractError(std::string("substitution estimator: ") + label +
                          " formula must contain an intercept");
    }
  }
  for (const auto& v : formulas.b_prime.variables()) {
    if (v == "A" || v == data.a_name() || v == "M" || v == data.m_name()) {
      throw FormulaError("B' formula may not reference '" + v + "'");
    }
  }
  for (const auto& v : formulas.b_pprime.variables()) {
    if (data.has_column(v) &&
        std::find(data.c0_names().begin(), data.c0_names().end(), v) ==
            data.c0_names().end()) {
      throw FormulaError("B'' formula may not reference '" + v + "'");
    }
  }

  NuisanceValues v;
  v.positivity_violations = 0;
  v.p_comparison = propensity_values(f_a_c0, data, options, "f(a|C0)");
  v.c1_ratio = evaluate(c1_ratio, data, options);
  v.m_ratio = evaluate(m_ratio, data, options);

  const Vector& a = data.a();
  Vector w1(data.n()), w2(data.n()), w3(data.n());
  for (Index i = 0; i < data.n(); ++i) {
    const bool ref = a[i] == kReferenceLevel;
    const double p = v.p_comparison[i];
    w3[i] = ref ? 1.0 / (1.0 - p) : 0.0;
    w1[i] = w3[i] * v.m_ratio[i];
    w2[i] = ref ? 0.0 : 1.0 / (p * v.c1_ratio[i]);
  }
  if (!w1.allFinite() || !w2.allFinite() || !w3.allFinite()) {
    throw WeightError("substitution estimator has non-finite weights");
  }

  // At A = a' = 0 every treatment term is identically zero.
  Formula b_formula = formulas.b.without_terms_referencing("A");
  b_formula = b_formula.without_terms_referencing(data.a_name());

  SubstitutionResult out;
  OutcomeCascade& c = out.cascade;
  c.kind = CascadeKind::regression;
  c.coding = coding;
  c.b = fit(data, b_formula, data.y(), GlmFamily::linear, w1);
  v.b = c.b_reference(data);
  c.b_prime = fit(data, formulas.b_prime, v.b, GlmFamily::linear, w2);
  v.b_prime = predict_mean(*c.b_prime, data);
  c.b_pprime = fit(data, formulas.b_pprime, v.b_prime, GlmFamily::linear, w3);
  v.b_pprime = predict_mean(*c.b_pprime, data);

  const PointEstimate mr = beta_mr(data, v);
  out.estimate = beta_mle(data, v);
  out.estimate.kind = EstimatorKind::substitution;
  out.estimate.diagnostics = mr.diagnostics;
  out.estimate.diagnostics["mr_value"] = mr.value;
  return out;
}

}  // namespace medpath
