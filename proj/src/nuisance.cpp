#include "medpath/nuisance.hpp"

#include "medpath/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace medpath {

Index check_positivity(const Vector& p, const WeightingOptions& options,
                       const std::string& what) {
  const double lo = options.positivity_floor;
  const double hi = 1.0 - options.positivity_floor;
  std::vector<std::size_t> rows;
  for (Index i = 0; i < p.size(); ++i) {
    if (!(p[i] >= lo && p[i] <= hi)) rows.push_back(static_cast<std::size_t>(i));
  }
  if (!rows.empty() && options.policy == PositivityPolicy::error) {
    std::ostringstream msg;
    msg << what << ": " << rows.size() << " row(s) outside [" << lo << ", "
        << hi << "], e.g. rows";
    for (std::size_t k = 0; k < std::min<std::size_t>(rows.size(), 10); ++k) {
      msg << ' ' << rows[k];
    }
    throw PositivityError(msg.str(), std::move(rows));
  }
  return static_cast<Index>(rows.size());
}

namespace {

bool is_treatment(const Dataset& data, const std::string& name) {
  return name == "A" || name == data.a_name();
}
bool is_mediator(const Dataset& data, const std::string& name) {
  return name == "M" || name == data.m_name();
}
bool in_block(const std::vector<std::string>& block, const std::string& name) {
  return std::find(block.begin(), block.end(), name) != block.end();
}

enum Allow : unsigned { kC0 = 1, kTreatment = 2, kC1 = 4, kMediator = 8 };

void require_variables(const Dataset& data, const Formula& f, unsigned allow,
                       const std::string& what) {
  for (const auto& v : f.variables()) {
    bool ok = false;
    if (in_block(data.c0_names(), v)) ok = allow & kC0;
    else if (in_block(data.c1_names(), v)) ok = allow & kC1;
    else if (is_treatment(data, v)) ok = allow & kTreatment;
    else if (is_mediator(data, v)) ok = allow & kMediator;
    else throw FormulaError(what + ": unresolved column name '" + v + "'");
    if (!ok) {
      throw FormulaError(what + " may not reference '" + v + "'");
    }
  }
}

std::vector<std::string> c1_and_mediator(const Dataset& data) {
  std::vector<std::string> names = data.c1_names();
  names.push_back("M");
  names.push_back(data.m_name());
  return names;
}

void require_stratum(const Dataset& data, Arm arm, const Formula& f,
                     const std::string& what) {
  const Index count = data.count_arm(arm);
  if (count < static_cast<Index>(std::max<std::size_t>(f.size(), 1))) {
    throw StratumError(what + ": stratum A=" +
                       std::string(arm == Arm::comparison ? "a" : "a'") +
                       " has " + std::to_string(count) + " row(s) for " +
                       std::to_string(f.size()) + " term(s)");
  }
}

Vector arm_indicator(const Dataset& data, Arm arm) {
  const double level = level_of(arm);
  return data.a().unaryExpr([level](double v) { return v == level ? 1.0 : 0.0; });
}

Vector propensity_values_counted(const FittedGlm& model, const Dataset& data,
                                 const WeightingOptions& options,
                                 const std::string& what, Index& violations) {
  Vector p = predict_mean(model, data);
  if (options.mode == WeightMode::bounded) {
    p = apply_logit_shift(p, stabilizing_shift(p, data.a()));
  }
  violations += check_positivity(p, options, what);
  return p;
}

Vector ratio_values_counted(const DensityRatioModel& model, const Dataset& data,
                            const WeightingOptions& options,
                            Index& violations) {
  const Vector pn = propensity_values_counted(model.numerator, data, options,
                                              "ratio numerator", violations);
  const Vector pd = propensity_values_counted(model.denominator, data, options,
                                              "ratio denominator", violations);
  Vector r(pn.size());
  for (Index i = 0; i < r.size(); ++i) {
    r[i] = (pn[i] / (1.0 - pn[i])) / (pd[i] / (1.0 - pd[i]));
    if (!std::isfinite(r[i]) || r[i] <= 0.0) {
      throw WeightError("density ratio is not finite and positive at row " +
                        std::to_string(i));
    }
  }
  return r;
}

}  // namespace

FittedGlm fit_propensity(const Dataset& data, const Formula& formula,
                         GlmFamily family, const TreatmentCoding& coding) {
  coding.validate();
  if (family == GlmFamily::linear) {
    throw ContractError("propensity models must be logistic or probit");
  }
  require_variables(data, formula, kC0 | kC1 | kMediator, "propensity formula");
  const Index treated = data.count_arm(Arm::comparison);
  if (treated == 0 || treated == data.n()) {
    throw DegenerateResponseError(
        "treatment takes a single value; propensity is degenerate");
  }
  return fit(data, formula, data.a(), family);
}

Vector propensity_values(const FittedGlm& model, const Dataset& data,
                         const WeightingOptions& options,
                         const std::string& what) {
  Index violations = 0;
  return propensity_values_counted(model, data, options, what, violations);
}

DensityRatioModel density_ratio(FittedGlm numerator, FittedGlm denominator,
                                const TreatmentCoding& coding) {
  coding.validate();
  if (numerator.family == GlmFamily::linear ||
      denominator.family == GlmFamily::linear) {
    throw ContractError("density ratio needs binary-response propensities");
  }
  DensityRatioModel out{std::move(numerator), std::move(denominator), coding,
                        false};
  out.compatible = std::all_of(
      out.denominator.formula.terms().begin(),
      out.denominator.formula.terms().end(),
      [&](const Term& t) { return out.numerator.formula.contains(t); });
  return out;
}

Vector evaluate(const DensityRatioModel& model, const Dataset& data,
                const WeightingOptions& options) {
  Index violations = 0;
  return ratio_values_counted(model, data, options, violations);
}

Formula compatible_formula_union(const Formula& base_logit_terms,
                                 const Formula& log_ratio_terms) {
  std::vector<Term> terms = base_logit_terms.terms();
  for (const auto& t : log_ratio_terms.terms()) {
    if (std::find(terms.begin(), terms.end(), t) == terms.end()) {
      terms.push_back(t);
    }
  }
  return Formula(std::move(terms));
}

// ---------------------------------------------------------------------------
// Cascade

Vector OutcomeCascade::b_reference(const Dataset& data) const {
  return predict_mean(b, data, {.a = kReferenceLevel});
}

Vector OutcomeCascade::b_prime_values(const Dataset& data) const {
  if (kind == CascadeKind::regression) return predict_mean(*b_prime, data);
  const Vector m_hat =
      predict_mean(*mediator_mean, data, {.a = kComparisonLevel});
  return predict_mean(
      b, data,
      {.a = kReferenceLevel,
       .m = std::span<const double>(m_hat.data(),
                                    static_cast<std::size_t>(m_hat.size()))});
}

Vector OutcomeCascade::b_pprime_values(const Dataset& data) const {
  if (kind == CascadeKind::regression) return predict_mean(*b_pprime, data);
  Matrix c1_hat(data.n(), data.p1());
  for (Index j = 0; j < data.p1(); ++j) {
    c1_hat.col(j) = predict_mean(c1_means[static_cast<std::size_t>(j)], data,
                                 {.a = kReferenceLevel});
  }
  return b_prime_values(data.with_c1(std::move(c1_hat)));
}

OutcomeCascade fit_outcome_cascade(const Dataset& data,
                                   const Formula& b_formula,
                                   const Formula& bprime_formula,
                                   const Formula& bpprime_formula,
                                   const TreatmentCoding& coding,
                                   GlmFamily b_family) {
  coding.validate();
  require_variables(data, b_formula, kC0 | kTreatment | kC1 | kMediator,
                    "B formula");
  require_variables(data, bprime_formula, kC0 | kC1, "B' formula");
  require_variables(data, bpprime_formula, kC0, "B'' formula");
  if (b_family == GlmFamily::probit) {
    throw ContractError("outcome model family must be linear or logistic");
  }
  require_stratum(data, Arm::comparison, bprime_formula, "B' fit");
  require_stratum(data, Arm::reference, bpprime_formula, "B'' fit");

  OutcomeCascade out;
  out.kind = CascadeKind::regression;
  out.coding = coding;
  out.b = fit(data, b_formula, data.y(), b_family);
  const Vector u1 = out.b_reference(data);
  out.b_prime = fit(data, bprime_formula, u1, GlmFamily::linear,
                    arm_indicator(data, Arm::comparison));
  const Vector u2 = predict_mean(*out.b_prime, data);
  out.b_pprime = fit(data, bpprime_formula, u2, GlmFamily::linear,
                     arm_indicator(data, Arm::reference));
  return out;
}

OutcomeCascade fit_plugin_cascade(const Dataset& data,
                                  const Formula& b_formula,
                                  const Formula& mediator_formula,
                                  const Formula& c1_formula,
                                  const TreatmentCoding& coding) {
  coding.validate();
  require_variables(data, b_formula, kC0 | kTreatment | kC1 | kMediator,
                    "B formula");
  require_variables(data, mediator_formula, kC0 | kTreatment | kC1,
                    "mediator mean formula");
  require_variables(data, c1_formula, kC0 | kTreatment, "C1 mean formula");
  const auto names = c1_and_mediator(data);
  if (!b_formula.affine_in(names)) {
    throw ContractError("plug-in cascade needs B affine in M and C1");
  }
  if (!mediator_formula.affine_in(data.c1_names())) {
    throw ContractError("plug-in cascade needs the mediator mean affine in C1");
  }
  require_stratum(data, Arm::comparison, Formula{}, "plug-in cascade");
  require_stratum(data, Arm::reference, Formula{}, "plug-in cascade");

  OutcomeCascade out;
  out.kind = CascadeKind::plug_in;
  out.coding = coding;
  out.b = fit(data, b_formula, data.y(), GlmFamily::linear);
  out.mediator_mean = fit(data, mediator_formula, data.m(), GlmFamily::linear);
  for (Index j = 0; j < data.p1(); ++j) {
    out.c1_means.push_back(
        fit(data, c1_formula, data.c1().col(j), GlmFamily::linear));
  }
  return out;
}

OutcomeCascade fit_cascade(const Dataset& data, const CascadeSpec& spec,
                           const TreatmentCoding& coding) {
  if (spec.kind == CascadeKind::regression) {
    return fit_outcome_cascade(data, spec.b, spec.b_prime, spec.b_pprime,
                               coding, spec.b_family);
  }
  if (spec.b_family != GlmFamily::linear) {
    throw ContractError("plug-in cascade needs a linear outcome model");
  }
  return fit_plugin_cascade(data, spec.b, spec.mediator_mean, spec.c1_mean,
                            coding);
}

// ---------------------------------------------------------------------------
// Assembly

NuisanceSet assemble_nuisances(const Dataset& data, const NuisanceSpec& spec,
                               const TreatmentCoding& coding) {
  coding.validate();
  NuisanceSet out;
  out.positivity_floor = spec.positivity_floor;
  out.cascade = fit_cascade(data, spec.cascade, coding);

  std::map<std::pair<std::string, GlmFamily>, FittedGlm> fitted;
  auto get = [&](const PropensitySpec& ps) -> const FittedGlm& {
    const auto key = std::make_pair(ps.formula.to_string(), ps.family);
    auto it = fitted.find(key);
    if (it == fitted.end()) {
      it = fitted
               .emplace(key, fit_propensity(data, ps.formula, ps.family,
                                            coding))
               .first;
    }
    return it->second;
  };

  const PropensitySpec c1_den = spec.c1_denominator.value_or(spec.f_a_c0);
  PropensitySpec c1_num = spec.c1_numerator;
  if (spec.enforce_compatibility) {
    c1_num.formula = compatible_formula_union(c1_den.formula, c1_num.formula);
  }
  const PropensitySpec m_den = spec.m_denominator.value_or(c1_num);
  PropensitySpec m_num = spec.m_numerator;
  if (spec.enforce_compatibility) {
    m_num.formula = compatible_formula_union(m_den.formula, m_num.formula);
  }

  require_variables(data, spec.f_a_c0.formula, kC0, "f(a|C0) formula");
  require_variables(data, c1_den.formula, kC0, "C1 ratio denominator");
  require_variables(data, c1_num.formula, kC0 | kC1, "C1 ratio numerator");
  require_variables(data, m_den.formula, kC0 | kC1, "M ratio denominator");

  out.f_a_c0 = get(spec.f_a_c0);
  out.c1_ratio = density_ratio(get(c1_num), get(c1_den), coding);
  out.m_ratio = density_ratio(get(m_num), get(m_den), coding);

  const WeightingOptions check{WeightMode::none, spec.positivity_floor,
                               spec.policy};
  const std::pair<const FittedGlm*, const char*> models[] = {
      {&out.f_a_c0, "f(a|C0)"},
      {&out.c1_ratio.numerator, "f(a|C1,C0)"},
      {&out.c1_ratio.denominator, "C1 ratio denominator"},
      {&out.m_ratio.numerator, "f(a|M,C1,C0)"},
      {&out.m_ratio.denominator, "M ratio denominator"}};
  for (const auto& [model, label] : models) {
    const Vector p = predict_mean(*model, data);
    out.fitted_ranges.push_back({p.minCoeff(), p.maxCoeff()});
    out.positivity_violations += check_positivity(p, check, label);
  }
  return out;
}

NuisanceValues evaluate(const NuisanceSet& nuisances, const Dataset& data,
                        const WeightingOptions& options) {
  NuisanceValues v;
  v.p_comparison = propensity_values_counted(nuisances.f_a_c0, data, options,
                                             "f(a|C0)",
                                             v.positivity_violations);
  v.c1_ratio = ratio_values_counted(nuisances.c1_ratio, data, options,
                                    v.positivity_violations);
  v.m_ratio = ratio_values_counted(nuisances.m_ratio, data, options,
                                   v.positivity_violations);
  v.b = nuisances.cascade.b_reference(data);
  v.b_prime = nuisances.cascade.b_prime_values(data);
  v.b_pprime = nuisances.cascade.b_pprime_values(data);
  return v;
}

}  // namespace medpath
