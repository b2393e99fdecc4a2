#include "medpath/estimators.hpp"

#include "medpath/error.hpp"

#include <cmath>

namespace medpath {

std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::mle: return "mle";
    case EstimatorKind::ipw_a: return "ipw_a";
    case EstimatorKind::ipw_b: return "ipw_b";
    case EstimatorKind::mr: return "mr";
    case EstimatorKind::substitution: return "substitution";
    case EstimatorKind::aipw_mean: return "aipw";
    case EstimatorKind::pse: return "pse";
    case EstimatorKind::percent_mediated: return "percent_mediated";
  }
  return "unknown";
}

EstimatorKind parse_estimator(std::string_view s) {
  if (s == "mle") return EstimatorKind::mle;
  if (s == "ipw_a" || s == "a") return EstimatorKind::ipw_a;
  if (s == "ipw_b" || s == "b") return EstimatorKind::ipw_b;
  if (s == "mr") return EstimatorKind::mr;
  if (s == "substitution") return EstimatorKind::substitution;
  throw ConfigError("unknown estimator '" + std::string(s) + "'");
}

namespace {

void require_finite(const Vector& w, const char* what) {
  if (!w.allFinite()) {
    throw WeightError(std::string(what) + " has non-finite weights");
  }
}

/// min/max over rows where the indicator is set.
void record_range(std::map<std::string, double>& diag, const Vector& weight,
                  const Vector& a, double level) {
  double lo = INFINITY, hi = -INFINITY;
  for (Index i = 0; i < weight.size(); ++i) {
    if (a[i] == level) {
      lo = std::min(lo, weight[i]);
      hi = std::max(hi, weight[i]);
    }
  }
  auto [it_min, new_min] = diag.try_emplace("min_weight", lo);
  if (!new_min) it_min->second = std::min(it_min->second, lo);
  auto [it_max, new_max] = diag.try_emplace("max_weight", hi);
  if (!new_max) it_max->second = std::max(it_max->second, hi);
}

Vector reference_weight(const Vector& a, const Vector& p_comparison) {
  Vector w(a.size());
  for (Index i = 0; i < a.size(); ++i) {
    w[i] = a[i] == kReferenceLevel ? 1.0 / (1.0 - p_comparison[i]) : 0.0;
  }
  return w;
}

Vector comparison_weight(const Vector& a, const Vector& p_comparison) {
  Vector w(a.size());
  for (Index i = 0; i < a.size(); ++i) {
    w[i] = a[i] == kComparisonLevel ? 1.0 / p_comparison[i] : 0.0;
  }
  return w;
}

PointEstimate make(double value, EstimatorKind kind, Index n) {
  if (!std::isfinite(value)) {
    throw WeightError(to_string(kind) + " estimate is not finite");
  }
  PointEstimate e;
  e.value = value;
  e.kind = kind;
  e.n = n;
  return e;
}

}  // namespace

EifTerms eif_terms(const Dataset& data, const NuisanceValues& v) {
  const Vector& a = data.a();
  EifTerms t;
  t.weight3 = reference_weight(a, v.p_comparison);
  t.weight1 = t.weight3.cwiseProduct(v.m_ratio);
  t.weight2 = comparison_weight(a, v.p_comparison).cwiseQuotient(v.c1_ratio);
  require_finite(t.weight1, "EIF term 1");
  require_finite(t.weight2, "EIF term 2");
  require_finite(t.weight3, "EIF term 3");
  t.term1 = t.weight1.cwiseProduct(data.y() - v.b);
  t.term2 = t.weight2.cwiseProduct(v.b - v.b_prime);
  t.term3 = t.weight3.cwiseProduct(v.b_prime - v.b_pprime);
  t.plug_in = v.b_pprime;
  return t;
}

PointEstimate beta_mle(const Dataset& data, const NuisanceValues& v) {
  return make(v.b_pprime.mean(), EstimatorKind::mle, data.n());
}

PointEstimate beta_mle(const OutcomeCascade& cascade, const Dataset& data) {
  return make(cascade.b_pprime_values(data).mean(), EstimatorKind::mle,
              data.n());
}

PointEstimate beta_a(const Dataset& data, const NuisanceValues& v) {
  const Vector w =
      reference_weight(data.a(), v.p_comparison).cwiseProduct(v.m_ratio);
  require_finite(w, "ipw_a");
  PointEstimate e =
      make(w.cwiseProduct(data.y()).mean(), EstimatorKind::ipw_a, data.n());
  record_range(e.diagnostics, w, data.a(), kReferenceLevel);
  return e;
}

PointEstimate beta_b(const Dataset& data, const NuisanceValues& v) {
  const Vector w =
      comparison_weight(data.a(), v.p_comparison).cwiseQuotient(v.c1_ratio);
  require_finite(w, "ipw_b");
  PointEstimate e =
      make(w.cwiseProduct(v.b).mean(), EstimatorKind::ipw_b, data.n());
  record_range(e.diagnostics, w, data.a(), kComparisonLevel);
  return e;
}

PointEstimate beta_mr(const Dataset& data, const NuisanceValues& v) {
  const EifTerms t = eif_terms(data, v);
  const Vector total = t.term1 + t.term2 + t.term3 + t.plug_in;
  PointEstimate e = make(total.mean(), EstimatorKind::mr, data.n());
  e.diagnostics["mean_term1"] = t.term1.mean();
  e.diagnostics["mean_term2"] = t.term2.mean();
  e.diagnostics["mean_term3"] = t.term3.mean();
  record_range(e.diagnostics, t.weight1, data.a(), kReferenceLevel);
  record_range(e.diagnostics, t.weight2, data.a(), kComparisonLevel);
  record_range(e.diagnostics, t.weight3, data.a(), kReferenceLevel);
  return e;
}

PointEstimate beta_a(const Dataset& data, const FittedGlm& f_a_c0,
                     const DensityRatioModel& m_ratio,
                     const TreatmentCoding& coding,
                     const WeightingOptions& options) {
  coding.validate();
  NuisanceValues v;
  v.p_comparison = propensity_values(f_a_c0, data, options, "f(a|C0)");
  v.m_ratio = evaluate(m_ratio, data, options);
  return beta_a(data, v);
}

PointEstimate beta_b(const Dataset& data, const FittedGlm& f_a_c0,
                     const DensityRatioModel& c1_ratio, const FittedGlm& b,
                     const TreatmentCoding& coding,
                     const WeightingOptions& options) {
  coding.validate();
  NuisanceValues v;
  v.p_comparison = propensity_values(f_a_c0, data, options, "f(a|C0)");
  v.c1_ratio = evaluate(c1_ratio, data, options);
  v.b = predict_mean(b, data, {.a = kReferenceLevel});
  return beta_b(data, v);
}

Vector eif(const Dataset& data, const NuisanceSet& nuisances, double beta,
           const TreatmentCoding& coding, const WeightingOptions& options) {
  coding.validate();
  const EifTerms t = eif_terms(data, evaluate(nuisances, data, options));
  return (t.term1 + t.term2 + t.term3 + t.plug_in).array() - beta;
}

PointEstimate beta_mr(const Dataset& data, const NuisanceSet& nuisances,
                      const TreatmentCoding& coding,
                      const WeightingOptions& options) {
  coding.validate();
  return beta_mr(data, evaluate(nuisances, data, options));
}

PointEstimate aipw_mean(const Dataset& data, Arm level,
                        const FittedGlm& outcome_model,
                        const FittedGlm& propensity,
                        const TreatmentCoding& coding,
                        const WeightingOptions& options) {
  coding.validate();
  const double lv = level_of(level);
  const Vector p = propensity_values(propensity, data, options, "f(a|C0)");
  const Vector w = level == Arm::comparison ? comparison_weight(data.a(), p)
                                            : reference_weight(data.a(), p);
  require_finite(w, "aipw");
  const Vector fitted = predict_mean(outcome_model, data, {.a = lv});
  const Vector contrib =
      w.cwiseProduct(data.y() - fitted) + fitted;
  PointEstimate e = make(contrib.mean(), EstimatorKind::aipw_mean, data.n());
  record_range(e.diagnostics, w, data.a(), lv);
  return e;
}

PointEstimate pse(const PointEstimate& beta_hat,
                  const PointEstimate& ey_aprime) {
  if (beta_hat.n != ey_aprime.n) {
    throw ContractError("pse inputs come from samples of different size");
  }
  return make(beta_hat.value - ey_aprime.value, EstimatorKind::pse,
              beta_hat.n);
}

double percent_mediated(double pse_value, double total_effect) {
  if (total_effect == 0.0) {
    throw DivisionError("total effect is zero; percent mediated undefined");
  }
  return 100.0 * pse_value / total_effect;
}

std::string format_percent_mediated(double percent, bool significant) {
  std::string s = std::to_string(std::lround(percent));
  if (s == "-0") s = "0";
  if (significant) s += '*';
  return s;
}

}  // namespace medpath
