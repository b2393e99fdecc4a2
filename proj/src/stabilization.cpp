#include "medpath/stabilization.hpp"

#include "medpath/error.hpp"

#include <cmath>

namespace medpath {

double stabilizing_shift(const Vector& p_comparison, const Vector& a) {
  if (p_comparison.size() != a.size()) {
    throw ShapeError("propensity and treatment vectors differ in length");
  }
  const auto n = static_cast<double>(a.size());
  double reference_share = 0.0;
  double odds_sum = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    if (a[i] == kReferenceLevel) {
      reference_share += 1.0;
    } else {
      const double p = p_comparison[i];
      odds_sum += (1.0 - p) / p;
    }
  }
  if (reference_share == 0.0 || reference_share == n) {
    throw StratumError("stabilization needs both treatment groups non-empty");
  }
  if (!std::isfinite(odds_sum) || odds_sum <= 0.0) {
    throw WeightError("inverse odds sum is not finite and positive");
  }
  return -std::log(reference_share / n) + std::log(odds_sum / n);
}

Vector apply_logit_shift(const Vector& p_comparison, double shift) {
  const double scale = std::exp(shift);
  return p_comparison.unaryExpr([scale](double p) {
    const double odds = scale * p / (1.0 - p);
    if (std::isinf(odds)) return 1.0;
    return odds / (1.0 + odds);
  });
}

StabilizedPropensity stabilize_propensity(const FittedGlm& model,
                                          const Dataset& data,
                                          const TreatmentCoding& coding) {
  coding.validate();
  const Vector p = predict_mean(model, data);
  return {model, stabilizing_shift(p, data.a()), coding};
}

Vector evaluate(const StabilizedPropensity& model, const Dataset& data) {
  return apply_logit_shift(predict_mean(model.base, data), model.logit_shift);
}

}  // namespace medpath
