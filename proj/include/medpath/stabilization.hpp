#pragma once

#include "medpath/glm.hpp"

namespace medpath {

/// A propensity whose odds at level a are the base model's odds times
/// exp(logit_shift), with the shift chosen so that
///   P_n[1{A=a} f(a'|X)/f(a|X)] = P_n 1{A=a'}
/// holds exactly on the data it was computed from.
struct StabilizedPropensity {
  FittedGlm base;
  double logit_shift = 0.0;
  TreatmentCoding coding;
};

/// logit_shift = -log P_n 1{A=a'} + log P_n[1{A=a} f(a'|X)/f(a|X)].
StabilizedPropensity stabilize_propensity(const FittedGlm& model,
                                          const Dataset& data,
                                          const TreatmentCoding& coding);

/// Same construction from already-evaluated base probabilities f(a|X_i).
double stabilizing_shift(const Vector& p_comparison, const Vector& a);

/// f-dagger(a | X) on each row of `data`.
Vector evaluate(const StabilizedPropensity& model, const Dataset& data);

/// expit(logit(p) + shift), computed on the odds scale.
Vector apply_logit_shift(const Vector& p_comparison, double shift);

}  // namespace medpath
