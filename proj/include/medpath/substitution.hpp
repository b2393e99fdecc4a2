#pragma once

#include "medpath/estimators.hpp"

namespace medpath {

struct SubstitutionFormulas {
  Formula b;
  Formula b_prime;
  Formula b_pprime;
};

struct SubstitutionResult {
  /// Regression-kind cascade holding the three weighted fits. Its B has
  /// the treatment terms removed, since it is fitted on A = a' rows only.
  OutcomeCascade cascade;
  /// value = P_n B''; diagnostics carry mean_term1..3 at the returned fits.
  PointEstimate estimate;
};

/// Iterated weighted least squares:
///   (1) Y on b over A=a' rows, weight M^ratio / f(a'|C0)
///   (2) B(.,a',.) on b_prime over A=a rows, weight 1 / {f(a|C0) C1^ratio}
///   (3) B' on b_pprime over A=a' rows, weight 1 / f(a'|C0)
/// With an intercept in each formula the three weighted residual means
/// vanish, so the result coincides with beta_mr at these fits.
SubstitutionResult stabilized_substitution(const Dataset& data,
                                           const SubstitutionFormulas& formulas,
                                           const FittedGlm& f_a_c0,
                                           const DensityRatioModel& c1_ratio,
                                           const DensityRatioModel& m_ratio,
                                           const TreatmentCoding& coding,
                                           const WeightingOptions& options = {});

}  // namespace medpath
