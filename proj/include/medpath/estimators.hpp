#pragma once

#include "medpath/nuisance.hpp"

#include <map>
#include <string>

namespace medpath {

enum class EstimatorKind {
  mle,
  ipw_a,
  ipw_b,
  mr,
  substitution,
  aipw_mean,
  pse,
  percent_mediated,
};

std::string to_string(EstimatorKind k);
EstimatorKind parse_estimator(std::string_view s);

struct PointEstimate {
  double value = 0.0;
  EstimatorKind kind = EstimatorKind::mle;
  Index n = 0;
  std::map<std::string, double> diagnostics;
};

/// Per-row pieces of the efficient influence function:
///   term1 = 1{A=a'}/f(a'|C0) * M^ratio * (Y - B)
///   term2 = 1{A=a}/f(a|C0) / C1^ratio * (B - B')
///   term3 = 1{A=a'}/f(a'|C0) * (B' - B'')
/// and the plug-in B''.
struct EifTerms {
  Vector term1;
  Vector term2;
  Vector term3;
  Vector plug_in;
  Vector weight1;  // 1{A=a'}/f(a'|C0) * M^ratio
  Vector weight2;  // 1{A=a}/{f(a|C0) C1^ratio}
  Vector weight3;  // 1{A=a'}/f(a'|C0)
};

EifTerms eif_terms(const Dataset& data, const NuisanceValues& values);

/// P_n B''(a', a, C0).
PointEstimate beta_mle(const OutcomeCascade& cascade, const Dataset& data);

/// P_n[1{A=a'}/f(a'|C0) * M^ratio * Y].
PointEstimate beta_a(const Dataset& data, const FittedGlm& f_a_c0,
                     const DensityRatioModel& m_ratio,
                     const TreatmentCoding& coding,
                     const WeightingOptions& options = {});

/// P_n[1{A=a}/f(a|C0) / C1^ratio * B(M, C1, a', C0)].
PointEstimate beta_b(const Dataset& data, const FittedGlm& f_a_c0,
                     const DensityRatioModel& c1_ratio, const FittedGlm& b,
                     const TreatmentCoding& coding,
                     const WeightingOptions& options = {});

/// term1 + term2 + term3 + B'' - beta, per row.
Vector eif(const Dataset& data, const NuisanceSet& nuisances, double beta,
           const TreatmentCoding& coding, const WeightingOptions& options = {});

/// Root of P_n EIF(beta) = 0, which is linear in beta:
/// P_n[term1 + term2 + term3 + B''].
PointEstimate beta_mr(const Dataset& data, const NuisanceSet& nuisances,
                      const TreatmentCoding& coding,
                      const WeightingOptions& options = {});

/// The same four estimators from pre-evaluated nuisances.
PointEstimate beta_mle(const Dataset& data, const NuisanceValues& values);
PointEstimate beta_a(const Dataset& data, const NuisanceValues& values);
PointEstimate beta_b(const Dataset& data, const NuisanceValues& values);
PointEstimate beta_mr(const Dataset& data, const NuisanceValues& values);

/// AIPW estimate of E{Y(level)}:
/// P_n[1{A=level}/f(level|C0) (Y - E(Y|level,C0)) + E(Y|level,C0)].
PointEstimate aipw_mean(const Dataset& data, Arm level,
                        const FittedGlm& outcome_model,
                        const FittedGlm& propensity,
                        const TreatmentCoding& coding,
                        const WeightingOptions& options = {});

/// beta - E{Y(a')}.
PointEstimate pse(const PointEstimate& beta_hat, const PointEstimate& ey_aprime);

/// 100 * pse / total effect.
double percent_mediated(double pse_value, double total_effect);

/// Table rendering: rounded integer percent, '*' appended when flagged.
std::string format_percent_mediated(double percent, bool significant = false);

}  // namespace medpath
