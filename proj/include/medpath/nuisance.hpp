#pragma once

#include "medpath/glm.hpp"
#include "medpath/stabilization.hpp"

#include <optional>
#include <vector>

namespace medpath {

/// Whether propensities entering weights are used as fitted or replaced by
/// their bounded-weight (stabilized) versions.
enum class WeightMode { none, bounded };

enum class PositivityPolicy { error, warn };

struct WeightingOptions {
  WeightMode mode = WeightMode::none;
  double positivity_floor = 1e-3;
  PositivityPolicy policy = PositivityPolicy::error;
};

/// Counts rows with p outside [floor, 1 - floor]; throws PositivityError in
/// error mode when any exist.
Index check_positivity(const Vector& p, const WeightingOptions& options,
                       const std::string& what);

// ---------------------------------------------------------------------------
// Propensities and density ratios

struct PropensitySpec {
  Formula formula;
  GlmFamily family = GlmFamily::logistic;
};

/// Binary-response model for pr(A = a | conditioning set).
FittedGlm fit_propensity(const Dataset& data, const Formula& formula,
                         GlmFamily family, const TreatmentCoding& coding);

/// f(a | X) per row, stabilized on `data` when requested.
Vector propensity_values(const FittedGlm& model, const Dataset& data,
                         const WeightingOptions& options,
                         const std::string& what = "propensity");

/// Ratio of conditional densities of a variable under the two arms,
/// obtained by Bayes' theorem as odds(numerator) / odds(denominator) at
/// level a, where numerator conditions on the richer set.
struct DensityRatioModel {
  FittedGlm numerator;
  FittedGlm denominator;
  TreatmentCoding coding;
  /// Every denominator term appears in the numerator formula.
  bool compatible = false;
};

DensityRatioModel density_ratio(FittedGlm numerator, FittedGlm denominator,
                                const TreatmentCoding& coding);

Vector evaluate(const DensityRatioModel& model, const Dataset& data,
                const WeightingOptions& options = {});

/// Deduplicated union: base terms in order, then new ratio terms.
Formula compatible_formula_union(const Formula& base_logit_terms,
                                 const Formula& log_ratio_terms);

// ---------------------------------------------------------------------------
// Outcome cascade

enum class CascadeKind {
  /// B' and B'' by regression of pseudo-outcomes within treatment strata.
  regression,
  /// B' and B'' by substituting fitted linear mean models for M and C1
  /// into a B that is affine in M and C1.
  plug_in,
};

struct CascadeSpec {
  CascadeKind kind = CascadeKind::regression;
  Formula b;
  GlmFamily b_family = GlmFamily::linear;
  // regression kind
  Formula b_prime;
  Formula b_pprime;
  // plug-in kind: E[M | C1, A, C0] and, shared by every component,
  // E[C1_j | A, C0]
  Formula mediator_mean;
  Formula c1_mean;
};

/// Nested regressions B(M,C1,A,C0), B'(C1,a',a,C0), B''(a',a,C0).
class OutcomeCascade {
 public:
  CascadeKind kind = CascadeKind::regression;
  TreatmentCoding coding;
  FittedGlm b;
  std::optional<FittedGlm> b_prime;
  std::optional<FittedGlm> b_pprime;
  std::optional<FittedGlm> mediator_mean;
  std::vector<FittedGlm> c1_means;

  /// B(M, C1, a', C0).
  Vector b_reference(const Dataset& data) const;
  /// B'(C1, a', a, C0).
  Vector b_prime_values(const Dataset& data) const;
  /// B''(a', a, C0).
  Vector b_pprime_values(const Dataset& data) const;
};

/// Regression cascade: (i) Y on b_formula over all rows; (ii) u1 =
/// B(M,C1,a',C0) on bprime_formula over rows with A = a; (iii) u2 =
/// B'(C1,C0) on bpprime_formula over rows with A = a'.
OutcomeCascade fit_outcome_cascade(const Dataset& data,
                                   const Formula& b_formula,
                                   const Formula& bprime_formula,
                                   const Formula& bpprime_formula,
                                   const TreatmentCoding& coding,
                                   GlmFamily b_family = GlmFamily::linear);

OutcomeCascade fit_plugin_cascade(const Dataset& data,
                                  const Formula& b_formula,
                                  const Formula& mediator_formula,
                                  const Formula& c1_formula,
                                  const TreatmentCoding& coding);

OutcomeCascade fit_cascade(const Dataset& data, const CascadeSpec& spec,
                           const TreatmentCoding& coding);

// ---------------------------------------------------------------------------
// Full nuisance set

struct NuisanceSpec {
  CascadeSpec cascade;
  PropensitySpec f_a_c0;
  /// f(a | C1, C0) and f(a | C0) behind C1^ratio.
  PropensitySpec c1_numerator;
  std::optional<PropensitySpec> c1_denominator;  // defaults to f_a_c0
  /// f(a | M, C1, C0) and f(a | C1, C0) behind M^ratio.
  PropensitySpec m_numerator;
  std::optional<PropensitySpec> m_denominator;  // defaults to c1_numerator
  /// Extend each numerator formula by its denominator's terms.
  bool enforce_compatibility = true;
  double positivity_floor = 1e-3;
  PositivityPolicy policy = PositivityPolicy::error;
};

struct PropensityRange {
  double min = 0.0;
  double max = 0.0;
};

struct NuisanceSet {
  OutcomeCascade cascade;
  FittedGlm f_a_c0;
  DensityRatioModel c1_ratio;
  DensityRatioModel m_ratio;
  double positivity_floor = 1e-3;
  /// Fitted f(a | .) ranges over the sample: f_a_c0, then the numerator
  /// and denominator of each ratio.
  std::vector<PropensityRange> fitted_ranges;
  Index positivity_violations = 0;
};

NuisanceSet assemble_nuisances(const Dataset& data, const NuisanceSpec& spec,
                               const TreatmentCoding& coding);

/// Every nuisance evaluated on the rows of `data`.
struct NuisanceValues {
  Vector p_comparison;  // f(a | C0)
  Vector c1_ratio;
  Vector m_ratio;
  Vector b;         // B(M, C1, a', C0)
  Vector b_prime;   // B'(C1, a', a, C0)
  Vector b_pprime;  // B''(a', a, C0)
  Index positivity_violations = 0;
};

NuisanceValues evaluate(const NuisanceSet& nuisances, const Dataset& data,
                        const WeightingOptions& options);

}  // namespace medpath
