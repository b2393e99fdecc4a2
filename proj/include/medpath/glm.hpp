#pragma once

#include "medpath/data.hpp"

#include <optional>
#include <string>

namespace medpath {

enum class GlmFamily { linear, logistic, probit };

std::string to_string(GlmFamily f);
GlmFamily parse_family(std::string_view s);

struct FitOptions {
  /// Convergence when max_j |score_j| / sum(w) falls to this level.
  double tolerance = 1e-8;
  int max_iterations = 100;
  /// Any |coefficient| above this during binary-response fitting is
  /// reported as separation.
  double separation_bound = 30.0;
  /// Relative pivot magnitude below which the design counts as singular.
  double rank_threshold = 1e-10;
};

struct FittedGlm {
  GlmFamily family = GlmFamily::linear;
  Formula formula;
  Vector coef;
  bool converged = false;
  int iterations = 0;
  /// max_j |score_j| / sum(w) at the returned coefficients.
  double score_norm = 0.0;
};

/// Maximum-likelihood fit. Rows with zero weight do not enter the solve.
/// Linear: weighted least squares by column-pivoted QR. Logistic/probit:
/// Newton-Raphson (IRLS) with step halving on likelihood decrease.
FittedGlm fit(const DesignMatrix& design, const Vector& response,
              GlmFamily family, const std::optional<Vector>& weights = {},
              const FitOptions& options = {});

/// Builds the design from `formula` on `data` and fits; the returned model
/// remembers the formula so it can predict on other datasets.
FittedGlm fit(const Dataset& data, const Formula& formula,
              const Vector& response, GlmFamily family,
              const std::optional<Vector>& weights = {},
              const FitOptions& options = {});

Vector predict_mean(const FittedGlm& model, const DesignMatrix& design);
Vector predict_mean(const FittedGlm& model, const Dataset& data,
                    const DesignOverrides& overrides = {});

/// Weighted log-likelihood (Gaussian with unit variance for the linear
/// family, up to an additive constant).
double log_likelihood(const DesignMatrix& design, const Vector& response,
                      GlmFamily family, const Vector& weights,
                      const Vector& beta);

/// Gradient of log_likelihood with respect to beta:
/// sum_i w_i x_ij (y_i - mu_i) g_i with g_i the family's Newton factor.
Vector score(const DesignMatrix& design, const Vector& response,
             GlmFamily family, const Vector& weights, const Vector& beta);

double normal_cdf(double x);
double normal_pdf(double x);
/// log Phi(x), accurate far into the lower tail.
double log_normal_cdf(double x);

double expit(double x);
double logit(double p);

}  // namespace medpath
