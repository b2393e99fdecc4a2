#include "medpath/glm.hpp"

#include "medpath/error.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace medpath {

std::string to_string(GlmFamily f) {
  switch (f) {
    case GlmFamily::linear: return "linear";
    case GlmFamily::logistic: return "logistic";
    case GlmFamily::probit: return "probit";
  }
  return "unknown";
}

GlmFamily parse_family(std::string_view s) {
  if (s == "linear" || s == "gaussian") return GlmFamily::linear;
  if (s == "logistic" || s == "logit") return GlmFamily::logistic;
  if (s == "probit") return GlmFamily::probit;
  throw ConfigError("unknown GLM family '" + std::string(s) + "'");
}

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0);
}

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

namespace {

/// (1 - Phi(t)) / phi(t) for large positive t via its asymptotic series.
double mills_ratio_asymptotic(double t) {
  const double t2 = t * t;
  return (1.0 - 1.0 / t2 + 3.0 / (t2 * t2) - 15.0 / (t2 * t2 * t2)) / t;
}

/// phi(x) / Phi(x).
double inverse_mills(double x) {
  if (x < -30.0) return 1.0 / mills_ratio_asymptotic(-x);
  return normal_pdf(x) / normal_cdf(x);
}

double log1pexp(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

}  // namespace

double log_normal_cdf(double x) {
  if (x < -30.0) {
    return -0.5 * x * x - std::log(-x) -
           0.5 * std::log(2.0 * std::numbers::pi) +
           std::log(-x * mills_ratio_asymptotic(-x));
  }
  return std::log(normal_cdf(x));
}

double expit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

namespace {

struct RowTerms {
  double loglik = 0.0;
  double slope = 0.0;      // d loglik_i / d eta
  double curvature = 0.0;  // -d^2 loglik_i / d eta^2
};

RowTerms row_terms(GlmFamily family, double y, double eta) {
  RowTerms r;
  switch (family) {
    case GlmFamily::linear: {
      const double e = y - eta;
      r.loglik = -0.5 * e * e;
      r.slope = e;
      r.curvature = 1.0;
      break;
    }
    case GlmFamily::logistic: {
      const double mu = expit(eta);
      r.loglik = y * eta - log1pexp(eta);
      r.slope = y - mu;
      r.curvature = mu * (1.0 - mu);
      break;
    }
    case GlmFamily::probit: {
      if (y > 0.5) {
        const double lam = inverse_mills(eta);
        r.loglik = log_normal_cdf(eta);
        r.slope = lam;
        r.curvature = lam * (eta + lam);
      } else {
        const double lam = inverse_mills(-eta);
        r.loglik = log_normal_cdf(-eta);
        r.slope = -lam;
        r.curvature = lam * (-eta + lam);
      }
      break;
    }
  }
  return r;
}

void check_inputs(const DesignMatrix& design, const Vector& response,
                  const Vector& weights) {
  if (design.rows() != response.size() || design.rows() != weights.size()) {
    throw ShapeError("design, response and weights differ in length");
  }
  if (static_cast<Index>(design.term_labels.size()) != design.cols()) {
    throw ShapeError("design term labels do not match its width");
  }
  for (Index i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw WeightError("fit weights must be finite and nonnegative");
    }
  }
  if (!response.allFinite()) throw ShapeError("response has non-finite values");
}

struct Support {
  Matrix x;
  Vector y;
  Vector w;
};

Support weighted_support(const DesignMatrix& design, const Vector& response,
                         const Vector& weights) {
  const Index k = static_cast<Index>((weights.array() > 0.0).count());
  Support s{Matrix(k, design.cols()), Vector(k), Vector(k)};
  Index r = 0;
  for (Index i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) {
      s.x.row(r) = design.values.row(i);
      s.y[r] = response[i];
      s.w[r] = weights[i];
      ++r;
    }
  }
  return s;
}

void require_full_rank(const Matrix& x, const Vector& w, double threshold,
                       const std::vector<std::string>& labels) {
  if (x.rows() < x.cols()) {
    throw SingularDesignError("fewer weighted rows (" +
                              std::to_string(x.rows()) + ") than terms (" +
                              std::to_string(x.cols()) + ")");
  }
  const Matrix xw = x.array().colwise() * w.array().sqrt();
  Eigen::ColPivHouseholderQR<Matrix> qr(xw);
  qr.setThreshold(threshold);
  if (qr.rank() < x.cols()) {
    std::ostringstream msg;
    msg << "design is rank deficient (rank " << qr.rank() << " of "
        << x.cols() << ") on terms:";
    for (const auto& l : labels) msg << ' ' << l;
    throw SingularDesignError(msg.str());
  }
}

double support_loglik(const Support& s, GlmFamily family, const Vector& beta) {
  const Vector eta = s.x * beta;
  double ll = 0.0;
  for (Index i = 0; i < eta.size(); ++i) {
    ll += s.w[i] * row_terms(family, s.y[i], eta[i]).loglik;
  }
  return ll;
}

FittedGlm fit_binary(const Support& s, GlmFamily family,
                     const FitOptions& opt) {
  const Index q = s.x.cols();
  const double total_w = s.w.sum();
  for (Index i = 0; i < s.y.size(); ++i) {
    if (s.y[i] != 0.0 && s.y[i] != 1.0) {
      throw ShapeError(to_string(family) + " response must be in {0,1}");
    }
  }

  FittedGlm out;
  out.family = family;
  Vector beta = Vector::Zero(q);
  Vector grad(q);
  Matrix info(q, q);
  Vector eta(s.y.size()), slope(s.y.size()), curv(s.y.size());

  auto evaluate = [&](const Vector& b) {
    eta.noalias() = s.x * b;
    double ll = 0.0;
    for (Index i = 0; i < eta.size(); ++i) {
      const RowTerms r = row_terms(family, s.y[i], eta[i]);
      ll += s.w[i] * r.loglik;
      slope[i] = s.w[i] * r.slope;
      curv[i] = s.w[i] * r.curvature;
    }
    grad.noalias() = s.x.transpose() * slope;
    return ll;
  };

  double ll = evaluate(beta);
  bool polished = false;
  bool finished = false;
  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    out.iterations = iter;
    info.noalias() =
        s.x.transpose() * (s.x.array().colwise() * curv.array()).matrix();
    Eigen::LDLT<Matrix> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw SingularDesignError("information matrix is not positive definite");
    }
    const Vector step = ldlt.solve(grad);

    double t = 1.0;
    Vector candidate = beta + step;
    double ll_new = support_loglik(s, family, candidate);
    for (int h = 0; h < 40 && !(ll_new >= ll - 1e-12 * std::abs(ll)); ++h) {
      t *= 0.5;
      candidate = beta + t * step;
      ll_new = support_loglik(s, family, candidate);
    }
    if (candidate.cwiseAbs().maxCoeff() > opt.separation_bound) {
      std::ostringstream msg;
      msg << to_string(family) << " fit: coefficient magnitude exceeded "
          << opt.separation_bound << " (quasi-complete separation)";
      throw SeparationError(msg.str());
    }
    const double moved = (candidate - beta).cwiseAbs().maxCoeff();
    beta = candidate;
    ll = evaluate(beta);
    // A vanishing score alone is not enough: under separation the score
    // decays while the coefficients keep drifting by O(1) per step.
    const bool now_converged =
        grad.cwiseAbs().maxCoeff() / total_w <= opt.tolerance &&
        moved <= 1e-6 * (1.0 + beta.cwiseAbs().maxCoeff());
    // one extra Newton step after the tolerance is met pushes the score
    // to rounding level
    if (now_converged && polished) {
      finished = true;
      break;
    }
    if (now_converged) polished = true;
  }
  out.coef = beta;
  out.score_norm = grad.cwiseAbs().maxCoeff() / total_w;
  out.converged = finished;
  if (!finished && out.score_norm <= opt.tolerance) {
    // score vanished but the coefficients never settled: the likelihood
    // has its supremum at infinity
    throw SeparationError(to_string(family) +
                          " fit: coefficients diverge while the score vanishes "
                          "(quasi-complete separation)");
  }
  if (!out.converged) {
    throw NonConvergenceError(
        to_string(family) + " fit did not converge in " +
            std::to_string(opt.max_iterations) + " iterations",
        std::vector<double>(beta.data(), beta.data() + beta.size()));
  }
  return out;
}

FittedGlm fit_linear(const Support& s) {
  const Matrix xw = s.x.array().colwise() * s.w.array().sqrt();
  const Vector yw = s.y.array() * s.w.array().sqrt();
  Eigen::ColPivHouseholderQR<Matrix> qr(xw);
  FittedGlm out;
  out.family = GlmFamily::linear;
  out.coef = qr.solve(yw);
  out.iterations = 1;
  const Vector resid = s.y - s.x * out.coef;
  const Vector g = s.x.transpose() * (s.w.array() * resid.array()).matrix();
  out.score_norm = g.cwiseAbs().maxCoeff() / s.w.sum();
  out.converged = true;
  return out;
}

}  // namespace

FittedGlm fit(const DesignMatrix& design, const Vector& response,
              GlmFamily family, const std::optional<Vector>& weights,
              const FitOptions& options) {
  const Vector w = weights ? *weights : Vector::Ones(response.size());
  check_inputs(design, response, w);
  const Support s = weighted_support(design, response, w);
  if (s.y.size() == 0) throw SingularDesignError("no rows with positive weight");
  require_full_rank(s.x, s.w, options.rank_threshold, design.term_labels);
  FittedGlm out = family == GlmFamily::linear ? fit_linear(s)
                                              : fit_binary(s, family, options);
  if (!out.coef.allFinite()) {
    throw SingularDesignError("fit produced non-finite coefficients");
  }
  return out;
}

FittedGlm fit(const Dataset& data, const Formula& formula,
              const Vector& response, GlmFamily family,
              const std::optional<Vector>& weights,
              const FitOptions& options) {
  FittedGlm out =
      fit(build_design(data, formula), response, family, weights, options);
  out.formula = formula;
  return out;
}

Vector predict_mean(const FittedGlm& model, const DesignMatrix& design) {
  if (design.cols() != model.coef.size()) {
    throw ShapeError("design has " + std::to_string(design.cols()) +
                     " columns but the model has " +
                     std::to_string(model.coef.size()) + " coefficients");
  }
  if (model.formula.size() > 0 &&
      design.term_labels != model.formula.labels()) {
    throw ShapeError("design terms do not match model formula '" +
                     model.formula.to_string() + "'");
  }
  Vector eta = design.values * model.coef;
  switch (model.family) {
    case GlmFamily::linear: return eta;
    case GlmFamily::logistic: return eta.unaryExpr([](double v) { return expit(v); });
    case GlmFamily::probit: return eta.unaryExpr([](double v) { return normal_cdf(v); });
  }
  return eta;
}

Vector predict_mean(const FittedGlm& model, const Dataset& data,
                    const DesignOverrides& overrides) {
  return predict_mean(model, build_design(data, model.formula, overrides));
}

double log_likelihood(const DesignMatrix& design, const Vector& response,
                      GlmFamily family, const Vector& weights,
                      const Vector& beta) {
  check_inputs(design, response, weights);
  const Vector eta = design.values * beta;
  double ll = 0.0;
  for (Index i = 0; i < eta.size(); ++i) {
    if (weights[i] > 0.0) {
      ll += weights[i] * row_terms(family, response[i], eta[i]).loglik;
    }
  }
  return ll;
}

Vector score(const DesignMatrix& design, const Vector& response,
             GlmFamily family, const Vector& weights, const Vector& beta) {
  check_inputs(design, response, weights);
  const Vector eta = design.values * beta;
  Vector s(eta.size());
  for (Index i = 0; i < eta.size(); ++i) {
    s[i] = weights[i] > 0.0
               ? weights[i] * row_terms(family, response[i], eta[i]).slope
               : 0.0;
  }
  return design.values.transpose() * s;
}

}  // namespace medpath
