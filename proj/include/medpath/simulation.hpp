#pragma once

#include "medpath/estimators.hpp"
#include "medpath/substitution.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace medpath {

/// Linear-Gaussian generative model:
///   C0 ~ U(lo, hi)
///   logit pr(A=1 | C0) = a_int + a_c0 C0
///   C1 = c1_int + c1_c0 C0 + c1_a A + c1_c0a C0 A + N(0, I)
///   M  = m_int + m_c0 C0 + m_a A + m_c1'C1 + m_ac1'(A C1) + N(0, 1)
///   Y  = y_int + y_c0 C0 + y_a A + y_c1'C1 + y_m M + y_am A M + N(0, 1)
struct DgpParams {
  double c0_lo = 0.0;
  double c0_hi = 2.0;
  double a_int = 0.9;
  double a_c0 = 0.3;
  std::array<double, 3> c1_int{0.8, 0.6, -0.3};
  std::array<double, 3> c1_c0{1.0, 0.1, 0.2};
  std::array<double, 3> c1_a{0.5, -0.4, 0.5};
  std::array<double, 3> c1_c0a{-0.1, 0.8, -0.2};
  double m_int = -0.5;
  double m_c0 = -0.2;
  double m_a = 0.3;
  std::array<double, 3> m_c1{-0.2, 0.1, 0.5};
  std::array<double, 3> m_ac1{0.4, 0.0, 0.0};
  double y_int = 0.2;
  double y_c0 = 0.2;
  double y_a = 0.6;
  std::array<double, 3> y_c1{1.0, 0.7, 0.3};
  double y_m = -0.9;
  double y_am = -0.8;
};

/// Columns c0, A, c11, c12, c13, M, Y.
Dataset generate(const DgpParams& params, Index n, std::uint64_t seed);

enum class ScenarioId { int_, a, b, c };

std::string to_string(ScenarioId id);
ScenarioId parse_scenario(std::string_view s);

struct ScenarioModels {
  ScenarioId id = ScenarioId::int_;
  /// Plug-in cascade and the propensity menu for the scenario.
  NuisanceSpec nuisances;
  /// Regression-cascade formulas (B, B', B'') for the generic and
  /// substitution paths.
  SubstitutionFormulas regression;
};

/// int: everything correct. a: B and the C1 models wrong. b: the M models
/// wrong. c: f(A|C0) probit.
ScenarioModels scenario_models(ScenarioId id);

/// beta_0 by nested linear integration, for treatment levels a, a' in {0,1}.
double true_beta_closed_form(const DgpParams& params, double a = 1.0,
                             double a_prime = 0.0);

struct MonteCarloOracle {
  double value = 0.0;
  double se = 0.0;
  long long draws = 0;
};

/// Draws the counterfactual composition C0, C1(a'), M(a, C1(a')),
/// Y(a', M, C1) directly. Fixed-size chunks use their own substreams so
/// the result does not depend on `jobs`.
MonteCarloOracle true_beta_monte_carlo(const DgpParams& params, double a,
                                       double a_prime, long long draws,
                                       std::uint64_t seed, int jobs = 1);

struct OracleResult {
  double closed_form = 0.0;
  MonteCarloOracle monte_carlo;
};

/// Both routes, cross-checked; more than 3 MC SE apart raises OracleError.
OracleResult true_beta(const DgpParams& params, double a = 1.0,
                       double a_prime = 0.0, long long draws = 10'000'000,
                       std::uint64_t seed = 20240601, int jobs = 1);

/// E{Y(level)} in closed form.
double true_mean(const DgpParams& params, double level);

struct SimulationOptions {
  ScenarioId scenario = ScenarioId::int_;
  Index n = 5000;
  int reps = 200;
  std::uint64_t seed = 1;
  std::vector<EstimatorKind> estimators{EstimatorKind::mle, EstimatorKind::ipw_a,
                                        EstimatorKind::ipw_b, EstimatorKind::mr};
  WeightMode stabilization = WeightMode::bounded;
  int jobs = 1;
  DgpParams params;
};

/// Fits the scenario's nuisances on `data` and returns one value per
/// requested estimator, in order. Positivity violations only warn.
std::vector<double> estimate_replicate(const Dataset& data,
                                       const ScenarioModels& models,
                                       const std::vector<EstimatorKind>& kinds,
                                       WeightMode stabilization);

struct EstimatorSummary {
  EstimatorKind kind = EstimatorKind::mr;
  /// Successful replicates only, in replicate order.
  std::vector<double> estimates;
  std::vector<int> reps;
  double mean = 0.0;
  double bias = 0.0;
  double sd = 0.0;
  double mse = 0.0;
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
};

struct SimulationReport {
  ScenarioId scenario = ScenarioId::int_;
  Index n = 0;
  int reps = 0;
  std::uint64_t seed = 0;
  double beta0 = 0.0;
  std::vector<EstimatorSummary> estimators;
  std::vector<int> failed_reps;
  std::vector<std::string> failure_messages;
  /// More than 5% of replicates failed.
  bool unstable = false;

  const EstimatorSummary& summary(EstimatorKind kind) const;
};

/// Replicate r is generated from substream (seed, r).
SimulationReport run_monte_carlo(const SimulationOptions& options);

/// Header `scenario,estimator,rep,estimate`.
void write_replicates_csv(std::ostream& os, const SimulationReport& report);
/// Header `scenario,estimator,mean,bias,sd,mse,q25,q50,q75,beta0`.
void write_summary_csv(std::ostream& os, const SimulationReport& report);

}  // namespace medpath
