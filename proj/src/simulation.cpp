#include "medpath/simulation.hpp"

#include "medpath/bootstrap.hpp"
#include "medpath/error.hpp"
#include "medpath/parallel.hpp"
#include "medpath/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>

namespace medpath {

Dataset generate(const DgpParams& p, Index n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("generate needs n >= 1");
  Rng rng(seed);
  Matrix c0(n, 1), c1(n, 3);
  Vector a(n), m(n), y(n);
  for (Index i = 0; i < n; ++i) {
    const double x0 = rng.uniform(p.c0_lo, p.c0_hi);
    const double ai = rng.bernoulli(expit(p.a_int + p.a_c0 * x0)) ? 1.0 : 0.0;
    double mean_m = p.m_int + p.m_c0 * x0 + p.m_a * ai;
    double mean_y = p.y_int + p.y_c0 * x0 + p.y_a * ai;
    for (int j = 0; j < 3; ++j) {
      const double x1 = p.c1_int[j] + p.c1_c0[j] * x0 + p.c1_a[j] * ai +
                        p.c1_c0a[j] * x0 * ai + rng.normal();
      c1(i, j) = x1;
      mean_m += (p.m_c1[j] + p.m_ac1[j] * ai) * x1;
      mean_y += p.y_c1[j] * x1;
    }
    const double mi = mean_m + rng.normal();
    c0(i, 0) = x0;
    a[i] = ai;
    m[i] = mi;
    y[i] = mean_y + (p.y_m + p.y_am * ai) * mi + rng.normal();
  }
  return Dataset(std::move(c0), std::move(a), std::move(c1), std::move(m),
                 std::move(y), {"c0"}, {"c11", "c12", "c13"});
}

std::string to_string(ScenarioId id) {
  switch (id) {
    case ScenarioId::int_: return "int";
    case ScenarioId::a: return "a";
    case ScenarioId::b: return "b";
    case ScenarioId::c: return "c";
  }
  return "unknown";
}

ScenarioId parse_scenario(std::string_view s) {
  if (s == "int") return ScenarioId::int_;
  if (s == "a") return ScenarioId::a;
  if (s == "b") return ScenarioId::b;
  if (s == "c") return ScenarioId::c;
  throw ConfigError("unknown scenario '" + std::string(s) + "'");
}

ScenarioModels scenario_models(ScenarioId id) {
  const bool b_ok = id != ScenarioId::a;
  const bool c1_ok = id != ScenarioId::a;
  const bool m_ok = id != ScenarioId::b;
  const bool fa_ok = id != ScenarioId::c;

  const Formula b_c = parse_formula("1 + c0 + A + c11 + c12 + c13 + M + A:M");
  const Formula b_i = parse_formula("1 + c0 + A + c11 + c12 + c13 + M");
  const Formula lambda_c = parse_formula(
      "1 + c0 + c0^2 + c11 + c12 + c13 + c0:c11 + c0:c12 + c0:c13");
  const Formula lambda_i = parse_formula("1 + c0 + c11 + c12 + c13");
  const Formula gamma_c = parse_formula(
      "1 + c0 + c0^2 + c11 + c12 + c13 + c0:c11 + c0:c12 + c0:c13 + "
      "c11^2 + c11:c12 + c11:c13 + M + c11:M");
  const Formula gamma_i = parse_formula("1 + c0 + c11 + c12 + c13 + M");
  const Formula zeta_c = parse_formula("1 + c0 + A + c11 + c12 + c13 + A:c11");
  const Formula zeta_i = parse_formula("1 + c0 + A + c11 + c12 + c13");
  const Formula delta_c = parse_formula("1 + c0 + A + c0:A");
  const Formula delta_i = parse_formula("1 + c0 + A");
  const Formula base = parse_formula("1 + c0");

  ScenarioModels out;
  out.id = id;
  NuisanceSpec& s = out.nuisances;
  s.cascade.kind = CascadeKind::plug_in;
  s.cascade.b = b_ok ? b_c : b_i;
  s.cascade.b_family = GlmFamily::linear;
  s.cascade.mediator_mean = m_ok ? zeta_c : zeta_i;
  s.cascade.c1_mean = c1_ok ? delta_c : delta_i;
  s.cascade.b_prime = parse_formula("1 + c0 + c11 + c12 + c13");
  s.cascade.b_pprime = base;
  s.f_a_c0 = {base, fa_ok ? GlmFamily::logistic : GlmFamily::probit};
  s.c1_numerator = {c1_ok ? lambda_c : lambda_i, GlmFamily::logistic};
  s.c1_denominator = PropensitySpec{base, GlmFamily::logistic};
  s.m_numerator = {m_ok ? gamma_c : gamma_i, GlmFamily::logistic};
  s.m_denominator = PropensitySpec{lambda_c, GlmFamily::logistic};
  s.enforce_compatibility = false;
  s.policy = PositivityPolicy::warn;

  out.regression = {s.cascade.b, s.cascade.b_prime, s.cascade.b_pprime};
  return out;
}

// ---------------------------------------------------------------------------
// Oracles

double true_beta_closed_form(const DgpParams& p, double a, double a_prime) {
  // B(m, c1, a', c0) with m replaced by E[M | c1, a, c0]: affine in (c0, c1).
  const double s = p.y_m + p.y_am * a_prime;
  double k0 = p.y_int + p.y_a * a_prime + s * (p.m_int + p.m_a * a);
  double kc0 = p.y_c0 + s * p.m_c0;
  // Then c1 replaced by E[C1 | a', c0].
  for (int j = 0; j < 3; ++j) {
    const double kc1 = p.y_c1[j] + s * (p.m_c1[j] + p.m_ac1[j] * a);
    k0 += kc1 * (p.c1_int[j] + p.c1_a[j] * a_prime);
    kc0 += kc1 * (p.c1_c0[j] + p.c1_c0a[j] * a_prime);
  }
  return k0 + kc0 * 0.5 * (p.c0_lo + p.c0_hi);
}

double true_mean(const DgpParams& params, double level) {
  return true_beta_closed_form(params, level, level);
}

MonteCarloOracle true_beta_monte_carlo(const DgpParams& p, double a,
                                       double a_prime, long long draws,
                                       std::uint64_t seed, int jobs) {
  if (draws < 2) throw ConfigError("Monte Carlo oracle needs >= 2 draws");
  constexpr long long kChunk = 1'000'000;
  const auto chunks = static_cast<std::size_t>((draws + kChunk - 1) / kChunk);
  std::vector<double> sums(chunks), squares(chunks);
  parallel_for(chunks, jobs, [&](std::size_t k) {
    Rng rng(seed, k);
    const long long begin = static_cast<long long>(k) * kChunk;
    const long long count = std::min(kChunk, draws - begin);
    double sum = 0.0, sq = 0.0;
    for (long long i = 0; i < count; ++i) {
      const double x0 = rng.uniform(p.c0_lo, p.c0_hi);
      double mean_m = p.m_int + p.m_c0 * x0 + p.m_a * a;
      double mean_y = p.y_int + p.y_c0 * x0 + p.y_a * a_prime;
      for (int j = 0; j < 3; ++j) {
        const double x1 = p.c1_int[j] + p.c1_c0[j] * x0 + p.c1_a[j] * a_prime +
                          p.c1_c0a[j] * x0 * a_prime + rng.normal();
        mean_m += (p.m_c1[j] + p.m_ac1[j] * a) * x1;
        mean_y += p.y_c1[j] * x1;
      }
      const double mi = mean_m + rng.normal();
      const double yi = mean_y + (p.y_m + p.y_am * a_prime) * mi + rng.normal();
      sum += yi;
      sq += yi * yi;
    }
    sums[k] = sum;
    squares[k] = sq;
  });
  double sum = 0.0, sq = 0.0;
  for (std::size_t k = 0; k < chunks; ++k) {
    sum += sums[k];
    sq += squares[k];
  }
  const auto nd = static_cast<double>(draws);
  const double mean = sum / nd;
  const double var = (sq - nd * mean * mean) / (nd - 1.0);
  return {mean, std::sqrt(std::max(var, 0.0) / nd), draws};
}

OracleResult true_beta(const DgpParams& params, double a, double a_prime,
                       long long draws, std::uint64_t seed, int jobs) {
  OracleResult r;
  r.closed_form = true_beta_closed_form(params, a, a_prime);
  r.monte_carlo = true_beta_monte_carlo(params, a, a_prime, draws, seed, jobs);
  const double gap = std::abs(r.closed_form - r.monte_carlo.value);
  if (gap > 3.0 * r.monte_carlo.se) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "closed form %.6f and Monte Carlo %.6f (se %.2g) disagree",
                  r.closed_form, r.monte_carlo.value, r.monte_carlo.se);
    throw OracleError(buf);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Monte Carlo driver

std::vector<double> estimate_replicate(const Dataset& data,
                                       const ScenarioModels& models,
                                       const std::vector<EstimatorKind>& kinds,
                                       WeightMode stabilization) {
  const TreatmentCoding coding{};
  const NuisanceSet set = assemble_nuisances(data, models.nuisances, coding);
  const WeightingOptions options{stabilization,
                                 models.nuisances.positivity_floor,
                                 models.nuisances.policy};
  std::optional<NuisanceValues> values;
  auto get = [&]() -> const NuisanceValues& {
    if (!values) values = evaluate(set, data, options);
    return *values;
  };
  std::vector<double> out;
  out.reserve(kinds.size());
  for (const auto kind : kinds) {
    switch (kind) {
      case EstimatorKind::mle: out.push_back(beta_mle(data, get()).value); break;
      case EstimatorKind::ipw_a: out.push_back(beta_a(data, get()).value); break;
      case EstimatorKind::ipw_b: out.push_back(beta_b(data, get()).value); break;
      case EstimatorKind::mr: out.push_back(beta_mr(data, get()).value); break;
      case EstimatorKind::substitution: {
        const WeightingOptions plain{WeightMode::none, options.positivity_floor,
                                     options.policy};
        out.push_back(stabilized_substitution(data, models.regression,
                                              set.f_a_c0, set.c1_ratio,
                                              set.m_ratio, coding, plain)
                          .estimate.value);
        break;
      }
      default:
        throw ConfigError("estimator '" + to_string(kind) +
                          "' is not available in the simulation");
    }
  }
  return out;
}

const EstimatorSummary& SimulationReport::summary(EstimatorKind kind) const {
  for (const auto& s : estimators) {
    if (s.kind == kind) return s;
  }
  throw ConfigError("estimator '" + to_string(kind) + "' not in report");
}

SimulationReport run_monte_carlo(const SimulationOptions& options) {
  if (options.reps < 2) throw ConfigError("simulation needs reps >= 2");
  if (options.estimators.empty()) throw ConfigError("no estimators requested");
  const ScenarioModels models = scenario_models(options.scenario);
  const auto reps = static_cast<std::size_t>(options.reps);
  std::vector<std::optional<std::vector<double>>> results(reps);
  std::vector<std::string> errors(reps);
  parallel_for(reps, options.jobs, [&](std::size_t r) {
    try {
      const Dataset data = generate(options.params, options.n,
                                    substream_seed(options.seed, r));
      results[r] = estimate_replicate(data, models, options.estimators,
                                      options.stabilization);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      errors[r] = e.code() + ": " + e.what();
    }
  });

  SimulationReport report;
  report.scenario = options.scenario;
  report.n = options.n;
  report.reps = options.reps;
  report.seed = options.seed;
  report.beta0 = true_beta_closed_form(options.params);
  for (const auto kind : options.estimators) {
    report.estimators.push_back({.kind = kind});
  }
  for (std::size_t r = 0; r < reps; ++r) {
    if (!results[r]) {
      report.failed_reps.push_back(static_cast<int>(r));
      report.failure_messages.push_back(errors[r]);
      continue;
    }
    for (std::size_t k = 0; k < report.estimators.size(); ++k) {
      report.estimators[k].estimates.push_back((*results[r])[k]);
      report.estimators[k].reps.push_back(static_cast<int>(r));
    }
  }
  for (auto& s : report.estimators) {
    if (s.estimates.empty()) {
      s.mean = s.bias = s.sd = s.mse = s.q25 = s.q50 = s.q75 = NAN;
      continue;
    }
    const auto cnt = static_cast<double>(s.estimates.size());
    double sum = 0.0, sq = 0.0;
    for (double v : s.estimates) {
      sum += v;
      sq += (v - report.beta0) * (v - report.beta0);
    }
    s.mean = sum / cnt;
    s.bias = s.mean - report.beta0;
    s.sd = sample_sd(s.estimates);
    s.mse = sq / cnt;
    std::vector<double> sorted = s.estimates;
    std::sort(sorted.begin(), sorted.end());
    s.q25 = quantile_sorted(sorted, 0.25);
    s.q50 = quantile_sorted(sorted, 0.50);
    s.q75 = quantile_sorted(sorted, 0.75);
  }
  report.unstable = static_cast<double>(report.failed_reps.size()) >
                    0.05 * static_cast<double>(options.reps);
  return report;
}

namespace {
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

void write_replicates_csv(std::ostream& os, const SimulationReport& report) {
  os << "scenario,estimator,rep,estimate\n";
  for (const auto& s : report.estimators) {
    for (std::size_t k = 0; k < s.estimates.size(); ++k) {
      os << to_string(report.scenario) << ',' << to_string(s.kind) << ','
         << s.reps[k] << ',' << num(s.estimates[k]) << '\n';
    }
  }
}

void write_summary_csv(std::ostream& os, const SimulationReport& report) {
  os << "scenario,estimator,mean,bias,sd,mse,q25,q50,q75,beta0\n";
  for (const auto& s : report.estimators) {
    os << to_string(report.scenario) << ',' << to_string(s.kind) << ','
       << num(s.mean) << ',' << num(s.bias) << ',' << num(s.sd) << ','
       << num(s.mse) << ',' << num(s.q25) << ',' << num(s.q50) << ','
       << num(s.q75) << ',' << num(report.beta0) << '\n';
  }
}

}  // namespace medpath
