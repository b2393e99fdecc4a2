#include "medpath/bootstrap.hpp"

#include "medpath/parallel.hpp"
#include "medpath/rng.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace medpath {

std::vector<Index> resample_indices(Index n, std::uint64_t seed, int rep) {
  Rng rng(seed, static_cast<std::uint64_t>(rep));
  std::vector<Index> idx(static_cast<std::size_t>(n));
  for (auto& i : idx) {
    i = static_cast<Index>(rng.index(static_cast<std::uint64_t>(n)));
  }
  return idx;
}

double quantile_sorted(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) return NAN;
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double sample_sd(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  // Welford: a constant sample gives exactly zero
  double mean = 0.0, ss = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - mean;
    mean += d / static_cast<double>(k + 1);
    ss += d * (x[k] - mean);
  }
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

BootstrapReport bootstrap(const Dataset& data, const Pipeline& pipeline,
                          const BootstrapOptions& options) {
  if (options.reps < 2) {
    throw ConfigError("bootstrap needs at least 2 replicates");
  }
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) {
    throw ConfigError("bootstrap alpha must lie in (0, 1)");
  }
  const std::vector<double> point = pipeline(data);

  const auto reps = static_cast<std::size_t>(options.reps);
  std::vector<std::optional<std::vector<double>>> draws(reps);
  std::vector<std::string> errors(reps);
  parallel_for(reps, options.jobs, [&](std::size_t r) {
    const auto idx = resample_indices(data.n(), options.seed, static_cast<int>(r));
    try {
      auto values = pipeline(data.rows(idx));
      if (values.size() != point.size()) {
        throw ContractError("pipeline returned a different number of values");
      }
      draws[r] = std::move(values);
    } catch (const ContractError&) {
      throw;
    } catch (const Error& e) {
      errors[r] = e.code() + ": " + e.what();
    }
  });

  BootstrapReport report;
  report.quantities.resize(point.size());
  for (std::size_t q = 0; q < point.size(); ++q) {
    auto& res = report.quantities[q];
    res.point = point[q];
    res.reps_requested = options.reps;
    res.seed = options.seed;
  }
  for (std::size_t r = 0; r < reps; ++r) {
    if (!draws[r]) {
      report.failed_reps.push_back(static_cast<int>(r));
      report.failure_messages.push_back(errors[r]);
      continue;
    }
    for (std::size_t q = 0; q < point.size(); ++q) {
      report.quantities[q].replicates.push_back((*draws[r])[q]);
    }
  }
  for (auto& res : report.quantities) {
    res.reps_succeeded = static_cast<int>(res.replicates.size());
    std::vector<double> sorted = res.replicates;
    std::sort(sorted.begin(), sorted.end());
    res.se = sample_sd(res.replicates);
    res.ci_lower = quantile_sorted(sorted, options.alpha / 2.0);
    res.ci_upper = quantile_sorted(sorted, 1.0 - options.alpha / 2.0);
  }
  const double failed_share =
      static_cast<double>(report.failed_reps.size()) / static_cast<double>(reps);
  if (failed_share > options.max_failure_share) {
    throw BootstrapInstabilityError(
        std::to_string(report.failed_reps.size()) + " of " +
            std::to_string(reps) + " bootstrap replicates failed" +
            (report.failure_messages.empty()
                 ? std::string()
                 : "; first: " + report.failure_messages.front()),
        std::move(report));
  }
  return report;
}

BootstrapResult bootstrap(const Dataset& data,
                          const std::function<double(const Dataset&)>& estimator,
                          const BootstrapOptions& options) {
  BootstrapReport report = bootstrap(
      data,
      [&estimator](const Dataset& d) { return std::vector<double>{estimator(d)}; },
      options);
  return std::move(report.quantities.front());
}

}  // namespace medpath
