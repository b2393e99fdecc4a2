#pragma once

#include "medpath/data.hpp"
#include "medpath/error.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace medpath {

/// Full estimation run on one dataset, returning one value per quantity.
/// It must refit every nuisance from the rows it is given.
using Pipeline = std::function<std::vector<double>(const Dataset&)>;

struct BootstrapOptions {
  int reps = 500;
  /// CI is the empirical (alpha/2, 1 - alpha/2) percentile bracket.
  double alpha = 0.05;
  std::uint64_t seed = 0;
  int jobs = 1;
  /// More failed replicates than this share raises BootstrapInstabilityError.
  double max_failure_share = 0.2;
};

struct BootstrapResult {
  double point = 0.0;
  double se = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  int reps_requested = 0;
  int reps_succeeded = 0;
  std::uint64_t seed = 0;
  /// Successful replicate estimates in replicate order.
  std::vector<double> replicates;
};

struct BootstrapReport {
  std::vector<BootstrapResult> quantities;
  std::vector<int> failed_reps;
  std::vector<std::string> failure_messages;
};

class BootstrapInstabilityError : public Error {
 public:
  BootstrapInstabilityError(const std::string& what, BootstrapReport partial)
      : Error("E_UNSTABLE", what), partial(std::move(partial)) {}
  BootstrapReport partial;
};

/// Row indices of replicate `rep`: n draws with replacement from
/// substream (seed, rep).
std::vector<Index> resample_indices(Index n, std::uint64_t seed, int rep);

/// Replicates failing with a library error are recorded and excluded.
/// Errors on the full sample propagate.
BootstrapReport bootstrap(const Dataset& data, const Pipeline& pipeline,
                          const BootstrapOptions& options);

/// Single-quantity convenience.
BootstrapResult bootstrap(const Dataset& data,
                          const std::function<double(const Dataset&)>& estimator,
                          const BootstrapOptions& options);

/// Type-7 (linear interpolation) sample quantile of sorted values.
double quantile_sorted(const std::vector<double>& sorted, double prob);

/// Sample SD with divisor n - 1 (0 for fewer than two values).
double sample_sd(const std::vector<double>& x);

}  // namespace medpath
