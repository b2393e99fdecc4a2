#pragma once

#include "medpath/bootstrap.hpp"
#include "medpath/estimators.hpp"
#include "medpath/simulation.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace medpath::cli {

enum class StabilizationMode { none, bounded, substitution };

struct RunConfig {
  // data
  std::filesystem::path data_path;
  Schema schema;
  TreatmentCoding coding;
  // models
  NuisanceSpec nuisances;
  Formula total_outcome;
  // estimator
  std::vector<EstimatorKind> kinds;
  StabilizationMode stabilization = StabilizationMode::none;
  // bootstrap; reps == 0 gives point estimates only
  int reps = 0;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  // output; "-" writes to stdout
  std::filesystem::path estimates_path = "estimates.csv";
};

/// JSON config. Relative paths resolve against `base_dir`.
RunConfig parse_run_config(std::string_view json_text,
                           const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

struct EstimateRow {
  std::string quantity;
  std::string estimator;
  double point = 0.0;
  std::optional<double> se;
  std::optional<double> ci_lower;
  std::optional<double> ci_upper;
  std::optional<double> min_weight;
  std::optional<double> max_weight;
};

/// beta per estimator, ey_aprime, ey_a, total_effect, then pse and
/// percent_mediated per estimator.
std::vector<EstimateRow> run_estimate(const RunConfig& config, const Dataset& data,
                                      int jobs = 1);

/// Header `quantity,estimator,point,se,ci_lower,ci_upper,min_weight,max_weight`.
void write_estimates_csv(std::ostream& os, const std::vector<EstimateRow>& rows);

struct SimulateArgs {
  SimulationOptions options;
  std::filesystem::path out_dir;
  long long oracle_draws = 10'000'000;
};

/// Returns the process exit status: 0, or 3 for an unstable scenario.
int cmd_simulate(const SimulateArgs& args, std::ostream& log);
int cmd_estimate(const RunConfig& config, int jobs, std::ostream& out,
                 std::ostream& log);

/// Entry point behind the `medpath` executable. Errors are written to
/// `err` as one line `E_CODE: message`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace medpath::cli
