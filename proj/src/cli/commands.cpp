#include "medpath/cli.hpp"

#include "medpath/error.hpp"
#include "medpath/substitution.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace medpath::cli {

namespace {

std::vector<EstimateRow> estimate_rows(const RunConfig& cfg, const Dataset& d) {
  const NuisanceSet set = assemble_nuisances(d, cfg.nuisances, cfg.coding);
  const WeightingOptions options{
      cfg.stabilization == StabilizationMode::bounded ? WeightMode::bounded
                                                      : WeightMode::none,
      cfg.nuisances.positivity_floor, cfg.nuisances.policy};
  const NuisanceValues values = evaluate(set, d, options);

  std::vector<PointEstimate> betas;
  for (const auto kind : cfg.kinds) {
    switch (kind) {
      case EstimatorKind::mle: betas.push_back(beta_mle(d, values)); break;
      case EstimatorKind::ipw_a: betas.push_back(beta_a(d, values)); break;
      case EstimatorKind::ipw_b: betas.push_back(beta_b(d, values)); break;
      case EstimatorKind::mr: betas.push_back(beta_mr(d, values)); break;
      default: throw ConfigError("unsupported estimator " + to_string(kind));
    }
  }
  if (cfg.stabilization == StabilizationMode::substitution) {
    const auto& c = cfg.nuisances.cascade;
    betas.push_back(stabilized_substitution(d, {c.b, c.b_prime, c.b_pprime},
                                            set.f_a_c0, set.c1_ratio,
                                            set.m_ratio, cfg.coding, options)
                        .estimate);
  }

  const FittedGlm outcome = fit(d, cfg.total_outcome, d.y(), GlmFamily::linear);
  const PointEstimate ey_ap =
      aipw_mean(d, Arm::reference, outcome, set.f_a_c0, cfg.coding, options);
  const PointEstimate ey_a =
      aipw_mean(d, Arm::comparison, outcome, set.f_a_c0, cfg.coding, options);
  const double te = ey_a.value - ey_ap.value;

  auto row = [](std::string q, std::string e, const PointEstimate& p) {
    EstimateRow r{std::move(q), std::move(e), p.value};
    if (auto it = p.diagnostics.find("min_weight"); it != p.diagnostics.end()) {
      r.min_weight = it->second;
    }
    if (auto it = p.diagnostics.find("max_weight"); it != p.diagnostics.end()) {
      r.max_weight = it->second;
    }
    return r;
  };

  std::vector<EstimateRow> rows;
  for (const auto& b : betas) rows.push_back(row("beta", to_string(b.kind), b));
  rows.push_back(row("ey_aprime", "aipw", ey_ap));
  rows.push_back(row("ey_a", "aipw", ey_a));
  rows.push_back({"total_effect", "aipw", te});
  for (const auto& b : betas) {
    rows.push_back({"pse", to_string(b.kind), pse(b, ey_ap).value});
  }
  for (const auto& b : betas) {
    rows.push_back({"percent_mediated", to_string(b.kind),
                    percent_mediated(b.value - ey_ap.value, te)});
  }
  return rows;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : ""; }

}  // namespace

std::vector<EstimateRow> run_estimate(const RunConfig& config, const Dataset& data,
                                      int jobs) {
  std::vector<EstimateRow> rows = estimate_rows(config, data);
  if (config.reps == 0) return rows;

  BootstrapOptions bo;
  bo.reps = config.reps;
  bo.alpha = config.alpha;
  bo.seed = config.seed;
  bo.jobs = jobs;
  const BootstrapReport report = bootstrap(
      data,
      [&config](const Dataset& d) {
        std::vector<double> v;
        for (const auto& r : estimate_rows(config, d)) v.push_back(r.point);
        return v;
      },
      bo);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    rows[k].se = report.quantities[k].se;
    rows[k].ci_lower = report.quantities[k].ci_lower;
    rows[k].ci_upper = report.quantities[k].ci_upper;
  }
  return rows;
}

void write_estimates_csv(std::ostream& os, const std::vector<EstimateRow>& rows) {
  os << "quantity,estimator,point,se,ci_lower,ci_upper,min_weight,max_weight\n";
  for (const auto& r : rows) {
    os << r.quantity << ',' << r.estimator << ',' << num(r.point) << ','
       << opt(r.se) << ',' << opt(r.ci_lower) << ',' << opt(r.ci_upper) << ','
       << opt(r.min_weight) << ',' << opt(r.max_weight) << '\n';
  }
}

int cmd_estimate(const RunConfig& config, int jobs, std::ostream& out,
                 std::ostream& log) {
  const Dataset data = load_csv(config.data_path.string(), config.schema, config.coding);
  const auto rows = run_estimate(config, data, jobs);
  if (config.estimates_path == "-") {
    write_estimates_csv(out, rows);
  } else {
    std::ofstream f(config.estimates_path);
    if (!f) throw ConfigError("cannot write " + config.estimates_path.string());
    write_estimates_csv(f, rows);
    log << "wrote " << config.estimates_path.string() << '\n';
  }
  return 0;
}

int cmd_simulate(const SimulateArgs& args, std::ostream& log) {
  std::error_code ec;
  std::filesystem::create_directories(args.out_dir, ec);
  if (ec) throw ConfigError("cannot create " + args.out_dir.string());

  const OracleResult oracle = true_beta(args.options.params, 1.0, 0.0,
                                        args.oracle_draws, args.options.seed,
                                        args.options.jobs);
  const SimulationReport report = run_monte_carlo(args.options);

  auto open = [&](const char* name) {
    std::ofstream f(args.out_dir / name);
    if (!f) throw ConfigError("cannot write " + (args.out_dir / name).string());
    return f;
  };
  {
    auto f = open("replicates.csv");
    write_replicates_csv(f, report);
  }
  {
    auto f = open("summary.csv");
    write_summary_csv(f, report);
  }
  {
    auto f = open("oracle.json");
    f << "{\n  \"beta0\": " << num(oracle.closed_form)
      << ",\n  \"method\": \"closed_form\",\n  \"monte_carlo\": "
      << num(oracle.monte_carlo.value) << ",\n  \"monte_carlo_se\": "
      << num(oracle.monte_carlo.se) << ",\n  \"monte_carlo_draws\": "
      << oracle.monte_carlo.draws << ",\n  \"ey_aprime\": "
      << num(true_mean(args.options.params, 0.0)) << "\n}\n";
  }
  log << "scenario " << to_string(report.scenario) << ": "
      << report.reps - static_cast<int>(report.failed_reps.size()) << "/"
      << report.reps << " replicates succeeded; wrote "
      << args.out_dir.string() << '\n';
  if (report.unstable) {
    log << "E_UNSTABLE: " << report.failed_reps.size()
        << " replicate failures exceed 5%";
    if (!report.failure_messages.empty()) {
      log << "; first: " << report.failure_messages.front();
    }
    log << '\n';
    return 3;
  }
  return 0;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Path-specific effect estimation and simulation"};
  app.require_subcommand(1);

  std::string config_path;
  int jobs = 1;
  std::optional<int> reps_override;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> out_override;
  auto* est = app.add_subcommand("estimate", "Estimate effects from a CSV and a JSON config");
  est->add_option("--config", config_path, "JSON config file")->required();
  est->add_option("--jobs", jobs, "Bootstrap worker threads")->check(CLI::PositiveNumber);
  est->add_option("--reps", reps_override, "Override bootstrap.reps");
  est->add_option("--seed", seed_override, "Override bootstrap.seed");
  est->add_option("--out", out_override, "Override output.estimates");

  std::string scenario;
  std::string estimators = "mle,ipw_a,ipw_b,mr";
  std::string stabilization = "bounded";
  SimulateArgs sim;
  std::uint64_t seed = 0;
  std::string out_dir;
  auto* simc = app.add_subcommand("simulate", "Run the Monte Carlo study");
  simc->add_option("--scenario", scenario, "int, a, b or c")
      ->required()
      ->check(CLI::IsMember({"int", "a", "b", "c"}));
  simc->add_option("--n", sim.options.n, "Sample size")->required()->check(CLI::PositiveNumber);
  simc->add_option("--reps", sim.options.reps, "Replicates")->required()->check(CLI::Range(2, 1 << 30));
  simc->add_option("--seed", seed, "Master seed")->required();
  simc->add_option("--estimators", estimators, "Comma-separated estimator list");
  simc->add_option("--stabilization", stabilization, "none or bounded")
      ->check(CLI::IsMember({"none", "bounded"}));
  simc->add_option("--jobs", sim.options.jobs, "Worker threads")->check(CLI::PositiveNumber);
  simc->add_option("--oracle-draws", sim.oracle_draws, "Monte Carlo oracle draws")
      ->check(CLI::Range(2LL, 1LL << 40));
  simc->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "E_USAGE: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*est) {
      RunConfig cfg = load_run_config(config_path);
      if (reps_override) {
        if (*reps_override < 0 || *reps_override == 1) {
          throw ConfigError("--reps must be 0 or at least 2");
        }
        cfg.reps = *reps_override;
      }
      if (seed_override) cfg.seed = *seed_override;
      if (out_override) cfg.estimates_path = *out_override;
      return cmd_estimate(cfg, jobs, out, err);
    }
    sim.options.scenario = parse_scenario(scenario);
    sim.options.seed = seed;
    sim.options.stabilization =
        stabilization == "none" ? WeightMode::none : WeightMode::bounded;
    sim.options.estimators.clear();
    std::stringstream list(estimators);
    for (std::string item; std::getline(list, item, ',');) {
      if (!item.empty()) sim.options.estimators.push_back(parse_estimator(item));
    }
    sim.out_dir = out_dir;
    return cmd_simulate(sim, err);
  } catch (const Error& e) {
    err << e.code() << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "E_INTERNAL: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace medpath::cli
