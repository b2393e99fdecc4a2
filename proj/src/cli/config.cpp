#include "medpath/cli.hpp"

#include "medpath/error.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace medpath::cli {

namespace {

using nlohmann::json;

void allow_keys(const json& obj, const std::string& section,
                std::initializer_list<const char*> keys) {
  if (!obj.is_object()) {
    throw ConfigError("section '" + section + "' must be an object");
  }
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) {
      throw ConfigError("unknown key '" + section + "." + k + "'");
    }
  }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback, const std::string& section) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(section + "." + key + ": " + e.what());
  }
}

template <class T>
T require(const json& obj, const char* key, const std::string& section) {
  if (!obj.contains(key)) {
    throw ConfigError("missing required key '" + section + "." + key + "'");
  }
  return get_or<T>(obj, key, T{}, section);
}

std::string join_terms(const std::vector<std::string>& names,
                       const std::string& prefix = "") {
  std::string s;
  for (const auto& n : names) s += " + " + prefix + n;
  return s;
}

Formula formula_at(const json& models, const char* key,
                   const std::string& fallback) {
  const auto text = get_or<std::string>(models, key, fallback, "models");
  if (text.empty()) {
    throw ConfigError("missing required key 'models." + std::string(key) + "'");
  }
  try {
    return parse_formula(text);
  } catch (const Error& e) {
    throw ConfigError("models." + std::string(key) + ": " + e.what());
  }
}

GlmFamily family_at(const json& models, const char* key, GlmFamily fallback) {
  if (!models.contains(key)) return fallback;
  try {
    return parse_family(models.at(key).get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("models.") + key + ": " + e.what());
  } catch (const Error& e) {
    throw ConfigError(std::string("models.") + key + ": " + e.what());
  }
}

void check_names(const Formula& f, const Schema& schema, const char* what) {
  for (const auto& v : f.variables()) {
    const bool known = v == "A" || v == "M" || v == schema.a || v == schema.m ||
                       std::count(schema.c0.begin(), schema.c0.end(), v) ||
                       std::count(schema.c1.begin(), schema.c1.end(), v);
    if (!known) {
      throw ConfigError(std::string("models.") + what + " references '" + v +
                        "', which is not a configured column");
    }
  }
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text,
                           const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  allow_keys(root, "config", {"data", "models", "estimator", "bootstrap", "output"});
  RunConfig cfg;

  const json data = root.value("data", json::object());
  allow_keys(data, "data", {"path", "c0", "a", "c1", "m", "y", "coding"});
  const auto path = require<std::string>(data, "path", "data");
  cfg.data_path = std::filesystem::path(path).is_absolute()
                      ? std::filesystem::path(path)
                      : base_dir / path;
  cfg.schema.c0 = require<std::vector<std::string>>(data, "c0", "data");
  cfg.schema.a = require<std::string>(data, "a", "data");
  cfg.schema.c1 = require<std::vector<std::string>>(data, "c1", "data");
  cfg.schema.m = require<std::string>(data, "m", "data");
  cfg.schema.y = require<std::string>(data, "y", "data");
  if (data.contains("coding")) {
    const json& c = data.at("coding");
    allow_keys(c, "data.coding", {"a", "a_prime"});
    cfg.coding.a = get_or<double>(c, "a", 1.0, "data.coding");
    cfg.coding.a_prime = get_or<double>(c, "a_prime", 0.0, "data.coding");
  }
  try {
    cfg.coding.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("data.coding: ") + e.what());
  }

  const std::string c0_terms = join_terms(cfg.schema.c0);
  const std::string c1_terms = join_terms(cfg.schema.c1);

  const json models = root.value("models", json::object());
  allow_keys(models, "models",
             {"cascade", "b", "b_family", "b_prime", "b_pprime", "mediator_mean",
              "c1_mean", "f_a_c0", "f_a_c0_family", "propensity_c1",
              "propensity_c1_family", "propensity_m", "propensity_m_family",
              "total_outcome", "enforce_compatibility"});
  NuisanceSpec& ns = cfg.nuisances;
  const auto cascade = get_or<std::string>(models, "cascade", "regression", "models");
  if (cascade == "regression") {
    ns.cascade.kind = CascadeKind::regression;
  } else if (cascade == "plug_in") {
    ns.cascade.kind = CascadeKind::plug_in;
  } else {
    throw ConfigError("models.cascade must be 'regression' or 'plug_in'");
  }
  ns.cascade.b = formula_at(models, "b", "");
  ns.cascade.b_family = family_at(models, "b_family", GlmFamily::linear);
  ns.cascade.b_prime = formula_at(models, "b_prime", "1" + c0_terms + c1_terms);
  ns.cascade.b_pprime = formula_at(models, "b_pprime", "1" + c0_terms);
  if (ns.cascade.kind == CascadeKind::plug_in) {
    ns.cascade.mediator_mean =
        formula_at(models, "mediator_mean", "1 + A" + c0_terms + c1_terms);
    ns.cascade.c1_mean = formula_at(models, "c1_mean", "1 + A" + c0_terms);
  }
  ns.f_a_c0 = {formula_at(models, "f_a_c0", "1" + c0_terms),
               family_at(models, "f_a_c0_family", GlmFamily::logistic)};
  ns.c1_numerator = {formula_at(models, "propensity_c1", ""),
                     family_at(models, "propensity_c1_family", GlmFamily::logistic)};
  ns.m_numerator = {formula_at(models, "propensity_m", ""),
                    family_at(models, "propensity_m_family", GlmFamily::logistic)};
  ns.enforce_compatibility =
      get_or<bool>(models, "enforce_compatibility", true, "models");
  cfg.total_outcome =
      formula_at(models, "total_outcome",
                 "1 + A" + c0_terms + join_terms(cfg.schema.c0, "A:"));

  const std::pair<const Formula*, const char*> named[] = {
      {&ns.cascade.b, "b"},
      {&ns.cascade.b_prime, "b_prime"},
      {&ns.cascade.b_pprime, "b_pprime"},
      {&ns.cascade.mediator_mean, "mediator_mean"},
      {&ns.cascade.c1_mean, "c1_mean"},
      {&ns.f_a_c0.formula, "f_a_c0"},
      {&ns.c1_numerator.formula, "propensity_c1"},
      {&ns.m_numerator.formula, "propensity_m"},
      {&cfg.total_outcome, "total_outcome"}};
  for (const auto& [f, what] : named) check_names(*f, cfg.schema, what);

  const json est = root.value("estimator", json::object());
  allow_keys(est, "estimator", {"kinds", "stabilization", "positivity_floor"});
  const auto kinds = get_or<std::vector<std::string>>(
      est, "kinds", {"mle", "ipw_a", "ipw_b", "mr"}, "estimator");
  for (const auto& k : kinds) {
    const EstimatorKind kind = parse_estimator(k);
    if (kind == EstimatorKind::substitution) {
      throw ConfigError(
          "request the substitution estimator with estimator.stabilization");
    }
    if (std::find(cfg.kinds.begin(), cfg.kinds.end(), kind) == cfg.kinds.end()) {
      cfg.kinds.push_back(kind);
    }
  }
  const auto mode = get_or<std::string>(est, "stabilization", "none", "estimator");
  if (mode == "none") {
    cfg.stabilization = StabilizationMode::none;
  } else if (mode == "bounded") {
    cfg.stabilization = StabilizationMode::bounded;
  } else if (mode == "substitution") {
    cfg.stabilization = StabilizationMode::substitution;
    if (ns.cascade.b_family != GlmFamily::linear) {
      throw ContractError(
          "substitution stabilization requires a linear outcome cascade, got B "
          "family " + to_string(ns.cascade.b_family));
    }
  } else {
    throw ConfigError("estimator.stabilization must be none, bounded or substitution");
  }
  ns.positivity_floor = get_or<double>(est, "positivity_floor", 1e-3, "estimator");
  if (!(ns.positivity_floor >= 0.0 && ns.positivity_floor < 0.5)) {
    throw ConfigError("estimator.positivity_floor must lie in [0, 0.5)");
  }
  ns.policy = PositivityPolicy::error;

  const json boot = root.value("bootstrap", json::object());
  allow_keys(boot, "bootstrap", {"reps", "alpha", "level", "seed"});
  cfg.reps = get_or<int>(boot, "reps", 0, "bootstrap");
  if (cfg.reps < 0 || cfg.reps == 1) {
    throw ConfigError("bootstrap.reps must be 0 or at least 2");
  }
  cfg.alpha = get_or<double>(boot, "alpha", 0.05, "bootstrap");
  if (boot.contains("level")) {
    cfg.alpha = 1.0 - get_or<double>(boot, "level", 0.95, "bootstrap");
  }
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) {
    throw ConfigError("bootstrap alpha must lie in (0, 1)");
  }
  if (cfg.reps > 0 && !boot.contains("seed")) {
    throw ConfigError("bootstrap.seed is required when bootstrap.reps > 0");
  }
  cfg.seed = get_or<std::uint64_t>(boot, "seed", 0, "bootstrap");

  const json out = root.value("output", json::object());
  allow_keys(out, "output", {"estimates"});
  const auto est_path = get_or<std::string>(out, "estimates", "estimates.csv", "output");
  cfg.estimates_path = est_path == "-" || std::filesystem::path(est_path).is_absolute()
                           ? std::filesystem::path(est_path)
                           : base_dir / est_path;
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), path.parent_path());
}

}  // namespace medpath::cli
