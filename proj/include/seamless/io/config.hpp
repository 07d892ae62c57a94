#pragma once

// YAML scenario and schema files. Errors name the offending field and the
// line it sits on. Requires linking yaml-cpp.

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <set>
#include <string>
#include <vector>

#include "seamless/covariates.hpp"
#include "seamless/error.hpp"
#include "seamless/io/csv.hpp"
#include "seamless/simulation.hpp"

namespace seamless {

namespace detail {

inline std::string at_line(const YAML::Node& n) {
  const auto m = n.Mark();
  return m.line >= 0 ? "line " + std::to_string(m.line + 1) + ": " : "";
}

[[noreturn]] inline void config_fail(const YAML::Node& n, const std::string& field,
                                     const std::string& msg) {
  fail(ErrorCode::ConfigError, at_line(n) + "field '" + field + "': " + msg);
}

template <class T>
T as(const YAML::Node& n, const std::string& field) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    config_fail(n, field, "has the wrong type");
  }
}

template <class T>
void read_opt(const YAML::Node& map, const std::string& key, const std::string& prefix, T& out) {
  if (const auto n = map[key]) out = as<T>(n, prefix + key);
}

inline void check_keys(const YAML::Node& map, const std::string& prefix,
                       const std::set<std::string>& allowed) {
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) config_fail(kv.first, prefix + key, "unknown field");
  }
}

inline YAML::Node load_yaml(const std::string& text) {
  try {
    return YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    fail(ErrorCode::ConfigError, "line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
}

inline void read_design(const YAML::Node& n, DesignParams& p) {
  const std::string pre = "design.";
  check_keys(n, pre,
             {"n_doses", "cohort_size", "max_cohorts", "start_dose", "phi_t", "delta_e", "lambda_e",
              "lambda_d", "eta_e", "stop_tox_prob", "stop_fut_prob", "elim_prior_a", "elim_prior_b",
              "min_n_for_elimination", "utility", "assessment_window", "backfill_enabled",
              "backfill_cap", "backfill_per_step"});
  read_opt(n, "n_doses", pre, p.n_doses);
  read_opt(n, "cohort_size", pre, p.cohort_size);
  read_opt(n, "max_cohorts", pre, p.max_cohorts);
  read_opt(n, "start_dose", pre, p.start_dose);
  read_opt(n, "phi_t", pre, p.phi_t);
  read_opt(n, "delta_e", pre, p.delta_e);
  p.lambda_e = boin_boundary(p.phi_t, 0.6 * p.phi_t);
  p.lambda_d = boin_boundary(p.phi_t, 1.4 * p.phi_t);
  p.eta_e = p.delta_e;
  read_opt(n, "lambda_e", pre, p.lambda_e);
  read_opt(n, "lambda_d", pre, p.lambda_d);
  read_opt(n, "eta_e", pre, p.eta_e);
  read_opt(n, "stop_tox_prob", pre, p.stop_tox_prob);
  read_opt(n, "stop_fut_prob", pre, p.stop_fut_prob);
  read_opt(n, "elim_prior_a", pre, p.elim_prior_a);
  read_opt(n, "elim_prior_b", pre, p.elim_prior_b);
  read_opt(n, "min_n_for_elimination", pre, p.min_n_for_elimination);
  if (const auto u = n["utility"]) {
    check_keys(u, pre + "utility.", {"eff_notox", "eff_tox", "noeff_notox", "noeff_tox"});
    read_opt(u, "eff_notox", pre + "utility.", p.utility.eff_notox);
    read_opt(u, "eff_tox", pre + "utility.", p.utility.eff_tox);
    read_opt(u, "noeff_notox", pre + "utility.", p.utility.noeff_notox);
    read_opt(u, "noeff_tox", pre + "utility.", p.utility.noeff_tox);
  }
  read_opt(n, "assessment_window", pre, p.assessment_window);
  read_opt(n, "backfill_enabled", pre, p.backfill_enabled);
  read_opt(n, "backfill_cap", pre, p.backfill_cap);
  read_opt(n, "backfill_per_step", pre, p.backfill_per_step);
}

inline std::vector<std::string> efficacy_columns() {
  const auto schema = oncology_baseline_schema();
  std::vector<std::string> names;
  for (const auto& c : schema.columns()) names.push_back(c.name);
  return names;
}

}  // namespace detail

inline KernelConfig parse_kernel_config(const YAML::Node& n, const std::string& pre = "kernel.") {
  KernelConfig k;
  detail::check_keys(n, pre, {"bandwidth", "mmd_max", "weight_scale"});
  if (const auto b = n["bandwidth"]) {
    const auto s = detail::as<std::string>(b, pre + "bandwidth");
    if (s != "median") {
      k.bandwidth = BandwidthRule::Fixed;
      k.sigma = detail::as<double>(b, pre + "bandwidth");
      if (!(k.sigma > 0)) detail::config_fail(b, pre + "bandwidth", "must be positive or 'median'");
    }
  }
  detail::read_opt(n, "mmd_max", pre, k.mmd_max);
  if (const auto s = n["weight_scale"]) {
    const auto v = detail::as<std::string>(s, pre + "weight_scale");
    if (v == "squared") k.scale = WeightScale::Squared;
    else if (v == "root") k.scale = WeightScale::Root;
    else detail::config_fail(s, pre + "weight_scale", "must be 'squared' or 'root'");
  }
  return k;
}

namespace detail {

inline ScenarioConfig parse_scenario_node(const YAML::Node& root) {
  if (!root.IsMap()) fail(ErrorCode::ConfigError, "scenario config must be a mapping");
  detail::check_keys(root, "",
                     {"name", "scenario", "covariate_case", "toxicity_probs", "efficacy", "true_obd",
                      "design", "kernel", "weight_alpha", "prior", "accrual_rate", "weibull_shape",
                      "phase2_n_per_arm", "tau", "cred_alpha", "replicates", "seed"});
  ScenarioConfig c;
  for (const char* req : {"toxicity_probs", "efficacy", "covariate_case"})
    if (!root[req]) fail(ErrorCode::ConfigError, std::string("missing required field '") + req + "'");

  detail::read_opt(root, "name", "", c.name);
  detail::read_opt(root, "scenario", "", c.scenario);
  detail::read_opt(root, "covariate_case", "", c.covariate_case);
  c.toxicity_probs = detail::as<std::vector<double>>(root["toxicity_probs"], "toxicity_probs");

  const auto eff = root["efficacy"];
  detail::check_keys(eff, "efficacy.", {"intercepts", "coefficients", "targets"});
  if (!eff["intercepts"]) detail::config_fail(eff, "efficacy.intercepts", "is required");
  c.efficacy.intercepts = detail::as<std::vector<double>>(eff["intercepts"], "efficacy.intercepts");
  c.efficacy.coefficients = default_efficacy_coefficients();
  if (const auto co = eff["coefficients"]) {
    const auto names = detail::efficacy_columns();
    detail::check_keys(co, "efficacy.coefficients.", {names.begin(), names.end()});
    for (std::size_t i = 0; i < names.size(); ++i)
      detail::read_opt(co, names[i], "efficacy.coefficients.",
                       c.efficacy.coefficients(static_cast<Eigen::Index>(i)));
  }
  detail::read_opt(eff, "targets", "efficacy.", c.efficacy_targets);
  if (const auto t = root["true_obd"]) c.true_obd = detail::as<int>(t, "true_obd");
  if (const auto d = root["design"]) detail::read_design(d, c.design);
  if (const auto k = root["kernel"]) c.kernel = parse_kernel_config(k);
  detail::read_opt(root, "weight_alpha", "", c.weight_alpha);
  if (const auto p = root["prior"]) {
    detail::check_keys(p, "prior.", {"a0", "b0"});
    detail::read_opt(p, "a0", "prior.", c.prior.a0);
    detail::read_opt(p, "b0", "prior.", c.prior.b0);
  }
  detail::read_opt(root, "accrual_rate", "", c.accrual_rate);
  detail::read_opt(root, "weibull_shape", "", c.weibull_shape);
  detail::read_opt(root, "phase2_n_per_arm", "", c.phase2_n_per_arm);
  detail::read_opt(root, "tau", "", c.tau);
  detail::read_opt(root, "cred_alpha", "", c.cred_alpha);
  detail::read_opt(root, "replicates", "", c.replicates);
  detail::read_opt(root, "seed", "", c.seed);
  const auto design = root["design"];
  if (!(design && design.IsMap() && design["n_doses"]))
    c.design.n_doses = static_cast<int>(c.toxicity_probs.size());
  try {
    c.validate();
  } catch (const Error& e) {
    fail(ErrorCode::ConfigError, e.what());
  }
  return c;
}

}  // namespace detail

inline ScenarioConfig parse_scenario_config(const std::string& text) {
  const auto root = detail::load_yaml(text);
  try {
    return detail::parse_scenario_node(root);
  } catch (const YAML::Exception& e) {
    // shape errors the field checks did not anticipate, e.g. a list where a map belongs
    fail(ErrorCode::ConfigError, detail::at_line(root) + e.msg);
  }
}

inline ScenarioConfig load_scenario_config(const std::string& path) {
  try {
    return parse_scenario_config(read_text_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IoError) throw;
    fail(e.code(), path + ": " + e.what());
  }
}

namespace detail {

// Shortest text that reads back to the same double.
inline std::string num(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline std::vector<std::string> nums(const std::vector<double>& xs) {
  std::vector<std::string> out;
  for (double x : xs) out.push_back(num(x));
  return out;
}

}  // namespace detail

/// Emits a config that parse_scenario_config reads back unchanged.
inline std::string scenario_config_yaml(const ScenarioConfig& c) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << c.name;
  out << YAML::Key << "scenario" << YAML::Value << c.scenario;
  out << YAML::Key << "covariate_case" << YAML::Value << c.covariate_case;
  out << YAML::Key << "toxicity_probs" << YAML::Value << YAML::Flow << detail::nums(c.toxicity_probs);
  out << YAML::Key << "efficacy" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "intercepts" << YAML::Value << YAML::Flow << detail::nums(c.efficacy.intercepts);
  out << YAML::Key << "coefficients" << YAML::Value << YAML::Flow << YAML::BeginMap;
  const auto names = detail::efficacy_columns();
  for (std::size_t i = 0; i < names.size(); ++i)
    out << YAML::Key << names[i] << YAML::Value << detail::num(c.efficacy.coefficients(static_cast<Eigen::Index>(i)));
  out << YAML::EndMap;
  if (!c.efficacy_targets.empty())
    out << YAML::Key << "targets" << YAML::Value << YAML::Flow << detail::nums(c.efficacy_targets);
  out << YAML::EndMap;
  if (c.true_obd) out << YAML::Key << "true_obd" << YAML::Value << *c.true_obd;
  const auto& d = c.design;
  out << YAML::Key << "design" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "n_doses" << YAML::Value << d.n_doses;
  out << YAML::Key << "cohort_size" << YAML::Value << d.cohort_size;
  out << YAML::Key << "max_cohorts" << YAML::Value << d.max_cohorts;
  out << YAML::Key << "start_dose" << YAML::Value << d.start_dose;
  out << YAML::Key << "phi_t" << YAML::Value << detail::num(d.phi_t);
  out << YAML::Key << "delta_e" << YAML::Value << detail::num(d.delta_e);
  out << YAML::Key << "lambda_e" << YAML::Value << detail::num(d.lambda_e);
  out << YAML::Key << "lambda_d" << YAML::Value << detail::num(d.lambda_d);
  out << YAML::Key << "eta_e" << YAML::Value << detail::num(d.eta_e);
  out << YAML::Key << "stop_tox_prob" << YAML::Value << detail::num(d.stop_tox_prob);
  out << YAML::Key << "stop_fut_prob" << YAML::Value << detail::num(d.stop_fut_prob);
  out << YAML::Key << "elim_prior_a" << YAML::Value << detail::num(d.elim_prior_a);
  out << YAML::Key << "elim_prior_b" << YAML::Value << detail::num(d.elim_prior_b);
  out << YAML::Key << "min_n_for_elimination" << YAML::Value << d.min_n_for_elimination;
  out << YAML::Key << "utility" << YAML::Value << YAML::Flow << YAML::BeginMap;
  out << YAML::Key << "eff_notox" << YAML::Value << detail::num(d.utility.eff_notox);
  out << YAML::Key << "eff_tox" << YAML::Value << detail::num(d.utility.eff_tox);
  out << YAML::Key << "noeff_notox" << YAML::Value << detail::num(d.utility.noeff_notox);
  out << YAML::Key << "noeff_tox" << YAML::Value << detail::num(d.utility.noeff_tox);
  out << YAML::EndMap;
  out << YAML::Key << "assessment_window" << YAML::Value << detail::num(d.assessment_window);
  out << YAML::Key << "backfill_enabled" << YAML::Value << d.backfill_enabled;
  out << YAML::Key << "backfill_cap" << YAML::Value << d.backfill_cap;
  out << YAML::Key << "backfill_per_step" << YAML::Value << d.backfill_per_step;
  out << YAML::EndMap;
  out << YAML::Key << "kernel" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "bandwidth";
  if (c.kernel.bandwidth == BandwidthRule::Fixed) out << YAML::Value << detail::num(c.kernel.sigma);
  else out << YAML::Value << "median";
  out << YAML::Key << "mmd_max" << YAML::Value << detail::num(c.kernel.mmd_max);
  out << YAML::Key << "weight_scale" << YAML::Value
      << (c.kernel.scale == WeightScale::Root ? "root" : "squared");
  out << YAML::EndMap;
  out << YAML::Key << "weight_alpha" << YAML::Value << detail::num(c.weight_alpha);
  out << YAML::Key << "prior" << YAML::Value << YAML::Flow << YAML::BeginMap;
  out << YAML::Key << "a0" << YAML::Value << detail::num(c.prior.a0);
  out << YAML::Key << "b0" << YAML::Value << detail::num(c.prior.b0);
  out << YAML::EndMap;
  out << YAML::Key << "accrual_rate" << YAML::Value << detail::num(c.accrual_rate);
  out << YAML::Key << "weibull_shape" << YAML::Value << detail::num(c.weibull_shape);
  out << YAML::Key << "phase2_n_per_arm" << YAML::Value << c.phase2_n_per_arm;
  out << YAML::Key << "tau" << YAML::Value << detail::num(c.tau);
  out << YAML::Key << "cred_alpha" << YAML::Value << detail::num(c.cred_alpha);
  out << YAML::Key << "replicates" << YAML::Value << c.replicates;
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

inline CovariateSchema parse_schema_config(const std::string& text) {
  const auto root = detail::load_yaml(text);
  if (!root.IsMap() || !root["variables"] || !root["variables"].IsSequence())
    fail(ErrorCode::ConfigError, "schema file needs a 'variables' list");
  std::vector<Variable> vars;
  for (const auto& v : root["variables"]) {
    if (!v.IsMap()) detail::config_fail(v, "variables", "entries must be mappings");
    detail::check_keys(v, "variables.", {"name", "kind", "levels"});
    if (!v["name"] || !v["kind"]) detail::config_fail(v, "variables", "needs 'name' and 'kind'");
    const auto name = detail::as<std::string>(v["name"], "variables.name");
    const auto kind = detail::as<std::string>(v["kind"], "variables.kind");
    if (kind == "continuous") vars.push_back(Variable::continuous(name));
    else if (kind == "binary") vars.push_back(Variable::binary(name));
    else if (kind == "categorical") {
      if (!v["levels"]) detail::config_fail(v, "variables.levels", "required for categorical '" + name + "'");
      vars.push_back(Variable::categorical(
          name, detail::as<std::vector<std::string>>(v["levels"], "variables.levels")));
    } else {
      detail::config_fail(v["kind"], "variables.kind", "unknown kind '" + kind + "'");
    }
  }
  try {
    return CovariateSchema(std::move(vars));
  } catch (const Error& e) {
    fail(ErrorCode::ConfigError, e.what());
  }
}

inline CovariateSchema load_schema_config(const std::string& path) {
  try {
    return parse_schema_config(read_text_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IoError) throw;
    fail(e.code(), path + ": " + e.what());
  }
}

}  // namespace seamless
