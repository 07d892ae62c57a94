#pragma once

// JSON representations used by the CLI reports, the event log and the
// conduct service.

#include <nlohmann/json.hpp>

#include <string>
#include <variant>
#include <vector>

#include "seamless/analysis.hpp"
#include "seamless/covariates.hpp"
#include "seamless/dose_finding.hpp"
#include "seamless/mmd.hpp"
#include "seamless/posterior.hpp"
#include "seamless/simulation.hpp"

namespace seamless {

using json = nlohmann::ordered_json;

inline void to_json(json& j, const Outcome& o) { j = json{{"eff", o.eff}, {"tox", o.tox}}; }
inline void from_json(const json& j, Outcome& o) {
  o.eff = j.at("eff").get<bool>();
  o.tox = j.at("tox").get<bool>();
}

inline void to_json(json& j, const UtilityWeights& u) {
  j = json{{"eff_notox", u.eff_notox}, {"eff_tox", u.eff_tox},
           {"noeff_notox", u.noeff_notox}, {"noeff_tox", u.noeff_tox}};
}
inline void from_json(const json& j, UtilityWeights& u) {
  u.eff_notox = j.value("eff_notox", u.eff_notox);
  u.eff_tox = j.value("eff_tox", u.eff_tox);
  u.noeff_notox = j.value("noeff_notox", u.noeff_notox);
  u.noeff_tox = j.value("noeff_tox", u.noeff_tox);
}

inline void to_json(json& j, const DesignParams& p) {
  j = json{{"n_doses", p.n_doses},
           {"cohort_size", p.cohort_size},
           {"max_cohorts", p.max_cohorts},
           {"start_dose", p.start_dose},
           {"phi_t", p.phi_t},
           {"delta_e", p.delta_e},
           {"lambda_e", p.lambda_e},
           {"lambda_d", p.lambda_d},
           {"eta_e", p.eta_e},
           {"stop_tox_prob", p.stop_tox_prob},
           {"stop_fut_prob", p.stop_fut_prob},
           {"elim_prior_a", p.elim_prior_a},
           {"elim_prior_b", p.elim_prior_b},
           {"min_n_for_elimination", p.min_n_for_elimination},
           {"utility", p.utility},
           {"assessment_window", p.assessment_window},
           {"backfill_enabled", p.backfill_enabled},
           {"backfill_cap", p.backfill_cap},
           {"backfill_per_step", p.backfill_per_step}};
}

/// Missing fields keep their defaults; toxicity boundaries are recomputed
/// from phi_t unless given explicitly.
inline void from_json(const json& j, DesignParams& p) {
  p.n_doses = j.value("n_doses", p.n_doses);
  p.cohort_size = j.value("cohort_size", p.cohort_size);
  p.max_cohorts = j.value("max_cohorts", p.max_cohorts);
  p.start_dose = j.value("start_dose", p.start_dose);
  p.phi_t = j.value("phi_t", p.phi_t);
  p.delta_e = j.value("delta_e", p.delta_e);
  p.lambda_e = j.value("lambda_e", boin_boundary(p.phi_t, 0.6 * p.phi_t));
  p.lambda_d = j.value("lambda_d", boin_boundary(p.phi_t, 1.4 * p.phi_t));
  p.eta_e = j.value("eta_e", p.delta_e);
  p.stop_tox_prob = j.value("stop_tox_prob", p.stop_tox_prob);
  p.stop_fut_prob = j.value("stop_fut_prob", p.stop_fut_prob);
  p.elim_prior_a = j.value("elim_prior_a", p.elim_prior_a);
  p.elim_prior_b = j.value("elim_prior_b", p.elim_prior_b);
  p.min_n_for_elimination = j.value("min_n_for_elimination", p.min_n_for_elimination);
  if (j.contains("utility")) j.at("utility").get_to(p.utility);
  p.assessment_window = j.value("assessment_window", p.assessment_window);
  p.backfill_enabled = j.value("backfill_enabled", p.backfill_enabled);
  p.backfill_cap = j.value("backfill_cap", p.backfill_cap);
  p.backfill_per_step = j.value("backfill_per_step", p.backfill_per_step);
}

inline void to_json(json& j, const DoseState& d) {
  j = json{{"level", d.level},
           {"eff_notox", d.eff_notox},
           {"eff_tox", d.eff_tox},
           {"noeff_notox", d.noeff_notox},
           {"noeff_tox", d.noeff_tox},
           {"n_treated", d.n_treated()},
           {"n_tox", d.n_tox()},
           {"n_eff", d.n_eff()},
           {"backfill_count", d.backfill_count},
           {"eliminated_toxicity", d.eliminated_toxicity},
           {"eliminated_futility", d.eliminated_futility}};
}

inline void to_json(json& j, const CohortEvent& e) {
  j = json{{"type", "cohort"},
           {"cohort_id", e.cohort_id},
           {"dose", e.dose},
           {"patient_ids", e.patient_ids},
           {"outcomes", e.outcomes},
           {"boundaries", {{"lambda_e", e.lambda_e}, {"lambda_d", e.lambda_d}, {"eta_e", e.eta_e}}},
           {"decision", to_string(e.decision)},
           {"forced_by_elimination", e.forced_by_elimination},
           {"eliminated_toxicity", e.eliminated_toxicity},
           {"eliminated_futility", e.eliminated_futility},
           {"next_dose", e.next_dose},
           {"phase_after", to_string(e.phase_after)}};
}

inline void to_json(json& j, const BackfillEvent& e) {
  j = json{{"type", "backfill"}, {"patient_id", e.patient_id}, {"dose", e.dose}, {"outcome", e.outcome}};
}

inline Decision decision_from_string(const std::string& s) {
  if (s == "Escalate") return Decision::Escalate;
  if (s == "Stay") return Decision::Stay;
  if (s == "DeEscalate") return Decision::DeEscalate;
  fail(ErrorCode::SchemaMismatch, "unknown decision '" + s + "'");
}

inline Phase phase_from_string(const std::string& s) {
  if (s == "Escalation") return Phase::Escalation;
  if (s == "Completed") return Phase::Completed;
  if (s == "StoppedEarly") return Phase::StoppedEarly;
  fail(ErrorCode::SchemaMismatch, "unknown phase '" + s + "'");
}

inline void to_json(json& j, const TrialEvent& e) {
  std::visit([&](const auto& v) { to_json(j, v); }, e);
}

inline void from_json(const json& j, TrialEvent& e) {
  const auto type = j.at("type").get<std::string>();
  if (type == "backfill") {
    BackfillEvent b;
    b.patient_id = j.at("patient_id").get<int>();
    b.dose = j.at("dose").get<int>();
    b.outcome = j.at("outcome").get<Outcome>();
    e = b;
    return;
  }
  require(type == "cohort", ErrorCode::SchemaMismatch, "unknown event type '" + type + "'");
  CohortEvent c;
  c.cohort_id = j.at("cohort_id").get<int>();
  c.dose = j.at("dose").get<int>();
  c.patient_ids = j.at("patient_ids").get<std::vector<int>>();
  c.outcomes = j.at("outcomes").get<std::vector<Outcome>>();
  const auto& b = j.at("boundaries");
  c.lambda_e = b.at("lambda_e").get<double>();
  c.lambda_d = b.at("lambda_d").get<double>();
  c.eta_e = b.at("eta_e").get<double>();
  c.decision = decision_from_string(j.at("decision").get<std::string>());
  c.forced_by_elimination = j.at("forced_by_elimination").get<bool>();
  c.eliminated_toxicity = j.at("eliminated_toxicity").get<std::vector<int>>();
  c.eliminated_futility = j.at("eliminated_futility").get<std::vector<int>>();
  c.next_dose = j.at("next_dose").get<int>();
  c.phase_after = phase_from_string(j.at("phase_after").get<std::string>());
  e = c;
}

/// One decision per line.
inline std::string event_log_jsonl(const std::vector<TrialEvent>& events) {
  std::string out;
  for (const auto& e : events) {
    out += json(e).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<TrialEvent> parse_event_log(const std::string& text) {
  std::vector<TrialEvent> events;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    if (!line.empty()) events.push_back(json::parse(line).get<TrialEvent>());
    pos = end + 1;
  }
  return events;
}

inline json trial_state_json(const TrialState& s, const DesignParams& p) {
  json doses = json::array();
  for (const auto& d : s.doses) {
    json dj = d;
    if (d.n_treated() > 0) {
      dj["utility"] = utility_score(d, p);
      dj["prob_excess_toxicity"] = prob_excess_toxicity(d, p);
      dj["prob_insufficient_efficacy"] = prob_insufficient_efficacy(d, p);
    } else {
      dj["utility"] = nullptr;
    }
    doses.push_back(std::move(dj));
  }
  json backfills = json::array();
  for (const auto& b : s.backfill_assignments)
    backfills.push_back({{"dose", b.dose}, {"patient_id", b.patient_id}});
  const auto target = backfill_target(s, p);
  return json{{"phase", to_string(s.phase)},
              {"current_dose", s.current_dose},
              {"cohorts_enrolled", s.cohorts_enrolled},
              {"total_enrolled", s.total_enrolled()},
              {"backfill_target", target ? json(*target) : json(nullptr)},
              {"boundaries", {{"lambda_e", p.lambda_e}, {"lambda_d", p.lambda_d}, {"eta_e", p.eta_e}}},
              {"doses", doses},
              {"backfill_assignments", backfills}};
}

inline void to_json(json& j, const CredibleInterval& c) { j = json{c.low, c.high}; }

inline void to_json(json& j, const PosteriorSummary& s) {
  j = json{{"w", s.w},       {"alpha", s.alpha_param}, {"beta", s.beta_param},
           {"mean", s.mean}, {"interval", s.interval}, {"exceeds_tau", s.exceeds}};
}

inline void to_json(json& j, const ArmCounts& c) {
  j = json{{"n1", c.n1}, {"n1_e", c.n1_e}, {"n2", c.n2}, {"n2_e", c.n2_e}};
}

inline void to_json(json& j, const WeightEstimate& w) {
  j = json{{"w", w.w}, {"variance_v", w.variance_v}, {"ci", {w.ci_low, w.ci_high}}, {"alpha", w.alpha}};
}

inline void to_json(json& j, const MmdEstimate& e) {
  j = json{{"a1", e.a1}, {"a2", e.a2}, {"a12", e.a12}, {"mmd2", e.mmd2},
           {"n1", e.n1}, {"n2", e.n2}, {"sigma", e.sigma}};
}

inline void to_json(json& j, const VarianceComponents& c) {
  j = json{{"zeta1_dag", c.zeta1_dag},   {"zeta2_dag", c.zeta2_dag},   {"zeta1_ddag", c.zeta1_ddag},
           {"zeta2_ddag", c.zeta2_ddag}, {"zeta3_ddag", c.zeta3_ddag}, {"var_mu11", c.var_mu11},
           {"var_mu21", c.var_mu21},     {"cov_1", c.cov_1},           {"var_mu22", c.var_mu22},
           {"var_mu12", c.var_mu12},     {"cov_2", c.cov_2}};
}

inline void to_json(json& j, const ArmSimilarity& s) {
  j = json{{"weight", s.weight}, {"warnings", s.warnings}};
  if (s.result) {
    j["mmd"] = s.result->mmd;
    j["variance"] = s.result->variance.components;
    j["variance_raw"] = s.result->variance.raw;
    j["dropped_columns"] = s.result->standardization.dropped;
  }
}

inline void to_json(json& j, const DoseAnalysis& d) {
  j = json{{"dose", d.dose},
           {"counts", d.counts},
           {"similarity", d.similarity},
           {"w_used", d.w_used},
           {"dynamic", d.dynamic},
           {"no_borrowing", d.no_borrowing},
           {"full_borrowing", d.full_borrowing}};
}

inline void to_json(json& j, const DoseSummary& d) {
  j = json{{"dose", d.dose},
           {"tox_prob", d.tox_prob},
           {"selected", d.selected},
           {"exceed_borrowing", d.exceed_borrowing},
           {"exceed_no_borrowing", d.exceed_no_borrowing},
           {"borrowing_only", d.borrowing_only},
           {"no_borrowing_only", d.no_borrowing_only},
           {"p_exceed_borrowing", d.p_exceed_borrowing},
           {"p_exceed_no_borrowing", d.p_exceed_no_borrowing},
           {"mean_phase1_patients", d.mean_phase1_patients},
           {"mean_phase1_efficacy", d.mean_phase1_efficacy},
           {"mean_phase2_efficacy", d.mean_phase2_efficacy},
           {"mean_weight", d.mean_weight}};
}

inline void to_json(json& j, const SimulationSummary& s) {
  j = json{{"replicates", s.replicates},
           {"valid", s.valid},
           {"early_stops", s.early_stops},
           {"insufficient_candidates", s.insufficient_candidates},
           {"true_obd", s.true_obd},
           {"obd_selected", s.obd_selected},
           {"p_obd_selected", s.p_obd_selected},
           {"p_early_stop", s.p_early_stop},
           {"mean_phase1_total", s.mean_phase1_total},
           {"mean_phase1_backfill", s.mean_phase1_backfill},
           {"doses", s.doses}};
}

inline json covariate_value_json(const CovariateValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return std::get<std::string>(v);
}

/// A record given as {"name": value, ...}; numbers for continuous and binary
/// variables, labels for categorical ones.
inline RawRecord record_from_json(const CovariateSchema& schema, const json& j) {
  require(j.is_object(), ErrorCode::SchemaMismatch, "covariates must be an object");
  require(j.size() == schema.size(), ErrorCode::SchemaMismatch,
          "covariates must name exactly the schema variables");
  RawRecord r;
  for (const auto& var : schema.variables()) {
    require(j.contains(var.name), ErrorCode::SchemaMismatch, "missing covariate '" + var.name + "'");
    const auto& v = j.at(var.name);
    if (var.kind == VariableKind::Categorical) {
      require(v.is_string(), ErrorCode::SchemaMismatch, "'" + var.name + "' expects a level label");
      r.values.emplace_back(v.get<std::string>());
    } else if (v.is_boolean()) {
      r.values.emplace_back(v.get<bool>() ? 1.0 : 0.0);
    } else {
      require(v.is_number(), ErrorCode::SchemaMismatch, "'" + var.name + "' expects a number");
      r.values.emplace_back(v.get<double>());
    }
  }
  return r;
}

inline json record_to_json(const CovariateSchema& schema, const RawRecord& r) {
  json j = json::object();
  for (std::size_t i = 0; i < schema.size(); ++i)
    j[schema.variables()[i].name] = covariate_value_json(r.values.at(i));
  return j;
}

inline json schema_to_json(const CovariateSchema& s) {
  json vars = json::array();
  for (const auto& v : s.variables()) {
    json vj{{"name", v.name}};
    switch (v.kind) {
      case VariableKind::Continuous: vj["kind"] = "continuous"; break;
      case VariableKind::Binary: vj["kind"] = "binary"; break;
      case VariableKind::Categorical:
        vj["kind"] = "categorical";
        vj["levels"] = v.levels;
        break;
    }
    vars.push_back(std::move(vj));
  }
  return vars;
}

inline CovariateSchema schema_from_json(const json& j) {
  require(j.is_array(), ErrorCode::SchemaMismatch, "schema must be a list of variables");
  std::vector<Variable> vars;
  for (const auto& vj : j) {
    const auto name = vj.at("name").get<std::string>();
    const auto kind = vj.at("kind").get<std::string>();
    if (kind == "continuous") vars.push_back(Variable::continuous(name));
    else if (kind == "binary") vars.push_back(Variable::binary(name));
    else if (kind == "categorical")
      vars.push_back(Variable::categorical(name, vj.at("levels").get<std::vector<std::string>>()));
    else fail(ErrorCode::SchemaMismatch, "unknown variable kind '" + kind + "'");
  }
  return CovariateSchema(std::move(vars));
}

}  // namespace seamless
