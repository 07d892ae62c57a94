#pragma once

// Phase I dose-finding state machine using toxicity and efficacy interval
// boundaries, backfill at lower active doses, posterior-probability
// elimination and utility-based selection of the two Phase II doses.
//
// Toxicity boundaries default to the BOIN interval boundaries for a target
// phi with alternatives 0.6 phi and 1.4 phi. The efficacy boundary defaults
// to the target efficacy rate. All of them are plain configuration.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "seamless/error.hpp"
#include "seamless/posterior.hpp"

namespace seamless {

/// Boundary between the target rate `phi` and an alternative `alt`: the rate
/// at which the binomial likelihoods under both hypotheses are equal.
inline double boin_boundary(double phi, double alt) {
  const double lo = std::min(phi, alt), hi = std::max(phi, alt);
  return std::log((1 - lo) / (1 - hi)) / std::log(hi * (1 - lo) / (lo * (1 - hi)));
}

struct Outcome {
  bool eff = false;
  bool tox = false;

  bool operator==(const Outcome&) const = default;
};

struct UtilityWeights {
  double eff_notox = 100.0;
  double eff_tox = 60.0;
  double noeff_notox = 40.0;
  double noeff_tox = 0.0;
};

struct DesignParams {
  int n_doses = 5;
  int cohort_size = 3;
  int max_cohorts = 10;
  int start_dose = 1;
  double phi_t = 0.30;
  double delta_e = 0.25;
  double lambda_e = boin_boundary(0.30, 0.6 * 0.30);
  double lambda_d = boin_boundary(0.30, 1.4 * 0.30);
  double eta_e = 0.25;
  double stop_tox_prob = 0.95;
  double stop_fut_prob = 0.90;
  double elim_prior_a = 1.0;
  double elim_prior_b = 1.0;
  int min_n_for_elimination = 3;
  UtilityWeights utility;
  double assessment_window = 1.0;  // months
  bool backfill_enabled = true;
  int backfill_cap = 3;       // backfill patients per dose
  int backfill_per_step = 1;  // backfill patients per cohort decision

  void validate() const {
    auto bad = [](const std::string& m) { fail(ErrorCode::InvalidParams, m); };
    if (n_doses < 1) bad("n_doses must be >= 1");
    if (cohort_size < 1) bad("cohort_size must be >= 1");
    if (max_cohorts < 1) bad("max_cohorts must be >= 1");
    if (start_dose < 1 || start_dose > n_doses) bad("start_dose out of range");
    if (!(0 < lambda_e && lambda_e < phi_t && phi_t < lambda_d && lambda_d < 1))
      bad("toxicity boundaries must satisfy 0 < lambda_e < phi_t < lambda_d < 1");
    if (!(0 < delta_e && delta_e < 1)) bad("delta_e must lie in (0,1)");
    if (!(0 < eta_e && eta_e < 1)) bad("eta_e must lie in (0,1)");
    if (!(0 < stop_tox_prob && stop_tox_prob < 1) || !(0 < stop_fut_prob && stop_fut_prob < 1))
      bad("stopping thresholds must lie in (0,1)");
    if (!(elim_prior_a > 0 && elim_prior_b > 0)) bad("elimination prior must be positive");
    const auto& u = utility;
    if (!(u.eff_notox >= u.eff_tox && u.eff_tox >= u.noeff_notox && u.noeff_notox >= u.noeff_tox))
      bad("utility weights must be non-increasing");
    if (backfill_cap < 0 || backfill_per_step < 0) bad("backfill limits must be >= 0");
    if (!(assessment_window > 0)) bad("assessment_window must be positive");
  }
};

struct DoseState {
  int level = 1;  // 1-based
  int eff_notox = 0;
  int eff_tox = 0;
  int noeff_notox = 0;
  int noeff_tox = 0;
  int backfill_count = 0;
  bool eliminated_toxicity = false;
  bool eliminated_futility = false;

  int n_treated() const { return eff_notox + eff_tox + noeff_notox + noeff_tox; }
  int n_tox() const { return eff_tox + noeff_tox; }
  int n_eff() const { return eff_notox + eff_tox; }
  bool eliminated() const { return eliminated_toxicity || eliminated_futility; }

  void record(Outcome o) {
    if (o.eff) (o.tox ? eff_tox : eff_notox)++;
    else (o.tox ? noeff_tox : noeff_notox)++;
  }

  bool operator==(const DoseState&) const = default;
};

enum class Decision { Escalate, Stay, DeEscalate };
enum class Phase { Escalation, Completed, StoppedEarly };

inline const char* to_string(Decision d) {
  switch (d) {
    case Decision::Escalate: return "Escalate";
    case Decision::Stay: return "Stay";
    case Decision::DeEscalate: return "DeEscalate";
  }
  return "?";
}

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::Escalation: return "Escalation";
    case Phase::Completed: return "Completed";
    case Phase::StoppedEarly: return "StoppedEarly";
  }
  return "?";
}

struct CohortEvent {
  int cohort_id = 0;  // 1-based
  int dose = 0;
  std::vector<int> patient_ids;
  std::vector<Outcome> outcomes;
  double lambda_e = 0, lambda_d = 0, eta_e = 0;
  Decision decision = Decision::Stay;
  bool forced_by_elimination = false;
  std::vector<int> eliminated_toxicity;  // newly eliminated this step
  std::vector<int> eliminated_futility;
  int next_dose = 0;
  Phase phase_after = Phase::Escalation;

  bool operator==(const CohortEvent&) const = default;
};

struct BackfillEvent {
  int patient_id = 0;
  int dose = 0;
  Outcome outcome;

  bool operator==(const BackfillEvent&) const = default;
};

using TrialEvent = std::variant<CohortEvent, BackfillEvent>;

struct BackfillAssignment {
  int dose = 0;
  int patient_id = 0;

  bool operator==(const BackfillAssignment&) const = default;
};

struct TrialState {
  Phase phase = Phase::Escalation;
  int current_dose = 1;
  std::vector<DoseState> doses;
  int cohorts_enrolled = 0;
  int next_patient_id = 1;
  std::vector<BackfillAssignment> backfill_assignments;
  std::vector<TrialEvent> events;

  const DoseState& dose(int level) const { return doses.at(static_cast<std::size_t>(level - 1)); }
  DoseState& dose(int level) { return doses.at(static_cast<std::size_t>(level - 1)); }

  int total_enrolled() const {
    int n = 0;
    for (const auto& d : doses) n += d.n_treated();
    return n;
  }

  bool operator==(const TrialState&) const = default;
};

inline TrialState start_trial(const DesignParams& p) {
  p.validate();
  TrialState s;
  s.current_dose = p.start_dose;
  for (int j = 1; j <= p.n_doses; ++j) {
    DoseState d;
    d.level = j;
    s.doses.push_back(d);
  }
  return s;
}

/// Interval rule at one dose. `higher_admissible` says whether a higher,
/// non-eliminated dose exists; without one an escalation becomes Stay.
inline Decision escalation_decision(const DoseState& ds, const DesignParams& p,
                                    bool higher_admissible = true) {
  require(ds.n_treated() >= 1, ErrorCode::EmptyDose, "no patients treated at this dose");
  const double n = ds.n_treated();
  const double pt = ds.n_tox() / n;
  const double pe = ds.n_eff() / n;
  if (pt >= p.lambda_d) return Decision::DeEscalate;
  if (pt <= p.lambda_e && pe <= p.eta_e && higher_admissible) return Decision::Escalate;
  return Decision::Stay;
}

struct EliminationResult {
  bool eliminate_tox = false;
  bool eliminate_fut = false;
};

inline double prob_excess_toxicity(const DoseState& ds, const DesignParams& p) {
  return 1.0 - beta_cdf(p.elim_prior_a + ds.n_tox(),
                        p.elim_prior_b + ds.n_treated() - ds.n_tox(), p.phi_t);
}

inline double prob_insufficient_efficacy(const DoseState& ds, const DesignParams& p) {
  return beta_cdf(p.elim_prior_a + ds.n_eff(), p.elim_prior_b + ds.n_treated() - ds.n_eff(),
                  p.delta_e);
}

inline EliminationResult elimination_check(const DoseState& ds, const DesignParams& p) {
  if (ds.n_treated() < std::max(1, p.min_n_for_elimination)) return {};
  return {prob_excess_toxicity(ds, p) > p.stop_tox_prob,
          prob_insufficient_efficacy(ds, p) > p.stop_fut_prob};
}

/// Mean per-patient utility over the four (efficacy, toxicity) cells.
inline double utility_score(const DoseState& ds, const DesignParams& p) {
  require(ds.n_treated() >= 1, ErrorCode::EmptyDose, "no patients treated at this dose");
  const auto& u = p.utility;
  return (u.eff_notox * ds.eff_notox + u.eff_tox * ds.eff_tox +
          u.noeff_notox * ds.noeff_notox + u.noeff_tox * ds.noeff_tox) /
         ds.n_treated();
}

struct Phase2Selection {
  int first = 0;   // highest utility
  int second = 0;  // second-highest utility

  bool operator==(const Phase2Selection&) const = default;
};

inline bool admissible(const DoseState& d) { return !d.eliminated() && d.n_treated() >= 1; }

/// Two highest-utility admissible doses; ties go to the higher dose level.
inline Phase2Selection select_phase2_doses(const std::vector<DoseState>& states,
                                           const DesignParams& p) {
  std::vector<std::pair<double, int>> ranked;
  for (const auto& d : states)
    if (admissible(d)) ranked.emplace_back(utility_score(d, p), d.level);
  require(ranked.size() >= 2, ErrorCode::InsufficientCandidates,
          "fewer than two admissible doses for Phase II");
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second > b.second;
  });
  return {ranked[0].second, ranked[1].second};
}

namespace detail {

inline std::optional<int> lowest_admissible_above(const TrialState& s, int level) {
  for (int j = level + 1; j <= static_cast<int>(s.doses.size()); ++j)
    if (!s.dose(j).eliminated()) return j;
  return std::nullopt;
}

inline std::optional<int> highest_admissible_below(const TrialState& s, int level) {
  for (int j = level - 1; j >= 1; --j)
    if (!s.dose(j).eliminated()) return j;
  return std::nullopt;
}

inline bool all_eliminated(const TrialState& s) {
  return std::all_of(s.doses.begin(), s.doses.end(),
                     [](const DoseState& d) { return d.eliminated(); });
}

}  // namespace detail

/// Dose that the next backfill patient would join: the highest dose below the
/// current one with at least one response, no elimination and spare capacity.
inline std::optional<int> backfill_target(const TrialState& s, const DesignParams& p) {
  if (!p.backfill_enabled || s.phase != Phase::Escalation) return std::nullopt;
  for (int j = s.current_dose - 1; j >= 1; --j) {
    const auto& d = s.dose(j);
    if (!d.eliminated() && d.n_eff() >= 1 && d.backfill_count < p.backfill_cap) return j;
  }
  return std::nullopt;
}

inline TrialState backfill(TrialState s, Outcome o, const DesignParams& p) {
  require(s.phase == Phase::Escalation, ErrorCode::PhaseViolation,
          "backfill is only possible during escalation");
  const auto target = backfill_target(s, p);
  require(target.has_value(), ErrorCode::PhaseViolation, "no dose is open for backfill");
  auto& d = s.dose(*target);
  d.record(o);
  d.backfill_count++;
  const int id = s.next_patient_id++;
  s.backfill_assignments.push_back({*target, id});
  s.events.emplace_back(BackfillEvent{id, *target, o});
  return s;
}

/// Records one cohort at the current dose, applies eliminations and moves to
/// the next dose.
inline TrialState step(TrialState s, const std::vector<Outcome>& outcomes,
                       const DesignParams& p) {
  require(s.phase == Phase::Escalation, ErrorCode::PhaseViolation,
          std::string("trial is ") + to_string(s.phase));
  require(static_cast<int>(outcomes.size()) == p.cohort_size, ErrorCode::ArityMismatch,
          "cohort has " + std::to_string(outcomes.size()) + " outcomes, expected " +
              std::to_string(p.cohort_size));

  CohortEvent ev;
  ev.cohort_id = s.cohorts_enrolled + 1;
  ev.dose = s.current_dose;
  ev.outcomes = outcomes;
  ev.lambda_e = p.lambda_e;
  ev.lambda_d = p.lambda_d;
  ev.eta_e = p.eta_e;
  auto& cur = s.dose(s.current_dose);
  for (const auto& o : outcomes) {
    cur.record(o);
    ev.patient_ids.push_back(s.next_patient_id++);
  }
  s.cohorts_enrolled++;

  for (auto& d : s.doses) {
    if (d.eliminated_toxicity) continue;
    const auto e = elimination_check(d, p);
    if (e.eliminate_tox) {
      for (auto& h : s.doses)
        if (h.level >= d.level && !h.eliminated_toxicity) {
          h.eliminated_toxicity = true;
          ev.eliminated_toxicity.push_back(h.level);
        }
    }
    if (e.eliminate_fut && !d.eliminated_futility) {
      d.eliminated_futility = true;
      ev.eliminated_futility.push_back(d.level);
    }
  }

  const auto& here = s.dose(s.current_dose);
  const auto up = detail::lowest_admissible_above(s, s.current_dose);
  const auto down = detail::highest_admissible_below(s, s.current_dose);
  std::optional<int> next = s.current_dose;

  if (here.eliminated()) {
    ev.forced_by_elimination = true;
    const bool too_toxic =
        here.eliminated_toxicity || here.n_tox() >= p.lambda_d * here.n_treated();
    if (!too_toxic && up) {
      ev.decision = Decision::Escalate;
      next = up;
    } else if (!too_toxic && !here.eliminated_toxicity &&
               here.n_tox() <= p.lambda_e * here.n_treated()) {
      // futile, safe and nothing higher: dropping down would break coherence
      // and lower doses are not expected to do better, so stop
      ev.decision = Decision::Stay;
      next = std::nullopt;
    } else {
      ev.decision = Decision::DeEscalate;
      next = down;
    }
  } else {
    ev.decision = escalation_decision(here, p, up.has_value());
    if (ev.decision == Decision::Escalate) next = up;
    if (ev.decision == Decision::DeEscalate) next = down ? down : s.current_dose;
  }

  if (!next || detail::all_eliminated(s)) {
    s.phase = Phase::StoppedEarly;
  } else {
    s.current_dose = *next;
    if (s.cohorts_enrolled >= p.max_cohorts) s.phase = Phase::Completed;
  }
  ev.next_dose = s.current_dose;
  ev.phase_after = s.phase;
  s.events.emplace_back(std::move(ev));
  return s;
}

/// Rebuilds a trial from its event log, re-deriving every decision. Throws
/// if a recorded decision disagrees with the recomputed one.
inline TrialState replay(const DesignParams& p, const std::vector<TrialEvent>& log) {
  TrialState s = start_trial(p);
  for (const auto& e : log) {
    if (const auto* c = std::get_if<CohortEvent>(&e)) {
      require(c->dose == s.current_dose, ErrorCode::PhaseViolation,
              "event log dose does not match replayed state");
      s = step(std::move(s), c->outcomes, p);
      require(std::get<CohortEvent>(s.events.back()) == *c, ErrorCode::PhaseViolation,
              "event log decision " + std::to_string(c->cohort_id) + " does not replay");
    } else {
      const auto& b = std::get<BackfillEvent>(e);
      s = backfill(std::move(s), b.outcome, p);
      require(std::get<BackfillEvent>(s.events.back()) == b, ErrorCode::PhaseViolation,
              "event log backfill does not replay");
    }
  }
  return s;
}

}  // namespace seamless
