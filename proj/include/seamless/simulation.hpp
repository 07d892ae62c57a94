#pragma once

// Monte Carlo engine for the seamless Phase I/II design: virtual patients,
// Phase I dose finding with backfill, a randomized two-arm Phase II, and the
// borrowing versus no-borrowing operating characteristics.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "seamless/analysis.hpp"
#include "seamless/covariates.hpp"
#include "seamless/dose_finding.hpp"
#include "seamless/mmd.hpp"
#include "seamless/posterior.hpp"
#include "seamless/random.hpp"

namespace seamless {

/// Baseline covariate distribution: age ~ N(mean, sd^2), Bernoulli sex and
/// ECOG, categorical stage over (IIA, III, IV).
struct CovariateCase {
  double age_mean = 56.8;
  double age_sd = 9.95;
  double p_woman = 0.56;
  double p_ecog1 = 0.68;
  double p_stage_iii = 0.08;
  double p_stage_iv = 0.88;

  std::array<double, 3> stage_probs() const {
    return {1.0 - (p_stage_iii + p_stage_iv), p_stage_iii, p_stage_iv};
  }
};

/// Phase I baseline distribution for cases 1-5.
inline CovariateCase phase1_case(int id) {
  switch (id) {
    case 1: return {56.8, 9.95, 0.56, 0.68, 0.08, 0.88};
    case 2: return {45.0, 10.0, 0.90, 0.50, 0.33, 0.33};
    case 3: return {70.0, 5.0, 0.20, 0.80, 0.33, 0.33};
    case 4: return {75.0, 10.0, 0.70, 0.50, 0.80, 0.10};
    case 5: return {80.0, 5.0, 0.20, 0.90, 0.40, 0.40};
    default: fail(ErrorCode::UnknownCase, "covariate case must be 1..5, got " + std::to_string(id));
  }
}

/// Phase II uses one population regardless of the Phase I case.
inline CovariateCase phase2_population() { return phase1_case(1); }

/// Toxicity rows of the four standard scenarios.
inline std::vector<double> toxicity_scenario(int id) {
  switch (id) {
    case 1: return {0.15, 0.30, 0.45, 0.60, 0.75};
    case 2: return {0.05, 0.15, 0.30, 0.45, 0.60};
    case 3: return {0.03, 0.05, 0.15, 0.30, 0.45};
    case 4: return {0.01, 0.03, 0.05, 0.15, 0.30};
    default: fail(ErrorCode::UnknownCase, "toxicity scenario must be 1..4, got " + std::to_string(id));
  }
}

/// p = logistic(intercept[dose] + coefficients . x) on the unstandardized
/// encoding of the oncology baseline schema.
struct EfficacyModel {
  std::vector<double> intercepts;
  Eigen::VectorXd coefficients;
};

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

template <class Derived>
double true_efficacy_prob(int dose, const Eigen::MatrixBase<Derived>& x, const EfficacyModel& m) {
  require(dose >= 1 && dose <= static_cast<int>(m.intercepts.size()), ErrorCode::DimensionMismatch,
          "dose outside the efficacy model");
  require(x.size() == m.coefficients.size(), ErrorCode::DimensionMismatch,
          "covariate vector does not match efficacy model");
  return logistic(m.intercepts[static_cast<std::size_t>(dose - 1)] + m.coefficients.dot(x));
}

/// age, woman, ecog1, stage=IIA, stage=III, stage=IV
inline Eigen::VectorXd default_efficacy_coefficients() {
  Eigen::VectorXd b(6);
  b << -0.03, 0.0, -0.4, 0.0, 0.0, -0.4;
  return b;
}

struct ScenarioConfig {
  std::string name;
  int scenario = 1;
  int covariate_case = 1;
  std::vector<double> toxicity_probs;
  EfficacyModel efficacy;
  std::vector<double> efficacy_targets;  // declared Phase II marginal rates
  std::optional<int> true_obd;
  DesignParams design;
  KernelConfig kernel;
  double weight_alpha = 0.05;
  BetaPrior prior;
  double accrual_rate = 3.0;  // patients per month
  double weibull_shape = 1.5;
  int phase2_n_per_arm = 20;
  double tau = 0.3;
  double cred_alpha = 0.05;
  int replicates = 1000;
  std::uint64_t seed = 1;

  void validate() const {
    design.validate();
    auto bad = [](const std::string& m) { fail(ErrorCode::ConfigError, m); };
    if (toxicity_probs.size() != static_cast<std::size_t>(design.n_doses))
      bad("toxicity_probs must have one entry per dose");
    for (std::size_t i = 0; i < toxicity_probs.size(); ++i) {
      if (!(toxicity_probs[i] > 0.0 && toxicity_probs[i] < 1.0))
        bad("toxicity_probs must lie in (0,1)");
      if (i > 0 && toxicity_probs[i] < toxicity_probs[i - 1])
        bad("toxicity_probs must be nondecreasing in dose");
    }
    if (efficacy.intercepts.size() != toxicity_probs.size())
      bad("efficacy intercepts must have one entry per dose");
    if (efficacy.coefficients.size() != 6)
      bad("efficacy coefficients must have 6 entries (age, woman, ecog1, IIA, III, IV)");
    if (!efficacy_targets.empty() && efficacy_targets.size() != toxicity_probs.size())
      bad("efficacy_targets must have one entry per dose");
    if (true_obd && (*true_obd < 1 || *true_obd > design.n_doses)) bad("true_obd out of range");
    phase1_case(covariate_case);
    if (!(accrual_rate > 0)) bad("accrual_rate must be positive");
    if (!(weibull_shape > 0)) bad("weibull_shape must be positive");
    if (phase2_n_per_arm < 1) bad("phase2_n_per_arm must be >= 1");
    if (!(tau > 0 && tau < 1)) bad("tau must lie in (0,1)");
    if (!(cred_alpha > 0 && cred_alpha < 1)) bad("cred_alpha must lie in (0,1)");
    if (!(weight_alpha > 0 && weight_alpha < 1)) bad("weight_alpha must lie in (0,1)");
    if (replicates < 1) bad("replicates must be >= 1");
  }
};

/// Dose maximizing the expected utility under independent toxicity and
/// efficacy; ties go to the higher dose.
inline int expected_obd(const std::vector<double>& tox, const std::vector<double>& eff,
                        const UtilityWeights& u) {
  require(tox.size() == eff.size() && !tox.empty(), ErrorCode::DimensionMismatch,
          "toxicity and efficacy vectors differ in length");
  int best = 1;
  double best_u = -1.0;
  for (std::size_t j = 0; j < tox.size(); ++j) {
    const double pt = tox[j], pe = eff[j];
    const double val = u.eff_notox * pe * (1 - pt) + u.eff_tox * pe * pt +
                       u.noeff_notox * (1 - pe) * (1 - pt) + u.noeff_tox * (1 - pe) * pt;
    if (val >= best_u) {
      best_u = val;
      best = static_cast<int>(j) + 1;
    }
  }
  return best;
}

inline int true_obd(const ScenarioConfig& cfg) {
  if (cfg.true_obd) return *cfg.true_obd;
  require(!cfg.efficacy_targets.empty(), ErrorCode::ConfigError,
          "true_obd or efficacy_targets required");
  return expected_obd(cfg.toxicity_probs, cfg.efficacy_targets, cfg.design.utility);
}

inline RawRecord gen_patient_covariates(const CovariateCase& c, RandomStream& rng) {
  static const std::array<const char*, 3> stages{"IIA", "III", "IV"};
  RawRecord r;
  r.values.emplace_back(rng.normal(c.age_mean, c.age_sd));
  r.values.emplace_back(rng.bernoulli(c.p_woman) ? 1.0 : 0.0);
  r.values.emplace_back(rng.bernoulli(c.p_ecog1) ? 1.0 : 0.0);
  const auto probs = c.stage_probs();
  r.values.emplace_back(std::string(stages[rng.categorical(probs)]));
  return r;
}

/// Phase 1 draws from the case distribution, phase 2 from the Phase II population.
inline RawRecord gen_patient_covariates(int case_id, int phase, RandomStream& rng) {
  const auto c = phase1_case(case_id);
  return gen_patient_covariates(phase == 1 ? c : phase2_population(), rng);
}

struct EventOutcome {
  bool occurred = false;
  double time = 0.0;  // months since treatment; meaningful only if occurred
};

/// Occurrence ~ Bernoulli(p); given occurrence, time = window * U^(1/shape),
/// a Weibull-shaped time conditioned on the assessment window.
inline EventOutcome gen_event(double p, double shape, double window, RandomStream& rng) {
  EventOutcome e;
  e.occurred = rng.bernoulli(p);
  if (e.occurred) e.time = window * std::pow(rng.uniform(), 1.0 / shape);
  return e;
}

inline std::pair<EventOutcome, EventOutcome> gen_outcomes(double p_tox, double p_eff, double shape,
                                                          double window, RandomStream& rng) {
  auto tox = gen_event(p_tox, shape, window, rng);
  auto eff = gen_event(p_eff, shape, window, rng);
  return {tox, eff};
}

/// Uniform(0, 2 / rate): mean 1 / rate.
inline double gen_interarrival(double rate, RandomStream& rng) { return rng.uniform(0.0, 2.0 / rate); }

/// Intercepts making the mean of logistic(intercept + b.x) over `draws`
/// Phase II patients equal each target (bisection on a fixed sample).
inline std::vector<double> calibrate_intercepts(const std::vector<double>& targets,
                                                const Eigen::VectorXd& coefficients,
                                                int draws, std::uint64_t seed) {
  const auto schema = oncology_baseline_schema();
  RandomStream rng(seed, 0);
  Eigen::VectorXd lin(draws);
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(schema.encoded_dim()));
  for (int i = 0; i < draws; ++i) {
    encode_record(schema, gen_patient_covariates(phase2_population(), rng), row);
    lin(i) = row.dot(coefficients);
  }
  std::vector<double> out;
  for (double t : targets) {
    double lo = -30.0, hi = 30.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double m = (lin.array() + mid).unaryExpr([](double v) { return logistic(v); }).mean();
      (m < t ? lo : hi) = mid;
    }
    out.push_back(0.5 * (lo + hi));
  }
  return out;
}

struct GeneratedPatient {
  RawRecord covariates;
  double arrival_time = 0.0;
  int assigned_dose = 0;
  EventOutcome tox_event;
  EventOutcome eff_event;
  bool backfill = false;
};

struct ArmResult {
  int dose = 0;
  ArmCounts counts;
  double mmd2 = 0.0;
  WeightEstimate weight;
  PosteriorSummary borrowing;
  PosteriorSummary no_borrowing;
};

struct ReplicateResult {
  std::uint64_t index = 0;
  std::vector<DoseState> phase1_doses;
  int phase1_total = 0;
  int phase1_backfill = 0;
  bool early_stop = false;
  bool insufficient_candidates = false;
  std::optional<Phase2Selection> selection;
  std::vector<ArmResult> arms;
  int true_obd = 0;
  bool obd_selected = false;

  bool flagged() const { return early_stop || insufficient_candidates; }
};

namespace detail {

inline const ArmResult* find_arm(const ReplicateResult& r, int dose) {
  for (const auto& a : r.arms)
    if (a.dose == dose) return &a;
  return nullptr;
}

}  // namespace detail

inline ReplicateResult run_replicate(const ScenarioConfig& cfg, RandomStream& rng,
                                     std::uint64_t index = 0) {
  const auto schema = oncology_baseline_schema();
  const auto& dp = cfg.design;
  const auto p1_case = phase1_case(cfg.covariate_case);
  const double window = dp.assessment_window;
  Eigen::RowVectorXd x(static_cast<Eigen::Index>(schema.encoded_dim()));

  auto make_patient = [&](int dose, double t, const CovariateCase& cc) {
    GeneratedPatient g;
    g.covariates = gen_patient_covariates(cc, rng);
    g.arrival_time = t;
    g.assigned_dose = dose;
    encode_record(schema, g.covariates, x);
    const double p_eff = true_efficacy_prob(dose, x, cfg.efficacy);
    const double p_tox = cfg.toxicity_probs[static_cast<std::size_t>(dose - 1)];
    std::tie(g.tox_event, g.eff_event) = gen_outcomes(p_tox, p_eff, cfg.weibull_shape, window, rng);
    return g;
  };

  ReplicateResult res;
  res.index = index;
  res.true_obd = true_obd(cfg);

  // Phase I
  std::vector<GeneratedPatient> phase1;
  TrialState st = start_trial(dp);
  double t = 0.0;
  while (st.phase == Phase::Escalation) {
    std::vector<Outcome> cohort;
    const int dose = st.current_dose;
    for (int k = 0; k < dp.cohort_size; ++k) {
      t += gen_interarrival(cfg.accrual_rate, rng);
      auto g = make_patient(dose, t, p1_case);
      cohort.push_back({g.eff_event.occurred, g.tox_event.occurred});
      phase1.push_back(std::move(g));
    }
    const double decision_time = t + window;
    for (int b = 0; b < dp.backfill_per_step; ++b) {
      const auto target = backfill_target(st, dp);
      if (!target) break;
      const double arrival = t + gen_interarrival(cfg.accrual_rate, rng);
      if (arrival >= decision_time) break;
      t = arrival;
      auto g = make_patient(*target, t, p1_case);
      g.backfill = true;
      st = backfill(std::move(st), {g.eff_event.occurred, g.tox_event.occurred}, dp);
      phase1.push_back(std::move(g));
    }
    st = step(std::move(st), cohort, dp);
    t = std::max(t, decision_time);
  }
  res.phase1_doses = st.doses;
  res.phase1_total = st.total_enrolled();
  res.phase1_backfill = static_cast<int>(st.backfill_assignments.size());

  if (st.phase == Phase::StoppedEarly) {
    res.early_stop = true;
    return res;
  }
  try {
    res.selection = select_phase2_doses(st.doses, dp);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InsufficientCandidates) throw;
    res.insufficient_candidates = true;
    return res;
  }
  res.obd_selected = res.selection->first == res.true_obd;

  // Phase II: permuted blocks of size 2 give exactly n per arm.
  const std::array<int, 2> arm_doses{res.selection->first, res.selection->second};
  std::array<std::vector<RawRecord>, 2> p2_cov;
  std::array<int, 2> p2_resp{0, 0};
  for (int block = 0; block < cfg.phase2_n_per_arm; ++block) {
    const bool swap = rng.bernoulli(0.5);
    for (int k = 0; k < 2; ++k) {
      const int arm = swap ? 1 - k : k;
      auto g = make_patient(arm_doses[static_cast<std::size_t>(arm)], 0.0, phase2_population());
      p2_resp[static_cast<std::size_t>(arm)] += g.eff_event.occurred ? 1 : 0;
      p2_cov[static_cast<std::size_t>(arm)].push_back(std::move(g.covariates));
    }
  }

  for (std::size_t a = 0; a < 2; ++a) {
    ArmResult ar;
    ar.dose = arm_doses[a];
    std::vector<RawRecord> p1_cov;
    for (const auto& g : phase1)
      if (g.assigned_dose == ar.dose) p1_cov.push_back(g.covariates);
    const auto& ds = st.dose(ar.dose);
    ar.counts = {ds.n_treated(), ds.n_eff(), cfg.phase2_n_per_arm, p2_resp[a]};
    const auto sim = arm_similarity(encode(schema, p1_cov), encode(schema, p2_cov[a]), cfg.kernel,
                                    cfg.weight_alpha);
    ar.mmd2 = sim.result ? sim.result->mmd.mmd2 : 0.0;
    ar.weight = sim.weight;
    ar.borrowing =
        summarize_posterior(posterior(ar.counts, ar.weight.w, cfg.prior), cfg.tau, cfg.cred_alpha);
    ar.no_borrowing =
        summarize_posterior(posterior(ar.counts, 0.0, cfg.prior), cfg.tau, cfg.cred_alpha);
    res.arms.push_back(std::move(ar));
  }
  return res;
}

/// Replicate `index` of a batch, reproducible in isolation.
inline ReplicateResult run_replicate(const ScenarioConfig& cfg, std::uint64_t index) {
  RandomStream rng(cfg.seed, index);
  return run_replicate(cfg, rng, index);
}

inline std::vector<ReplicateResult> run_simulation(const ScenarioConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(cfg.replicates);
  std::vector<ReplicateResult> out(n);
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += threads) out[i] = run_replicate(cfg, i);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

struct DoseSummary {
  int dose = 0;
  double tox_prob = 0.0;
  int selected = 0;         // replicates with this dose as a Phase II arm
  int exceed_borrowing = 0;
  int exceed_no_borrowing = 0;
  int borrowing_only = 0;   // discordant pairs
  int no_borrowing_only = 0;
  double p_exceed_borrowing = 0.0;  // over valid replicates
  double p_exceed_no_borrowing = 0.0;
  double mean_phase1_patients = 0.0;  // over all replicates
  double mean_phase1_efficacy = 0.0;  // over replicates treating this dose
  double mean_phase2_efficacy = 0.0;  // over replicates selecting this dose
  double mean_weight = 0.0;           // over replicates selecting this dose
};

struct SimulationSummary {
  int replicates = 0;
  int valid = 0;
  int early_stops = 0;
  int insufficient_candidates = 0;
  int true_obd = 0;
  int obd_selected = 0;
  double p_obd_selected = 0.0;  // over all replicates
  double p_early_stop = 0.0;
  double mean_phase1_total = 0.0;
  double mean_phase1_backfill = 0.0;
  std::vector<DoseSummary> doses;

  const DoseSummary& dose(int level) const { return doses.at(static_cast<std::size_t>(level - 1)); }
};

/// Aggregates in replicate order, so sums are reproducible bit for bit.
inline SimulationSummary summarize(const std::vector<ReplicateResult>& results,
                                   const ScenarioConfig& cfg) {
  SimulationSummary s;
  s.replicates = static_cast<int>(results.size());
  s.true_obd = true_obd(cfg);
  const int J = cfg.design.n_doses;
  s.doses.resize(static_cast<std::size_t>(J));
  std::vector<int> treated(static_cast<std::size_t>(J), 0);
  for (int j = 1; j <= J; ++j) {
    s.doses[static_cast<std::size_t>(j - 1)].dose = j;
    s.doses[static_cast<std::size_t>(j - 1)].tox_prob = cfg.toxicity_probs[static_cast<std::size_t>(j - 1)];
  }

  for (const auto& r : results) {
    s.early_stops += r.early_stop ? 1 : 0;
    s.insufficient_candidates += r.insufficient_candidates ? 1 : 0;
    s.obd_selected += r.obd_selected ? 1 : 0;
    s.mean_phase1_total += r.phase1_total;
    s.mean_phase1_backfill += r.phase1_backfill;
    for (const auto& d : r.phase1_doses) {
      auto& ds = s.doses[static_cast<std::size_t>(d.level - 1)];
      ds.mean_phase1_patients += d.n_treated();
      if (d.n_treated() > 0) {
        ds.mean_phase1_efficacy += double(d.n_eff()) / d.n_treated();
        treated[static_cast<std::size_t>(d.level - 1)]++;
      }
    }
    if (r.flagged()) continue;
    s.valid++;
    for (const auto& a : r.arms) {
      auto& ds = s.doses[static_cast<std::size_t>(a.dose - 1)];
      ds.selected++;
      ds.exceed_borrowing += a.borrowing.exceeds ? 1 : 0;
      ds.exceed_no_borrowing += a.no_borrowing.exceeds ? 1 : 0;
      ds.borrowing_only += (a.borrowing.exceeds && !a.no_borrowing.exceeds) ? 1 : 0;
      ds.no_borrowing_only += (!a.borrowing.exceeds && a.no_borrowing.exceeds) ? 1 : 0;
      ds.mean_weight += a.weight.w;
      ds.mean_phase2_efficacy += double(a.counts.n2_e) / a.counts.n2;
    }
  }
  require(s.valid >= 1, ErrorCode::NoValidReplicates, "every replicate was flagged");

  const double n = s.replicates;
  s.p_obd_selected = s.obd_selected / n;
  s.p_early_stop = s.early_stops / n;
  s.mean_phase1_total /= n;
  s.mean_phase1_backfill /= n;
  for (auto& ds : s.doses) {
    ds.p_exceed_borrowing = double(ds.exceed_borrowing) / s.valid;
    ds.p_exceed_no_borrowing = double(ds.exceed_no_borrowing) / s.valid;
    ds.mean_phase1_patients /= n;
    const int tr = treated[static_cast<std::size_t>(ds.dose - 1)];
    ds.mean_phase1_efficacy = tr > 0 ? ds.mean_phase1_efficacy / tr : 0.0;
    if (ds.selected > 0) {
      ds.mean_weight /= ds.selected;
      ds.mean_phase2_efficacy /= ds.selected;
    }
  }
  return s;
}

inline std::vector<double> default_efficacy_targets(int scenario) {
  // OBD-1 at 0.35, OBD at 0.50, a mild plateau above the OBD.
  switch (scenario) {
    case 1: return {0.35, 0.50, 0.55, 0.60, 0.60};
    case 2: return {0.20, 0.35, 0.50, 0.55, 0.60};
    case 3: return {0.10, 0.20, 0.35, 0.50, 0.55};
    case 4: return {0.05, 0.10, 0.20, 0.35, 0.50};
    default: fail(ErrorCode::UnknownCase, "toxicity scenario must be 1..4");
  }
}

/// Output of calibrate_intercepts(targets, default coefficients, 400000,
/// seed 20240601), frozen so configs do not depend on a calibration run.
inline std::vector<double> default_efficacy_intercepts(int scenario) {
  switch (scenario) {
    case 1: return {1.689189, 2.328887, 2.536340, 2.747884, 2.747884};
    case 2: return {0.900525, 1.689189, 2.328887, 2.536340, 2.747884};
    case 3: return {0.074672, 0.900525, 1.689189, 2.328887, 2.536340};
    case 4: return {-0.680272, 0.074672, 0.900525, 1.689189, 2.328887};
    default: fail(ErrorCode::UnknownCase, "toxicity scenario must be 1..4");
  }
}

/// Built-in scenario: toxicity row, Phase I covariate case, and the
/// calibrated logistic efficacy model.
inline ScenarioConfig default_scenario(int scenario, int covariate_case) {
  ScenarioConfig c;
  c.name = "scenario" + std::to_string(scenario) + "_case" + std::to_string(covariate_case);
  c.scenario = scenario;
  c.covariate_case = covariate_case;
  c.toxicity_probs = toxicity_scenario(scenario);
  c.efficacy_targets = default_efficacy_targets(scenario);
  c.efficacy.coefficients = default_efficacy_coefficients();
  c.efficacy.intercepts = default_efficacy_intercepts(scenario);
  phase1_case(covariate_case);
  return c;
}

}  // namespace seamless
