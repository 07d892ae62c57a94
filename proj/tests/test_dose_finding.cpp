#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "seamless/dose_finding.hpp"

using namespace seamless;

namespace {

const Outcome kNone{false, false}, kEff{true, false}, kTox{false, true}, kBoth{true, true};

DoseState table(int eff_notox, int eff_tox, int noeff_notox, int noeff_tox, int level = 1) {
  DoseState d;
  d.level = level;
  d.eff_notox = eff_notox;
  d.eff_tox = eff_tox;
  d.noeff_notox = noeff_notox;
  d.noeff_tox = noeff_tox;
  return d;
}

// Boundary expressions written out the textbook way, from the likelihood
// ratio of the target against each alternative.
double boin_lambda_e(double phi, double phi1) {
  return std::log((1 - phi1) / (1 - phi)) / std::log(phi * (1 - phi1) / (phi1 * (1 - phi)));
}
double boin_lambda_d(double phi, double phi2) {
  return std::log((1 - phi) / (1 - phi2)) / std::log(phi2 * (1 - phi) / (phi * (1 - phi2)));
}

}  // namespace

TEST(Boundaries, DefaultsMatchBoinFormula) {
  DesignParams p;
  EXPECT_NEAR(p.lambda_e, boin_lambda_e(0.30, 0.18), 1e-15);
  EXPECT_NEAR(p.lambda_d, boin_lambda_d(0.30, 0.42), 1e-15);
  // usually quoted to three places, truncated
  EXPECT_NEAR(p.lambda_e, 0.236, 1e-3);
  EXPECT_NEAR(p.lambda_d, 0.358, 1e-3);
  EXPECT_EQ(p.eta_e, 0.25);
  EXPECT_EQ(p.delta_e, 0.25);
  EXPECT_NO_THROW(p.validate());
  p.lambda_e = 0.31;
  EXPECT_THROW(p.validate(), Error);
}

TEST(Escalation, WorkedExamples) {
  DesignParams p;
  EXPECT_EQ(escalation_decision(table(0, 1, 1, 1), p),
            Decision::DeEscalate);
  EXPECT_EQ(escalation_decision(table(0, 0, 3, 0), p), Decision::Escalate);
  EXPECT_EQ(escalation_decision(table(2, 0, 0, 1), p),
            Decision::Stay);
  // efficacy above eta keeps the trial at a safe dose
  EXPECT_EQ(escalation_decision(table(2, 0, 1, 0), p), Decision::Stay);
  // nothing admissible above
  EXPECT_EQ(escalation_decision(table(0, 0, 3, 0), p, false), Decision::Stay);
  EXPECT_THROW(escalation_decision(DoseState{}, p), Error);
}

TEST(Elimination, ClosedFormExamples) {
  DesignParams p;
  const auto three_tox = table(0, 0, 0, 3);
  EXPECT_NEAR(prob_excess_toxicity(three_tox, p), 1 - std::pow(0.3, 4), 1e-12);
  EXPECT_NEAR(prob_excess_toxicity(three_tox, p), 0.9919, 1e-4);
  EXPECT_TRUE(elimination_check(three_tox, p).eliminate_tox);

  const auto no_tox = table(3, 0, 0, 0);
  EXPECT_NEAR(prob_excess_toxicity(no_tox, p), std::pow(0.7, 4), 1e-12);
  EXPECT_NEAR(prob_excess_toxicity(no_tox, p), 0.2401, 1e-12);
  EXPECT_FALSE(elimination_check(no_tox, p).eliminate_tox);
  EXPECT_FALSE(elimination_check(no_tox, p).eliminate_fut);

  // Pr(p_E < 0.25 | Beta(1, 4)) = 1 - 0.75^4 = 0.684: not futile yet
  const auto no_eff = table(0, 0, 3, 0);
  EXPECT_NEAR(prob_insufficient_efficacy(no_eff, p), 1 - std::pow(0.75, 4), 1e-12);
  EXPECT_FALSE(elimination_check(no_eff, p).eliminate_fut);
  // 0/9: 1 - 0.75^10 = 0.944 > 0.90
  EXPECT_TRUE(elimination_check(table(0, 0, 9, 0), p).eliminate_fut);

  const auto none = elimination_check(DoseState{}, p);
  EXPECT_FALSE(none.eliminate_tox);
  EXPECT_FALSE(none.eliminate_fut);
  // two patients are below the guard even when both are toxic
  EXPECT_FALSE(elimination_check(table(0, 0, 0, 2), p).eliminate_tox);
}

TEST(Utility, Scores) {
  DesignParams p;
  EXPECT_DOUBLE_EQ(utility_score(table(4, 0, 0, 0), p), 100.0);
  EXPECT_NEAR(utility_score(table(1, 1, 1, 0), p), 66.667, 1e-3);
  EXPECT_DOUBLE_EQ(utility_score(table(0, 0, 0, 3), p), 0.0);
  EXPECT_THROW(utility_score(DoseState{}, p), Error);
}

TEST(Selection, TieGoesToHigherDose) {
  DesignParams p;
  // utilities 40, 70, 70, 20 and dose 5 eliminated
  std::vector<DoseState> s{table(0, 0, 1, 0, 1), table(1, 0, 1, 0, 2), table(1, 0, 1, 0, 3),
                           table(0, 0, 1, 1, 4), table(3, 0, 0, 0, 5)};
  s[4].eliminated_futility = true;
  EXPECT_DOUBLE_EQ(utility_score(s[0], p), 40.0);
  EXPECT_DOUBLE_EQ(utility_score(s[3], p), 20.0);
  EXPECT_EQ(select_phase2_doses(s, p), (Phase2Selection{3, 2}));
}

TEST(Selection, InsufficientCandidates) {
  DesignParams p;
  std::vector<DoseState> s{table(1, 0, 2, 0, 1), table(0, 0, 0, 0, 2), table(0, 0, 0, 3, 3)};
  s[2].eliminated_toxicity = true;
  try {
    select_phase2_doses(s, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientCandidates);
  }
}

TEST(Selection, RanksByUtility) {
  DesignParams p;
  // 10, 30, 80, 50 from mixes of the four cells (n = 10 each)
  const std::vector<DoseState> s{table(1, 0, 0, 9, 1), table(3, 0, 0, 7, 2), table(8, 0, 0, 2, 3), table(5, 0, 0, 5, 4)};
  const std::vector<double> want{10, 30, 80, 50};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(utility_score(s[i], p), want[i]);
  EXPECT_EQ(select_phase2_doses(s, p), (Phase2Selection{3, 4}));
}

TEST(Step, FreshTrialEscalates) {
  DesignParams p;
  auto s = step(start_trial(p), {kNone, kNone, kNone}, p);
  EXPECT_EQ(s.current_dose, 2);
  EXPECT_EQ(s.phase, Phase::Escalation);
  const auto& ev = std::get<CohortEvent>(s.events.back());
  EXPECT_EQ(ev.decision, Decision::Escalate);
  EXPECT_EQ(ev.patient_ids, (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(ev.lambda_d, p.lambda_d);
}

TEST(Step, AllToxicStopsEarly) {
  DesignParams p;
  auto s = step(start_trial(p), {kTox, kTox, kTox}, p);
  EXPECT_EQ(s.phase, Phase::StoppedEarly);
  for (const auto& d : s.doses) EXPECT_TRUE(d.eliminated_toxicity);
  EXPECT_THROW(step(s, {kNone, kNone, kNone}, p), Error);
  try {
    step(s, {kNone, kNone, kNone}, p);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PhaseViolation);
  }
}

TEST(Step, TenthCohortCompletes) {
  DesignParams p;
  auto s = start_trial(p);
  for (int c = 0; c < 10; ++c) {
    ASSERT_EQ(s.phase, Phase::Escalation) << c;
    s = step(s, {kEff, kNone, kEff}, p);
  }
  EXPECT_EQ(s.phase, Phase::Completed);
  EXPECT_EQ(s.cohorts_enrolled, 10);
  EXPECT_EQ(s.total_enrolled(), 30);
}

TEST(Step, ArityChecked) {
  DesignParams p;
  try {
    step(start_trial(p), {kNone, kNone}, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ArityMismatch);
  }
}

TEST(Step, FutileTopDoseStopsRatherThanDropping) {
  DesignParams p;
  p.n_doses = 2;
  p.start_dose = 2;
  auto s = start_trial(p);
  s = step(s, {kNone, kNone, kNone}, p);
  s = step(s, {kNone, kNone, kNone}, p);
  s = step(s, {kNone, kNone, kNone}, p);
  ASSERT_TRUE(s.dose(2).eliminated_futility);
  EXPECT_EQ(s.phase, Phase::StoppedEarly);
  EXPECT_EQ(s.current_dose, 2);
}

TEST(Backfill, TargetsHighestRespondingLowerDose) {
  DesignParams p;
  auto s = start_trial(p);
  s = step(s, {kNone, kNone, kNone}, p);  // dose 1, no response, escalate
  EXPECT_FALSE(backfill_target(s, p).has_value());
  s = step(s, {kEff, kNone, kNone}, p);   // dose 2, 1/3 response: Stay
  ASSERT_EQ(s.current_dose, 2);
  EXPECT_FALSE(backfill_target(s, p).has_value());
  s = step(s, {kNone, kNone, kNone}, p);  // dose 2 at 1/6: escalate
  ASSERT_EQ(s.current_dose, 3);
  EXPECT_EQ(backfill_target(s, p), 2);
  for (int i = 0; i < 3; ++i) s = backfill(s, kNone, p);
  EXPECT_EQ(s.dose(2).backfill_count, 3);
  EXPECT_FALSE(backfill_target(s, p).has_value());
  EXPECT_THROW(backfill(s, kNone, p), Error);
  EXPECT_EQ(s.backfill_assignments.size(), 3u);
  EXPECT_EQ(s.backfill_assignments[0], (BackfillAssignment{2, 10}));

  p.backfill_enabled = false;
  EXPECT_FALSE(backfill_target(s, p).has_value());
}

// Property: coherence over every outcome table with n <= 9 at the current
// dose, at the bottom, middle and top of the ladder, reached by one final
// patient or one final cohort of three.
TEST(Property, CoherenceOverSmallTables) {
  for (int cohort : {1, 3}) {
    DesignParams p;
    p.cohort_size = cohort;
    p.max_cohorts = 100;
    p.backfill_enabled = false;
    const std::vector<Outcome> cells{kEff, kBoth, kNone, kTox};
    for (int level : {1, 3, 5}) {
      p.start_dose = level;
      int checked = 0;
      for (int a = 0; a <= 9; ++a)
        for (int b = 0; a + b <= 9; ++b)
          for (int c = 0; a + b + c <= 9; ++c)
            for (int d = 0; a + b + c + d <= 9; ++d) {
              const int n = a + b + c + d;
              if (n < cohort) continue;
              // every way to peel the last cohort off the table
              const int counts[4] = {a, b, c, d};
              std::function<void(int, int, int*)> peel = [&](int idx, int left, int* take) {
                if (idx == 4) {
                  if (left) return;
                  auto s = start_trial(p);
                  auto& ds = s.dose(level);
                  ds = table(a - take[0], b - take[1], c - take[2], d - take[3], level);
                  std::vector<Outcome> last;
                  for (int k = 0; k < 4; ++k)
                    for (int t = 0; t < take[k]; ++t) last.push_back(cells[std::size_t(k)]);
                  const auto after = step(s, last, p);
                  const auto& ev = std::get<CohortEvent>(after.events.back());
                  const double pt = double(b + d) / n;
                  if (pt >= p.lambda_d) {
                    EXPECT_NE(ev.decision, Decision::Escalate);
                    EXPECT_LE(after.current_dose, level);
                  }
                  if (pt <= p.lambda_e) {
                    EXPECT_NE(ev.decision, Decision::DeEscalate);
                    EXPECT_GE(after.current_dose, level);
                  }
                  // never parked on an eliminated dose while running
                  if (after.phase == Phase::Escalation) {
                    EXPECT_FALSE(after.dose(after.current_dose).eliminated());
                  }
                  ++checked;
                  return;
                }
                for (int t = 0; t <= std::min(counts[idx], left); ++t) {
                  take[idx] = t;
                  peel(idx + 1, left - t, take);
                }
              };
              int take[4] = {0, 0, 0, 0};
              peel(0, cohort, take);
            }
      EXPECT_GT(checked, 700);
    }
  }
}

// Property: toxicity elimination of j reaches every higher dose in the same
// step, and enrollment adds up.
TEST(Property, EliminationPropagatesAndEnrollmentAddsUp) {
  DesignParams p;
  const std::vector<Outcome> cells{kEff, kBoth, kNone, kTox};
  std::mt19937_64 g(8);
  std::uniform_int_distribution<int> pick(0, 3), coin(0, 2);
  int eliminations = 0;
  for (int rep = 0; rep < 2000; ++rep) {
    auto s = start_trial(p);
    int backfills = 0;
    while (s.phase == Phase::Escalation) {
      if (backfill_target(s, p) && coin(g) == 0) {
        s = backfill(s, cells[std::size_t(pick(g))], p);
        ++backfills;
      }
      std::vector<Outcome> o;
      for (int i = 0; i < p.cohort_size; ++i) o.push_back(cells[std::size_t(pick(g))]);
      s = step(s, o, p);
      const auto& ev = std::get<CohortEvent>(s.events.back());
      if (!ev.eliminated_toxicity.empty()) ++eliminations;
      for (int j = 1; j <= p.n_doses; ++j)
        if (s.dose(j).eliminated_toxicity) {
          for (int h = j; h <= p.n_doses; ++h) EXPECT_TRUE(s.dose(h).eliminated_toxicity);
        }
      EXPECT_LE(s.cohorts_enrolled, p.max_cohorts);
    }
    EXPECT_EQ(s.total_enrolled(), p.cohort_size * s.cohorts_enrolled + backfills);
    EXPECT_EQ(replay(p, s.events), s);
  }
  EXPECT_GT(eliminations, 100);
}

TEST(Replay, RejectsTamperedLog) {
  DesignParams p;
  auto s = step(start_trial(p), {kNone, kNone, kNone}, p);
  s = step(s, {kEff, kTox, kNone}, p);
  auto log = s.events;
  std::get<CohortEvent>(log[1]).decision = Decision::Escalate;
  EXPECT_THROW(replay(p, log), Error);
  auto log2 = s.events;
  std::get<CohortEvent>(log2[1]).dose = 4;
  EXPECT_THROW(replay(p, log2), Error);
}
