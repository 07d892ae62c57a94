#pragma once

// Per-dose borrowing analysis of a paired Phase I / Phase II dataset: the
// covariate-similarity weight with its CI, and the posterior under the
// dynamic weight, under no borrowing and under full borrowing.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seamless/covariates.hpp"
#include "seamless/mmd.hpp"
#include "seamless/posterior.hpp"

namespace seamless {

struct PatientRecord {
  RawRecord covariates;
  std::string group;  // Phase I dose label or Phase II arm label
  bool response = false;
};

struct AnalysisOptions {
  KernelConfig kernel;
  BetaPrior prior;
  double tau = 0.3;
  double alpha = 0.05;         // credible interval level
  double weight_alpha = 0.05;  // CI level for the weight
  std::optional<double> fixed_w;
};

/// Similarity between one Phase I dose sample and one Phase II arm sample.
/// With fewer than 2 patients in either group the weight falls back to 0;
/// with exactly 2 the variance is unavailable and the CI is [0, 1].
struct ArmSimilarity {
  std::optional<SimilarityResult> result;
  WeightEstimate weight;
  std::vector<std::string> warnings;
};

inline ArmSimilarity arm_similarity(const EncodedSample& phase1, const EncodedSample& phase2,
                                    const KernelConfig& k, double alpha) {
  ArmSimilarity out;
  out.weight.alpha = alpha;
  const auto n = std::min(phase1.rows(), phase2.rows());
  if (n < 2) {
    out.weight = {0.0, 0.0, 0.0, 0.0, alpha};
    out.warnings.push_back("fewer than 2 patients in a group: no borrowing (w = 0)");
    return out;
  }
  if (n < 3) {
    auto sp = pooled_standardize(phase1, phase2);
    SimilarityResult r;
    r.mmd = mmd2_unbiased(sp.first, sp.second, k);
    r.standardization = sp.params;
    r.weight = {borrow_weight(r.mmd, k), 0.0, 0.0, 1.0, alpha};
    out.weight = r.weight;
    out.result = std::move(r);
    out.warnings.push_back("fewer than 3 patients in a group: weight CI unavailable");
    return out;
  }
  out.result = assess_similarity(phase1, phase2, k, alpha);
  out.weight = out.result->weight;
  for (const auto& d : out.result->standardization.dropped)
    out.warnings.push_back("zero-variance column '" + d + "' dropped");
  return out;
}

struct DoseAnalysis {
  std::string dose;
  ArmCounts counts;
  ArmSimilarity similarity;
  double w_used = 0.0;
  PosteriorSummary dynamic;
  PosteriorSummary no_borrowing;
  PosteriorSummary full_borrowing;
};

inline std::vector<DoseAnalysis> analyze(const CovariateSchema& schema,
                                         const std::vector<PatientRecord>& phase1,
                                         const std::vector<PatientRecord>& phase2,
                                         const AnalysisOptions& opt) {
  require(opt.tau > 0.0 && opt.tau < 1.0, ErrorCode::InvalidParams, "tau must lie in (0,1)");
  require(opt.alpha > 0.0 && opt.alpha < 1.0, ErrorCode::InvalidAlpha, "alpha must lie in (0,1)");
  if (opt.fixed_w)
    require(*opt.fixed_w >= 0.0 && *opt.fixed_w <= 1.0, ErrorCode::InvalidWeight,
            "fixed weight must lie in [0,1]");

  std::vector<std::string> arms;
  std::map<std::string, std::vector<RawRecord>> cov1, cov2;
  std::map<std::string, int> resp1, resp2;
  for (const auto& p : phase1) {
    cov1[p.group].push_back(p.covariates);
    resp1[p.group] += p.response ? 1 : 0;
  }
  for (const auto& p : phase2) {
    if (!cov2.count(p.group)) arms.push_back(p.group);
    cov2[p.group].push_back(p.covariates);
    resp2[p.group] += p.response ? 1 : 0;
  }

  std::vector<DoseAnalysis> out;
  for (const auto& arm : arms) {
    require(cov1.count(arm) > 0, ErrorCode::SchemaMismatch,
            "Phase II arm '" + arm + "' has no matching Phase I dose");
    DoseAnalysis d;
    d.dose = arm;
    d.counts = {static_cast<int>(cov1[arm].size()), resp1[arm],
                static_cast<int>(cov2[arm].size()), resp2[arm]};
    d.similarity = arm_similarity(encode(schema, cov1[arm]), encode(schema, cov2[arm]),
                                  opt.kernel, opt.weight_alpha);
    d.w_used = opt.fixed_w.value_or(d.similarity.weight.w);
    d.dynamic = summarize_posterior(posterior(d.counts, d.w_used, opt.prior), opt.tau, opt.alpha);
    d.no_borrowing = summarize_posterior(posterior(d.counts, 0.0, opt.prior), opt.tau, opt.alpha);
    d.full_borrowing = summarize_posterior(posterior(d.counts, 1.0, opt.prior), opt.tau, opt.alpha);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace seamless
