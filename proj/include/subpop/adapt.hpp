#pragma once

#include <span>
#include <string>

#include <json.hpp>

#include "subpop/dataset.hpp"
#include "subpop/logistic.hpp"
#include "subpop/proportions.hpp"
#include "subpop/synthetic.hpp"

namespace subpop {

/// The five fitted conditionals the adapted predictor is built from:
///   xi    = pr(Y=1 | x, source)
///   xi0   = pr(Y=1 | x, source, a=0)
///   tau1  = pr(A=1 | x, source)
///   tau0  = pr(A=1 | x, target)
///   kappa = pr(source | x, a=1), fitted on the pooled a=1 rows
struct NuisanceBundle {
  ProbModel xi;
  ProbModel xi0;
  ProbModel tau1;
  ProbModel tau0;
  ProbModel kappa;

  nlohmann::json to_json() const;
  static NuisanceBundle from_json(const nlohmann::json& j);
};

/// Fits all five models on one dataset. FitErrors are rethrown with the
/// model name prefixed, since an empty cell breaks exactly one of them.
NuisanceBundle fit_nuisance(const Dataset& ds, const FitOptions& opts = {});

/// Hard label from a probability: 1 exactly when p exceeds the threshold.
inline int classify_label(double p, double threshold) {
  return p > threshold ? 1 : 0;
}

/// Everything the per-row prediction record carries. Raw values are kept
/// next to their clamped versions so clamp rates can be reported.
struct PointwiseEval {
  double eta1_raw = 0.0;
  double eta1 = 0.0;
  double eta0 = 0.0;
  double tau0 = 0.0;
  double eta_raw = 0.0;
  double eta = 0.0;
  double xi = 0.0;
  double xi0 = 0.0;
  double xi1_raw = 0.0;
  double xi1 = 0.0;
  int label_eta = 0;
  int label_xi = 0;
};

/// Target-domain posterior assembled from the nuisances and the cell
/// proportions. The same assembly serves fitted models and closed-form
/// oracles, so exactness of the algebra can be checked against the Bayes
/// posterior directly.
///
/// eta1 inverts the a=1 domain model: with the source share pi and the
/// unidentified split beta01,
///   eta1(x) = 1 - (beta01/alpha01) ((1-pi)/pi) kappa(x)/(1-kappa(x)),
/// clamped into [0,1]. eta0 reweights the labeled a=0 posterior:
///   eta0(x) = (beta10/alpha10) xi0 / ((beta10/alpha10) xi0
///             + (beta00/alpha00)(1-xi0)).
/// The two are mixed by the target background rate tau0.
struct TargetPredictor {
  ProbFn xi;
  ProbFn xi0;
  ProbFn tau1;
  ProbFn tau0;
  ProbFn kappa;
  SourceProportions sp;
  TargetProportions tp;
  double threshold = 0.5;

  double eta1_raw(std::span<const double> x) const;
  double eta1(std::span<const double> x) const;
  double eta0(std::span<const double> x) const;
  double eta_raw(std::span<const double> x) const;
  double eta(std::span<const double> x) const;

  /// Source-only benchmark for the a=1 label posterior, solved from
  /// xi = xi1 tau1 + xi0 (1 - tau1); raw value clamped into [0,1].
  double xi1_raw(std::span<const double> x) const;
  double xi1(std::span<const double> x) const;

  PointwiseEval evaluate(std::span<const double> x) const;
};

TargetPredictor make_predictor(const NuisanceBundle& nb,
                               const SourceProportions& sp,
                               const TargetProportions& tp,
                               double threshold = 0.5);

/// Predictor with every nuisance at its population value and the true cell
/// proportions; on the benchmark design its eta equals the Bayes posterior.
TargetPredictor oracle_predictor(const OracleModels& om,
                                 double threshold = 0.5);

/// Per-row records for every target row of `ds`, keyed by global row index.
struct PredictionRow {
  std::size_t row_index = 0;
  PointwiseEval eval;
};

std::vector<PredictionRow> predict_target_rows(const TargetPredictor& pred,
                                               const Dataset& ds);

/// Prediction CSV: `row_index,eta1,eta0,tau0,eta,xi,xi0,xi1,label_eta,
/// label_xi`, floats at 17 significant digits.
void write_predictions_csv(const std::vector<PredictionRow>& rows,
                           const std::string& path);

}  // namespace subpop
