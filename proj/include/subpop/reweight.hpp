#pragma once

#include <string>

#include <json.hpp>

#include "subpop/adapt.hpp"
#include "subpop/dataset.hpp"
#include "subpop/logistic.hpp"
#include "subpop/proportions.hpp"
#include "subpop/synthetic.hpp"

namespace subpop {

/// Importance weights that turn labeled source a=0 averages into target a=0
/// averages: w(y) = pr(y | target, a=0) / pr(y | source, a=0), written in
/// terms of the cell rates.
struct LabelWeights {
  double w1 = 1.0;
  double w0 = 1.0;
};

LabelWeights label_weights(const SourceProportions& sp,
                           const TargetProportions& tp);

struct LossSpec {
  enum class Kind { zero_one, logistic };
  Kind kind = Kind::zero_one;
  double threshold = 0.5;  ///< zero-one cut; label is 1 when p > threshold

  static LossSpec from_name(const std::string& name, double threshold = 0.5);
  std::string name() const;
};

/// Loss of probability output p against label y. The logistic loss clamps p
/// away from {0,1} so clamped posteriors keep the risk finite.
double loss_value(const LossSpec& loss, double p, int y);

/// Sample mean of loss(h(x), y) * w(y) over the labeled source a=0 rows;
/// estimates the target a=0 risk of h.
double weighted_risk(const ProbFn& h, const LossSpec& loss,
                     const Dataset& source_a0_rows, const LabelWeights& w);

/// Logistic fit on the labeled source a=0 rows with per-row weights w(y).
/// Weights enter the fitter as-is (its objective is already mean-scaled).
ProbModel reweighted_erm(const Dataset& source_a0_rows, const LabelWeights& w,
                         const FitOptions& opts = {});

/// Target a=1 risk via the missing-cell correction: score every target a=1
/// row as if y = 1, then subtract the y=0 contribution estimated from the
/// labeled source (y=0, a=1) cell, weighted by the a=1 label split.
double risk_a1(const ProbFn& h, const LossSpec& loss,
               const Dataset& source_a1_y0_rows, const Dataset& target_a1_rows,
               const TargetProportions& tp);

/// Full target risk: the a=0 part from the weighted source average and the
/// a=1 part from the correction identity, combined with the cell masses.
double risk_overall(const ProbFn& h, const LossSpec& loss, const Dataset& ds,
                    const SourceProportions& sp, const TargetProportions& tp);

struct RiskReport {
  double risk_a0_weighted = 0.0;
  double risk_a1 = 0.0;
  double risk_overall = 0.0;
  LabelWeights weights;
  std::string loss;

  nlohmann::json to_json() const;
};

RiskReport risk_report(const ProbFn& h, const LossSpec& loss,
                       const Dataset& ds, const SourceProportions& sp,
                       const TargetProportions& tp);

/// Plain mean loss against labels supplied by an external truth table;
/// the check the estimated risks are compared to in tests.
double empirical_risk(const ProbFn& h, const LossSpec& loss, const Dataset& ds,
                      const TruthTable& truth);

}  // namespace subpop
