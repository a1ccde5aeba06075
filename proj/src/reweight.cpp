#include "subpop/reweight.hpp"

#include <algorithm>
#include <cmath>

#include "subpop/errors.hpp"

namespace subpop {

LabelWeights label_weights(const SourceProportions& sp,
                           const TargetProportions& tp) {
  if (!(sp.alpha10 > 0.0) || !(sp.alpha00 > 0.0)) {
    throw EstimationError("a labeled source a=0 cell has zero mass");
  }
  const double a0_src = sp.alpha10 + sp.alpha00;
  const double a0_tgt = tp.beta10 + tp.beta00;
  if (!(a0_tgt > 0.0)) {
    throw EstimationError("target a=0 mass is zero; weights are undefined");
  }
  LabelWeights w;
  w.w1 = tp.beta10 * a0_src / (sp.alpha10 * a0_tgt);
  w.w0 = tp.beta00 * a0_src / (sp.alpha00 * a0_tgt);
  return w;
}

LossSpec LossSpec::from_name(const std::string& name, double threshold) {
  LossSpec ls;
  ls.threshold = threshold;
  if (name == "zero_one") {
    ls.kind = Kind::zero_one;
  } else if (name == "logistic") {
    ls.kind = Kind::logistic;
  } else {
    throw ConfigError("unknown loss '" + name + "'");
  }
  return ls;
}

std::string LossSpec::name() const {
  return kind == Kind::zero_one ? "zero_one" : "logistic";
}

double loss_value(const LossSpec& loss, double p, int y) {
  if (y != 0 && y != 1) throw NumericError("label must be 0 or 1");
  if (!(p >= 0.0) || !(p <= 1.0)) {
    throw NumericError("probability outside [0, 1]");
  }
  if (loss.kind == LossSpec::Kind::zero_one) {
    return classify_label(p, loss.threshold) == y ? 0.0 : 1.0;
  }
  const double pc = std::clamp(p, 1e-12, 1.0 - 1e-12);
  return y == 1 ? -std::log(pc) : -std::log(1.0 - pc);
}

double weighted_risk(const ProbFn& h, const LossSpec& loss,
                     const Dataset& source_a0_rows, const LabelWeights& w) {
  if (source_a0_rows.empty()) {
    throw EstimationError("no labeled source a=0 rows");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < source_a0_rows.size(); ++i) {
    const Sample& s = source_a0_rows[i];
    if (s.r != 1 || s.a != 0 || !s.y.has_value()) {
      throw ValidationError("row " + std::to_string(i) +
                            " is not a labeled source a=0 row");
    }
    const double wy = *s.y == 1 ? w.w1 : w.w0;
    acc += loss_value(loss, h(s.features), *s.y) * wy;
  }
  return acc / static_cast<double>(source_a0_rows.size());
}

ProbModel reweighted_erm(const Dataset& source_a0_rows, const LabelWeights& w,
                         const FitOptions& opts) {
  if (source_a0_rows.empty()) {
    throw FitError("no labeled source a=0 rows");
  }
  if (!(w.w1 >= 0.0) || !(w.w0 >= 0.0)) {
    throw FitError("label weights must be nonnegative");
  }
  std::vector<double> sw;
  sw.reserve(source_a0_rows.size());
  for (const Sample& s : source_a0_rows) {
    sw.push_back(s.y.has_value() && *s.y == 1 ? w.w1 : w.w0);
  }
  return fit_logistic(feature_matrix(source_a0_rows), labels_y(source_a0_rows),
                      opts, &sw);
}

double risk_a1(const ProbFn& h, const LossSpec& loss,
               const Dataset& source_a1_y0_rows,
               const Dataset& target_a1_rows, const TargetProportions& tp) {
  const double a1_mass = tp.beta01 + tp.beta11;
  if (!(a1_mass > 0.0)) {
    throw EstimationError("target a=1 mass is zero; risk_a1 is undefined");
  }
  if (target_a1_rows.empty()) throw EstimationError("no target a=1 rows");

  double as_if_y1 = 0.0;
  for (const Sample& s : target_a1_rows) {
    as_if_y1 += loss_value(loss, h(s.features), 1);
  }
  as_if_y1 /= static_cast<double>(target_a1_rows.size());

  const double share_y0 = tp.beta01 / a1_mass;
  if (share_y0 == 0.0) return as_if_y1;
  if (source_a1_y0_rows.empty()) {
    throw EstimationError(
        "no labeled source (y=0, a=1) rows to correct the a=1 risk");
  }
  double correction = 0.0;
  for (const Sample& s : source_a1_y0_rows) {
    const double p = h(s.features);
    correction += loss_value(loss, p, 1) - loss_value(loss, p, 0);
  }
  correction /= static_cast<double>(source_a1_y0_rows.size());
  return as_if_y1 - correction * share_y0;
}

namespace {

Dataset source_a1_y0(const Dataset& ds) {
  return subset(ds, [](int r, const std::optional<int>& y, int a) {
    return r == 1 && a == 1 && y.has_value() && *y == 0;
  });
}

}  // namespace

double risk_overall(const ProbFn& h, const LossSpec& loss, const Dataset& ds,
                    const SourceProportions& sp, const TargetProportions& tp) {
  const double a0_mass = tp.beta10 + tp.beta00;
  const double a1_mass = tp.beta01 + tp.beta11;
  double total = 0.0;
  if (a0_mass > 0.0) {
    total += weighted_risk(h, loss, source_a0(ds), label_weights(sp, tp)) *
             a0_mass;
  }
  if (a1_mass > 0.0) {
    total += risk_a1(h, loss, source_a1_y0(ds), target_a1(ds), tp) * a1_mass;
  }
  return total;
}

RiskReport risk_report(const ProbFn& h, const LossSpec& loss,
                       const Dataset& ds, const SourceProportions& sp,
                       const TargetProportions& tp) {
  RiskReport rep;
  rep.loss = loss.name();
  rep.weights = label_weights(sp, tp);
  rep.risk_a0_weighted = weighted_risk(h, loss, source_a0(ds), rep.weights);
  const double a1_mass = tp.beta01 + tp.beta11;
  rep.risk_a1 = a1_mass > 0.0
                    ? risk_a1(h, loss, source_a1_y0(ds), target_a1(ds), tp)
                    : 0.0;
  rep.risk_overall = rep.risk_a0_weighted * (tp.beta10 + tp.beta00) +
                     rep.risk_a1 * a1_mass;
  return rep;
}

nlohmann::json RiskReport::to_json() const {
  nlohmann::json j;
  j["risk_a0_weighted"] = risk_a0_weighted;
  j["risk_a1"] = risk_a1;
  j["risk_overall"] = risk_overall;
  j["weights"] = {{"w1", weights.w1}, {"w0", weights.w0}};
  j["loss"] = loss;
  return j;
}

double empirical_risk(const ProbFn& h, const LossSpec& loss, const Dataset& ds,
                      const TruthTable& truth) {
  if (truth.empty()) throw EstimationError("empty truth table");
  double acc = 0.0;
  for (const auto& [idx, y] : truth) {
    if (idx >= ds.size()) {
      throw ValidationError("truth row index " + std::to_string(idx) +
                            " outside the dataset");
    }
    acc += loss_value(loss, h(ds[idx].features), y);
  }
  return acc / static_cast<double>(truth.size());
}

}  // namespace subpop
