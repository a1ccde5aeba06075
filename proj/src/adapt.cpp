#include "subpop/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "subpop/errors.hpp"

namespace subpop {

namespace {

ProbModel fit_named(const char* name, const Dataset& ds,
                    const std::vector<int>& labels, const FitOptions& opts) {
  try {
    return fit_logistic(feature_matrix(ds), labels, opts);
  } catch (const Error& e) {
    throw FitError(std::string(name) + ": " + e.what());
  }
}

std::vector<int> a_labels(const Dataset& ds) {
  std::vector<int> out;
  out.reserve(ds.size());
  for (const Sample& s : ds) out.push_back(s.a);
  return out;
}

std::vector<int> r_labels(const Dataset& ds) {
  std::vector<int> out;
  out.reserve(ds.size());
  for (const Sample& s : ds) out.push_back(s.r);
  return out;
}

}  // namespace

NuisanceBundle fit_nuisance(const Dataset& ds, const FitOptions& opts) {
  const Dataset src = source_rows(ds);
  const Dataset tgt = target_rows(ds);
  const Dataset src_a0 = source_a0(ds);
  const Dataset pooled_a1 = subset(
      ds, [](int, const std::optional<int>&, int a) { return a == 1; });

  if (src.empty()) throw FitError("xi: no source rows");
  if (tgt.empty()) throw FitError("tau0: no target rows");
  if (src_a0.empty()) throw FitError("xi0: no source a=0 rows");
  if (pooled_a1.empty()) throw FitError("kappa: no a=1 rows");

  NuisanceBundle nb;
  nb.xi = fit_named("xi", src, labels_y(src), opts);
  nb.xi0 = fit_named("xi0", src_a0, labels_y(src_a0), opts);
  nb.tau1 = fit_named("tau1", src, a_labels(src), opts);
  nb.tau0 = fit_named("tau0", tgt, a_labels(tgt), opts);
  nb.kappa = fit_named("kappa", pooled_a1, r_labels(pooled_a1), opts);
  return nb;
}

nlohmann::json NuisanceBundle::to_json() const {
  nlohmann::json j;
  j["xi"] = xi.to_json();
  j["xi0"] = xi0.to_json();
  j["tau1"] = tau1.to_json();
  j["tau0"] = tau0.to_json();
  j["kappa"] = kappa.to_json();
  return j;
}

NuisanceBundle NuisanceBundle::from_json(const nlohmann::json& j) {
  NuisanceBundle nb;
  nb.xi = ProbModel::from_json(j.at("xi"));
  nb.xi0 = ProbModel::from_json(j.at("xi0"));
  nb.tau1 = ProbModel::from_json(j.at("tau1"));
  nb.tau0 = ProbModel::from_json(j.at("tau0"));
  nb.kappa = ProbModel::from_json(j.at("kappa"));
  return nb;
}

double TargetPredictor::eta1_raw(std::span<const double> x) const {
  if (!(sp.alpha01 > 0.0)) {
    throw EstimationError("alpha01 is zero: the a=1 inversion is undefined");
  }
  if (!(sp.pi > 0.0) || !(sp.pi < 1.0)) {
    throw EstimationError("pi outside (0, 1)");
  }
  const double coef = tp.beta01 / sp.alpha01 * (1.0 - sp.pi) / sp.pi;
  if (coef == 0.0) return 1.0;  // no held-out y=0 mass among a=1
  const double k = kappa(x);
  return 1.0 - coef * k / (1.0 - k);
}

double TargetPredictor::eta1(std::span<const double> x) const {
  return std::clamp(eta1_raw(x), 0.0, 1.0);
}

double TargetPredictor::eta0(std::span<const double> x) const {
  if (!(sp.alpha10 > 0.0) || !(sp.alpha00 > 0.0)) {
    throw EstimationError("a labeled source a=0 cell has zero mass");
  }
  const double v = xi0(x);
  const double r1 = tp.beta10 / sp.alpha10 * v;
  const double r0 = tp.beta00 / sp.alpha00 * (1.0 - v);
  const double denom = r1 + r0;
  if (!(denom > 0.0)) {
    throw NumericError("zero reweighted mass in the a=0 posterior");
  }
  return r1 / denom;
}

double TargetPredictor::eta_raw(std::span<const double> x) const {
  const double t = tau0(x);
  return eta1_raw(x) * t + eta0(x) * (1.0 - t);
}

double TargetPredictor::eta(std::span<const double> x) const {
  const double t = tau0(x);
  return eta1(x) * t + eta0(x) * (1.0 - t);
}

double TargetPredictor::xi1_raw(std::span<const double> x) const {
  const double t = tau1(x);
  if (!(t > 0.0)) {
    throw NumericError("tau1 is zero: the source a=1 posterior is undefined");
  }
  return (xi(x) - xi0(x) * (1.0 - t)) / t;
}

double TargetPredictor::xi1(std::span<const double> x) const {
  return std::clamp(xi1_raw(x), 0.0, 1.0);
}

PointwiseEval TargetPredictor::evaluate(std::span<const double> x) const {
  PointwiseEval ev;
  ev.eta1_raw = eta1_raw(x);
  ev.eta1 = std::clamp(ev.eta1_raw, 0.0, 1.0);
  ev.eta0 = eta0(x);
  ev.tau0 = tau0(x);
  ev.eta_raw = ev.eta1_raw * ev.tau0 + ev.eta0 * (1.0 - ev.tau0);
  ev.eta = ev.eta1 * ev.tau0 + ev.eta0 * (1.0 - ev.tau0);
  ev.xi = xi(x);
  ev.xi0 = xi0(x);
  ev.xi1_raw = xi1_raw(x);
  ev.xi1 = std::clamp(ev.xi1_raw, 0.0, 1.0);
  ev.label_eta = classify_label(ev.eta, threshold);
  ev.label_xi = classify_label(ev.xi, threshold);
  return ev;
}

TargetPredictor make_predictor(const NuisanceBundle& nb,
                               const SourceProportions& sp,
                               const TargetProportions& tp,
                               double threshold) {
  TargetPredictor p;
  p.xi = nb.xi.fn();
  p.xi0 = nb.xi0.fn();
  p.tau1 = nb.tau1.fn();
  p.tau0 = nb.tau0.fn();
  p.kappa = nb.kappa.fn();
  p.sp = sp;
  p.tp = tp;
  p.threshold = threshold;
  return p;
}

TargetPredictor oracle_predictor(const OracleModels& om, double threshold) {
  TargetPredictor p;
  p.xi = om.xi_fn();
  p.xi0 = om.xi0_fn();
  p.tau1 = om.tau1_fn();
  p.tau0 = om.tau0_fn();
  p.kappa = om.kappa_fn();
  p.sp = om.source_props();
  p.tp = om.target_props();
  p.threshold = threshold;
  return p;
}

std::vector<PredictionRow> predict_target_rows(const TargetPredictor& pred,
                                               const Dataset& ds) {
  std::vector<PredictionRow> rows;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds[i].r != 0) continue;
    PredictionRow row;
    row.row_index = i;
    row.eval = pred.evaluate(ds[i].features);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_predictions_csv(const std::vector<PredictionRow>& rows,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << "row_index,eta1,eta0,tau0,eta,xi,xi0,xi1,label_eta,label_xi\n";
  for (const PredictionRow& r : rows) {
    const PointwiseEval& e = r.eval;
    out << r.row_index << ',' << format_double(e.eta1) << ','
        << format_double(e.eta0) << ',' << format_double(e.tau0) << ','
        << format_double(e.eta) << ',' << format_double(e.xi) << ','
        << format_double(e.xi0) << ',' << format_double(e.xi1) << ','
        << e.label_eta << ',' << e.label_xi << '\n';
  }
  if (!out) throw ParseError("write failed for '" + path + "'");
}

}  // namespace subpop
