#include "subpop/proportions.hpp"

#include <algorithm>
#include <cmath>

#include "subpop/errors.hpp"

namespace subpop {

SourceProportions estimate_source_proportions(const CellCounts& c) {
  if (c.n1 <= 0) throw EstimationError("no source rows");
  if (c.n0 <= 0) throw EstimationError("no target rows");
  SourceProportions sp;
  const double n1 = static_cast<double>(c.n1);
  sp.alpha10 = static_cast<double>(c.n110) / n1;
  sp.alpha01 = static_cast<double>(c.n101) / n1;
  sp.alpha00 = static_cast<double>(c.n100) / n1;
  sp.pi = n1 / static_cast<double>(c.n);
  return sp;
}

RhoB1 estimate_rho_b1(const CellCounts& c) {
  if (c.n0 <= 0) throw EstimationError("no target rows");
  if (c.n110 + c.n100 <= 0) {
    throw EstimationError("no labeled source a=0 rows; b1 is undefined");
  }
  RhoB1 r;
  r.rho = static_cast<double>(c.n0a0) / static_cast<double>(c.n0);
  r.b1 = static_cast<double>(c.n110) /
         static_cast<double>(c.n110 + c.n100);
  return r;
}

double kl_objective(double beta10, std::span<const double> xi0_vals,
                    double b1, double rho) {
  if (xi0_vals.empty()) throw EstimationError("no target a=0 rows");
  if (!(beta10 > 0.0) || !(beta10 < rho)) {
    throw NumericError("beta10 must lie strictly inside (0, rho)");
  }
  if (!(b1 > 0.0) || !(b1 < 1.0)) {
    throw NumericError("b1 must lie strictly inside (0, 1)");
  }
  const double r1 = beta10 / b1;
  const double r0 = (rho - beta10) / (1.0 - b1);
  double acc = 0.0;
  for (double v : xi0_vals) {
    const double arg = v * r1 + (1.0 - v) * r0;
    if (!(arg > 0.0)) {
      throw NumericError("nonpositive mixture density inside the log");
    }
    acc += std::log(arg);
  }
  return acc / static_cast<double>(xi0_vals.size());
}

std::pair<double, double> split_exact(double total, double part) {
  // One subtraction does not always give an exactly recombining pair; a
  // couple of fixup rounds always does in practice.
  double a = part;
  double b = total - a;
  for (int k = 0; k < 8 && a + b != total; ++k) {
    a = total - b;
    b = total - a;
  }
  return {a, b};
}

BetaEstimate estimate_beta_kl_values(std::span<const double> xi0_vals,
                                     double b1, double rho,
                                     const KlOptions& opts) {
  if (xi0_vals.empty()) throw EstimationError("no target a=0 rows");
  if (!(rho > 0.0) || rho > 1.0) {
    throw EstimationError("rho must lie in (0, 1] to split the a=0 mass");
  }
  if (!(b1 > 0.0) || !(b1 < 1.0)) {
    throw EstimationError(
        "b1 at the boundary: the labeled a=0 cell is single-class");
  }

  BetaEstimate est;
  auto flat_result = [&](const char* why) {
    auto [b10, b00] = split_exact(rho, rho / 2.0);
    est.beta10 = b10;
    est.beta00 = b00;
    est.warnings.push_back(std::string("flat objective (") + why +
                           "); returning the midpoint rho/2");
    return est;
  };

  double lo_val = xi0_vals[0], hi_val = xi0_vals[0];
  for (double v : xi0_vals) {
    lo_val = std::min(lo_val, v);
    hi_val = std::max(hi_val, v);
  }
  if (hi_val - lo_val < 1e-10) return flat_result("xi0 is constant");

  const double lo = opts.margin * rho;
  const double hi = (1.0 - opts.margin) * rho;
  const int n_scan = std::max(opts.coarse_points, 8);

  // Coarse scan: the objective is concave, so the best grid point brackets
  // the maximizer together with its neighbors.
  int best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  double worst_val = std::numeric_limits<double>::infinity();
  std::vector<double> grid(n_scan);
  for (int i = 0; i < n_scan; ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) /
                       static_cast<double>(n_scan - 1);
    const double v = kl_objective(grid[i], xi0_vals, b1, rho);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
    worst_val = std::min(worst_val, v);
  }
  if (best_val - worst_val < 1e-12) {
    return flat_result("no curvature across the scan");
  }

  // Golden-section refinement inside the bracketing interval.
  double a = grid[std::max(best - 1, 0)];
  double b = grid[std::min(best + 1, n_scan - 1)];
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - gr * (b - a);
  double x2 = a + gr * (b - a);
  double f1 = kl_objective(x1, xi0_vals, b1, rho);
  double f2 = kl_objective(x2, xi0_vals, b1, rho);
  while (b - a > opts.tol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = kl_objective(x2, xi0_vals, b1, rho);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = kl_objective(x1, xi0_vals, b1, rho);
    }
  }
  auto [b10, b00] = split_exact(rho, 0.5 * (a + b));
  est.beta10 = b10;
  est.beta00 = b00;
  return est;
}

BetaEstimate estimate_beta_kl(const ProbModel& xi0, const Dataset& target_a0,
                              double b1, double rho, const KlOptions& opts) {
  const std::vector<double> vals = predict_proba(xi0, target_a0);
  return estimate_beta_kl_values(vals, b1, rho, opts);
}

BetaEstimate beta_from_moments(double m_y1, double m_y0, double m_target,
                               double rho) {
  const double scale = std::max({1.0, std::abs(m_y1), std::abs(m_y0)});
  const double det = m_y0 - m_y1;
  if (std::abs(det) <= 1e-10 * scale) {
    throw EstimationError(
        "moment system is singular: the labeled a=0 cells have equal "
        "summary moments");
  }
  // Solve (c1, c0) from c1 + c0 = 1, c1*m_y1 + c0*m_y0 = m_target.
  const double c1 = (m_y0 - m_target) / det;
  BetaEstimate est;
  double beta10 = rho * c1;
  if (beta10 < 0.0 || beta10 > rho) {
    est.warnings.push_back(
        "moment estimate fell outside [0, rho]; clipped");
    beta10 = std::clamp(beta10, 0.0, rho);
  }
  auto [b10, b00] = split_exact(rho, beta10);
  est.beta10 = b10;
  est.beta00 = b00;
  return est;
}

namespace {

// Per-row scalar summary for the moment matcher.
std::vector<double> summary_values(const Dataset& ds, int coordinate,
                                   const Eigen::VectorXd& axis,
                                   const Eigen::VectorXd& center) {
  std::vector<double> out;
  out.reserve(ds.size());
  for (const Sample& s : ds) {
    if (coordinate >= 0) {
      out.push_back(s.features[coordinate]);
    } else {
      double v = 0.0;
      for (int j = 0; j < ds.q(); ++j) {
        v += axis(j) * (s.features[j] - center(j));
      }
      out.push_back(v);
    }
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

}  // namespace

BetaEstimate estimate_beta_moment(const Dataset& ds, double rho,
                                  const MomentSpec& spec) {
  const Dataset src_a0 = source_a0(ds);
  const Dataset tgt_a0 = target_a0(ds);
  const Dataset y1 = subset(src_a0, [](int, const std::optional<int>& y, int) {
    return y.has_value() && *y == 1;
  });
  const Dataset y0 = subset(src_a0, [](int, const std::optional<int>& y, int) {
    return y.has_value() && *y == 0;
  });
  if (y1.empty() || y0.empty()) {
    throw EstimationError("a labeled source a=0 cell is empty");
  }
  if (tgt_a0.empty()) throw EstimationError("no target a=0 rows");
  if (spec.coordinate >= ds.q()) {
    throw ConfigError("moment coordinate out of range");
  }

  Eigen::VectorXd axis = Eigen::VectorXd::Zero(ds.q());
  Eigen::VectorXd center = Eigen::VectorXd::Zero(ds.q());
  if (spec.coordinate < 0) {
    // First principal axis of the pooled a=0 features; the direction along
    // which the two cells are most likely to separate without labels.
    const Eigen::MatrixXd Xs = feature_matrix(src_a0);
    const Eigen::MatrixXd Xt = feature_matrix(tgt_a0);
    Eigen::MatrixXd X(Xs.rows() + Xt.rows(), ds.q());
    X << Xs, Xt;
    center = X.colwise().mean();
    const Eigen::MatrixXd centered = X.rowwise() - center.transpose();
    const Eigen::MatrixXd cov =
        centered.transpose() * centered / static_cast<double>(X.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) {
      throw EstimationError("principal axis computation failed");
    }
    axis = eig.eigenvectors().col(ds.q() - 1);  // largest eigenvalue
    for (int j = 0; j < ds.q(); ++j) {
      if (std::abs(axis(j)) > 1e-12) {
        if (axis(j) < 0.0) axis = -axis;
        break;
      }
    }
  }

  const double m_y1 = mean_of(summary_values(y1, spec.coordinate, axis, center));
  const double m_y0 = mean_of(summary_values(y0, spec.coordinate, axis, center));
  const double m_t =
      mean_of(summary_values(tgt_a0, spec.coordinate, axis, center));
  return beta_from_moments(m_y1, m_y0, m_t, rho);
}

Beta01Estimate estimate_beta01_anchor_values(
    std::span<const double> kappa_vals, double alpha01, double pi, double rho,
    double quantile, double clamp_floor) {
  if (kappa_vals.empty()) throw EstimationError("no target a=1 rows");
  if (!(pi > 0.0) || !(pi < 1.0)) {
    throw EstimationError("source share pi must lie strictly inside (0, 1)");
  }
  if (!(alpha01 > 0.0)) {
    throw EstimationError("alpha01 is zero: the source a=1 cell is empty");
  }
  if (quantile < 0.0 || quantile > 1.0) {
    throw ConfigError("quantile must lie in [0, 1]");
  }

  const double tiny = 1e-12;
  const double lo_bound = clamp_floor * (1.0 + 1e-9) + tiny;
  const double hi_bound = 1.0 - clamp_floor * (1.0 + 1e-9) - tiny;
  bool all_floor = true, all_ceil = true;
  for (double k : kappa_vals) {
    if (!(k > 0.0) || !(k < 1.0)) {
      throw NumericError("kappa value outside (0, 1)");
    }
    if (k > lo_bound) all_floor = false;
    if (k < hi_bound) all_ceil = false;
  }
  if (clamp_floor > 0.0 && (all_floor || all_ceil)) {
    throw EstimationError(
        "domain model is pinned at its clamp bounds on every target a=1 "
        "row; no usable signal");
  }

  std::vector<double> ratios;
  ratios.reserve(kappa_vals.size());
  for (double k : kappa_vals) ratios.push_back((1.0 - k) / k);
  std::sort(ratios.begin(), ratios.end());
  const std::size_t n = ratios.size();
  const std::size_t idx = std::min(
      n - 1, static_cast<std::size_t>(quantile * static_cast<double>(n)));

  Beta01Estimate est;
  const double raw = alpha01 * pi / (1.0 - pi) * ratios[idx];
  double beta01 = raw;
  if (raw < 0.0 || raw > 1.0 - rho) {
    est.warnings.push_back("anchor estimate capped into [0, 1 - rho]");
    beta01 = std::clamp(raw, 0.0, 1.0 - rho);
  }
  auto [b01, b11] = split_exact(1.0 - rho, beta01);
  est.beta01 = b01;
  est.beta11 = b11;
  return est;
}

Beta01Estimate estimate_beta01_anchor(const ProbFn& kappa,
                                      const Dataset& target_a1,
                                      double alpha01, double pi, double rho,
                                      double quantile) {
  std::vector<double> vals;
  vals.reserve(target_a1.size());
  for (const Sample& s : target_a1) vals.push_back(kappa(s.features));
  return estimate_beta01_anchor_values(vals, alpha01, pi, rho, quantile);
}

nlohmann::json proportions_to_json(const SourceProportions& sp,
                                   const TargetProportions& tp,
                                   const std::string& method,
                                   const std::vector<std::string>& warnings) {
  nlohmann::json j;
  j["alpha10"] = sp.alpha10;
  j["alpha01"] = sp.alpha01;
  j["alpha00"] = sp.alpha00;
  j["pi"] = sp.pi;
  j["beta11"] = tp.beta11;
  j["beta10"] = tp.beta10;
  j["beta01"] = tp.beta01;
  j["beta00"] = tp.beta00;
  j["rho"] = tp.rho;
  j["b1"] = tp.b1;
  j["method"] = method;
  j["warnings"] = warnings;
  return j;
}

ProportionsFile proportions_from_json(const nlohmann::json& j) {
  ProportionsFile f;
  f.source.alpha10 = j.at("alpha10").get<double>();
  f.source.alpha01 = j.at("alpha01").get<double>();
  f.source.alpha00 = j.at("alpha00").get<double>();
  f.source.pi = j.at("pi").get<double>();
  f.target.beta11 = j.at("beta11").get<double>();
  f.target.beta10 = j.at("beta10").get<double>();
  f.target.beta01 = j.at("beta01").get<double>();
  f.target.beta00 = j.at("beta00").get<double>();
  f.target.rho = j.at("rho").get<double>();
  f.target.b1 = j.at("b1").get<double>();
  f.method = j.value("method", "");
  if (j.contains("warnings")) {
    f.warnings = j.at("warnings").get<std::vector<std::string>>();
  }
  return f;
}

void check_proportions(const SourceProportions& sp,
                       const TargetProportions& tp) {
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in01(sp.alpha10) || !in01(sp.alpha01) || !in01(sp.alpha00)) {
    throw EstimationError("source proportions outside [0, 1]");
  }
  if (std::abs(sp.alpha10 + sp.alpha01 + sp.alpha00 - 1.0) > 1e-12) {
    throw EstimationError("source proportions do not sum to one");
  }
  if (!(sp.pi > 0.0) || !(sp.pi < 1.0)) {
    throw EstimationError("pi outside (0, 1)");
  }
  if (!in01(tp.beta11) || !in01(tp.beta10) || !in01(tp.beta01) ||
      !in01(tp.beta00) || !in01(tp.rho)) {
    throw EstimationError("target proportions outside [0, 1]");
  }
  if (std::abs(tp.beta11 + tp.beta10 + tp.beta01 + tp.beta00 - 1.0) > 1e-12) {
    throw EstimationError("target proportions do not sum to one");
  }
  if (tp.beta10 + tp.beta00 != tp.rho) {
    throw EstimationError("beta10 + beta00 must equal rho exactly");
  }
}

}  // namespace subpop
