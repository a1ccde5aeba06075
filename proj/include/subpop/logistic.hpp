#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "subpop/dataset.hpp"

namespace subpop {

/// Any map from a feature vector to a probability.
using ProbFn = std::function<double(std::span<const double>)>;

/// L2-regularized logistic model. Coefficients live in the standardized
/// coordinates fixed at training time; `mean` and `scale` are carried so
/// prediction and serialization stay self-contained.
struct ProbModel {
  Eigen::VectorXd weights;  ///< per standardized feature
  double intercept = 0.0;
  double lambda = 0.0;
  double clamp_eps = 1e-6;
  Eigen::VectorXd mean;   ///< training feature means
  Eigen::VectorXd scale;  ///< training feature scales (1 where degenerate)

  // Fit diagnostics; not serialized.
  int n_train = 0;
  int iterations = 0;
  double grad_norm = 0.0;

  int dim() const { return static_cast<int>(weights.size()); }

  /// Linear score w.z + b on the standardized features.
  double decision(std::span<const double> x) const;

  /// Sigmoid of the score, clamped into [clamp_eps, 1 - clamp_eps].
  double predict_proba(std::span<const double> x) const;

  /// Coefficients mapped back to the raw feature coordinates.
  Eigen::VectorXd raw_weights() const;
  double raw_intercept() const;

  /// Copyable closure evaluating predict_proba.
  ProbFn fn() const;

  nlohmann::json to_json() const;
  static ProbModel from_json(const nlohmann::json& j);
};

struct FitOptions {
  double lambda = 1e-2;
  double clamp_eps = 1e-6;
  double grad_tol = 1e-8;   ///< convergence: gradient infinity norm
  int max_iter = 500;
  bool standardize = true;
};

/// Mean weighted cross-entropy plus the ridge term:
///   (sum_i w_i l_i) / (sum_i w_i) + (lambda/2) |w|^2
/// with the intercept unpenalized. `params` stacks the feature weights and
/// then the intercept. Pure in its inputs; no standardization is applied
/// here, so it can be probed directly (finite differences, midpoints).
std::pair<double, Eigen::VectorXd> loss_and_gradient(
    const Eigen::VectorXd& params, const Eigen::MatrixXd& X,
    const std::vector<int>& y, double lambda,
    const std::vector<double>* sample_weights = nullptr);

/// Newton fit with backtracking line search and a gradient-descent fallback
/// when the Hessian solve is unusable. Stops at grad_tol or max_iter.
/// Throws FitError when labels are single-class (by weight) and
/// NumericError on non-finite inputs.
ProbModel fit_logistic(const Eigen::MatrixXd& X, const std::vector<int>& y,
                       const FitOptions& opts = {},
                       const std::vector<double>* sample_weights = nullptr);

/// Convenience: fit on a fully labeled dataset slice.
ProbModel fit_logistic(const Dataset& ds, const FitOptions& opts = {},
                       const std::vector<double>* sample_weights = nullptr);

/// Probabilities for every row of a dataset.
std::vector<double> predict_proba(const ProbModel& m, const Dataset& ds);

}  // namespace subpop
