#include "subpop/logistic.hpp"

#include <algorithm>
#include <cmath>

#include "subpop/errors.hpp"

namespace subpop {

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_inputs(const Eigen::MatrixXd& X, const std::vector<int>& y,
                  const std::vector<double>* w) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) {
    throw NumericError("feature rows and labels disagree in length");
  }
  if (w && w->size() != y.size()) {
    throw NumericError("sample weights and labels disagree in length");
  }
  if (!X.allFinite()) throw NumericError("non-finite feature value");
  for (int v : y) {
    if (v != 0 && v != 1) throw FitError("labels must be 0 or 1");
  }
  if (w) {
    for (double wi : *w) {
      if (!std::isfinite(wi) || wi < 0.0) {
        throw FitError("sample weights must be finite and nonnegative");
      }
    }
  }
}

}  // namespace

std::pair<double, Eigen::VectorXd> loss_and_gradient(
    const Eigen::VectorXd& params, const Eigen::MatrixXd& X,
    const std::vector<int>& y, double lambda,
    const std::vector<double>* sample_weights) {
  const Eigen::Index n = X.rows();
  const Eigen::Index q = X.cols();
  if (params.size() != q + 1) {
    throw NumericError("parameter vector must have length q + 1");
  }
  check_inputs(X, y, sample_weights);
  if (n == 0) throw FitError("no rows");

  const Eigen::VectorXd w = params.head(q);
  const double b = params(q);

  double wsum = 0.0;
  double loss = 0.0;
  Eigen::VectorXd grad_w = Eigen::VectorXd::Zero(q);
  double grad_b = 0.0;

  const Eigen::VectorXd scores = (X * w).array() + b;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double wi = sample_weights ? (*sample_weights)[i] : 1.0;
    if (wi == 0.0) continue;
    const double s = scores(i);
    loss += wi * (softplus(s) - y[i] * s);
    const double resid = wi * (sigmoid(s) - y[i]);
    grad_w.noalias() += resid * X.row(i).transpose();
    grad_b += resid;
    wsum += wi;
  }
  if (wsum <= 0.0) throw FitError("total sample weight is zero");

  loss = loss / wsum + 0.5 * lambda * w.squaredNorm();
  Eigen::VectorXd grad(q + 1);
  grad.head(q) = grad_w / wsum + lambda * w;
  grad(q) = grad_b / wsum;
  return {loss, grad};
}

double ProbModel::decision(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim()) {
    throw NumericError("feature vector has dimension " +
                       std::to_string(x.size()) + ", model expects " +
                       std::to_string(dim()));
  }
  double s = intercept;
  for (int j = 0; j < dim(); ++j) {
    s += weights(j) * (x[j] - mean(j)) / scale(j);
  }
  return s;
}

double ProbModel::predict_proba(std::span<const double> x) const {
  const double p = sigmoid(decision(x));
  return std::clamp(p, clamp_eps, 1.0 - clamp_eps);
}

Eigen::VectorXd ProbModel::raw_weights() const {
  return weights.array() / scale.array();
}

double ProbModel::raw_intercept() const {
  return intercept - (weights.array() * mean.array() / scale.array()).sum();
}

ProbFn ProbModel::fn() const {
  return [m = *this](std::span<const double> x) { return m.predict_proba(x); };
}

nlohmann::json ProbModel::to_json() const {
  nlohmann::json j;
  j["lambda"] = lambda;
  j["clamp_eps"] = clamp_eps;
  j["mean"] = std::vector<double>(mean.data(), mean.data() + mean.size());
  j["scale"] = std::vector<double>(scale.data(), scale.data() + scale.size());
  j["weights"] =
      std::vector<double>(weights.data(), weights.data() + weights.size());
  j["intercept"] = intercept;
  return j;
}

ProbModel ProbModel::from_json(const nlohmann::json& j) {
  ProbModel m;
  m.lambda = j.at("lambda").get<double>();
  m.clamp_eps = j.at("clamp_eps").get<double>();
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto scale = j.at("scale").get<std::vector<double>>();
  const auto weights = j.at("weights").get<std::vector<double>>();
  m.intercept = j.at("intercept").get<double>();
  if (mean.size() != weights.size() || scale.size() != weights.size()) {
    throw ParseError("model fields mean/scale/weights disagree in length");
  }
  m.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), mean.size());
  m.scale = Eigen::Map<const Eigen::VectorXd>(scale.data(), scale.size());
  m.weights = Eigen::Map<const Eigen::VectorXd>(weights.data(), weights.size());
  return m;
}

ProbModel fit_logistic(const Eigen::MatrixXd& X, const std::vector<int>& y,
                       const FitOptions& opts,
                       const std::vector<double>* sample_weights) {
  check_inputs(X, y, sample_weights);
  const Eigen::Index n = X.rows();
  const Eigen::Index q = X.cols();
  if (n == 0) throw FitError("no training rows");

  double w0 = 0.0, w1 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double wi = sample_weights ? (*sample_weights)[i] : 1.0;
    (y[i] == 1 ? w1 : w0) += wi;
  }
  if (w0 <= 0.0 || w1 <= 0.0) {
    throw FitError("degenerate fit: labels carry a single class");
  }

  // Standardize once; the model keeps the statistics.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(q);
  Eigen::MatrixXd Z = X;
  if (opts.standardize && n > 0) {
    mean = X.colwise().mean();
    for (Eigen::Index j = 0; j < q; ++j) {
      const double var =
          (X.col(j).array() - mean(j)).square().sum() / static_cast<double>(n);
      const double s = std::sqrt(var);
      scale(j) = s < 1e-12 ? 1.0 : s;
    }
    Z = (X.rowwise() - mean.transpose()).array().rowwise() /
        scale.transpose().array();
  }

  Eigen::VectorXd params = Eigen::VectorXd::Zero(q + 1);
  auto [loss, grad] =
      loss_and_gradient(params, Z, y, opts.lambda, sample_weights);

  int iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    if (grad.lpNorm<Eigen::Infinity>() < opts.grad_tol) break;

    // Weighted Hessian of the mean loss: Z'DZ / wsum + lambda (no intercept
    // penalty).
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(q + 1, q + 1);
    double wsum = 0.0;
    const Eigen::VectorXd scores =
        (Z * params.head(q)).array() + params(q);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double wi = sample_weights ? (*sample_weights)[i] : 1.0;
      if (wi == 0.0) continue;
      const double p = sigmoid(scores(i));
      const double d = wi * p * (1.0 - p);
      H.topLeftCorner(q, q).noalias() +=
          d * (Z.row(i).transpose() * Z.row(i));
      H.topRightCorner(q, 1).noalias() += d * Z.row(i).transpose();
      H(q, q) += d;
      wsum += wi;
    }
    H.bottomLeftCorner(1, q) = H.topRightCorner(q, 1).transpose();
    H /= wsum;
    for (Eigen::Index j = 0; j < q; ++j) H(j, j) += opts.lambda;

    Eigen::VectorXd dir;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    bool newton_ok = ldlt.info() == Eigen::Success;
    if (newton_ok) {
      dir = ldlt.solve(-grad);
      newton_ok = dir.allFinite() && grad.dot(dir) < 0.0;
    }
    if (!newton_ok) dir = -grad;  // fallback: steepest descent

    // Armijo backtracking.
    const double slope = grad.dot(dir);
    double t = 1.0;
    Eigen::VectorXd next;
    double next_loss = loss;
    Eigen::VectorXd next_grad = grad;
    bool moved = false;
    while (t >= 1e-12) {
      next = params + t * dir;
      auto [l2, g2] =
          loss_and_gradient(next, Z, y, opts.lambda, sample_weights);
      if (l2 <= loss + 1e-4 * t * slope) {
        next_loss = l2;
        next_grad = std::move(g2);
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;  // no admissible step; gradient is flat to rounding
    params = std::move(next);
    loss = next_loss;
    grad = std::move(next_grad);
  }

  ProbModel m;
  m.weights = params.head(q);
  m.intercept = params(q);
  m.lambda = opts.lambda;
  m.clamp_eps = opts.clamp_eps;
  m.mean = std::move(mean);
  m.scale = std::move(scale);
  m.n_train = static_cast<int>(n);
  m.iterations = iter;
  m.grad_norm = grad.lpNorm<Eigen::Infinity>();
  return m;
}

ProbModel fit_logistic(const Dataset& ds, const FitOptions& opts,
                       const std::vector<double>* sample_weights) {
  return fit_logistic(feature_matrix(ds), labels_y(ds), opts, sample_weights);
}

std::vector<double> predict_proba(const ProbModel& m, const Dataset& ds) {
  std::vector<double> out;
  out.reserve(ds.size());
  for (const Sample& s : ds) {
    out.push_back(m.predict_proba(s.features));
  }
  return out;
}

}  // namespace subpop
