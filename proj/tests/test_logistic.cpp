#include <doctest.h>

#include <cmath>

#include "subpop/errors.hpp"
#include "subpop/logistic.hpp"
#include "subpop/rng.hpp"

using namespace subpop;

namespace {

// Random fit problem with both classes present.
struct Problem {
  Eigen::MatrixXd X;
  std::vector<int> y;
  std::vector<double> w;
};

Problem random_problem(RandomStream& rs, int n, int q) {
  Problem p;
  p.X.resize(n, q);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < q; ++j) p.X(i, j) = rs.normal();
    p.y.push_back(i < n / 2 ? 0 : 1);
    p.w.push_back(0.25 + rs.uniform());
  }
  return p;
}

}  // namespace

TEST_CASE("loss at zero parameters is log 2 on balanced labels") {
  RandomStream rs(7);
  const Problem p = random_problem(rs, 40, 3);
  const Eigen::VectorXd params = Eigen::VectorXd::Zero(4);
  const auto [loss, grad] = loss_and_gradient(params, p.X, p.y, 0.0);
  CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // Intercept gradient is mean(sigma(0) - y) = 0.5 - mean(y) = 0.
  CHECK(std::abs(grad(3)) < 1e-15);
}

TEST_CASE("gradient matches central finite differences") {
  RandomStream rs(11);
  double worst = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    const int q = 4;
    const Problem p = random_problem(rs, 40, q);
    Eigen::VectorXd params(q + 1);
    for (int j = 0; j <= q; ++j) params(j) = rs.normal();
    const double lambda = 0.05 * (rep % 3);
    const bool weighted = rep % 2 == 0;
    const std::vector<double>* w = weighted ? &p.w : nullptr;

    const auto [loss, grad] = loss_and_gradient(params, p.X, p.y, lambda, w);
    (void)loss;
    const double h = 1e-5;
    for (int j = 0; j <= q; ++j) {
      Eigen::VectorXd up = params, dn = params;
      up(j) += h;
      dn(j) -= h;
      const double fd = (loss_and_gradient(up, p.X, p.y, lambda, w).first -
                         loss_and_gradient(dn, p.X, p.y, lambda, w).first) /
                        (2.0 * h);
      const double rel =
          std::abs(fd - grad(j)) / std::max(1.0, std::abs(grad(j)));
      worst = std::max(worst, rel);
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("objective is convex along random segments") {
  RandomStream rs(13);
  const Problem p = random_problem(rs, 30, 3);
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::VectorXd a(4), b(4);
    for (int j = 0; j < 4; ++j) {
      a(j) = 2.0 * rs.normal();
      b(j) = 2.0 * rs.normal();
    }
    const double la = loss_and_gradient(a, p.X, p.y, 0.1).first;
    const double lb = loss_and_gradient(b, p.X, p.y, 0.1).first;
    const double lm =
        loss_and_gradient(((a + b) / 2.0).eval(), p.X, p.y, 0.1).first;
    CHECK(lm <= 0.5 * (la + lb) + 1e-12);
  }
}

TEST_CASE("fit recovers a symmetric boundary") {
  Eigen::MatrixXd X(1000, 1);
  std::vector<int> y;
  RandomStream rs(17);
  for (int i = 0; i < 1000; ++i) {
    const int label = i % 2;
    X(i, 0) = (label == 1 ? 1.0 : -1.0) + 0.3 * rs.normal();
    y.push_back(label);
  }
  const ProbModel m = fit_logistic(X, y);
  CHECK(m.raw_weights()(0) > 0.0);
  CHECK(std::abs(m.raw_intercept()) < 0.1);
  const double x0 = 0.0;
  CHECK(m.predict_proba(std::span<const double>(&x0, 1)) ==
        doctest::Approx(0.5).epsilon(0.05));
  CHECK(m.grad_norm < 1e-8);
  CHECK(m.iterations < 500);
}

TEST_CASE("constant sample weights reproduce the unweighted fit") {
  RandomStream rs(19);
  const Problem p = random_problem(rs, 80, 3);
  const ProbModel plain = fit_logistic(p.X, p.y);
  const std::vector<double> w(p.y.size(), 2.5);
  const ProbModel weighted = fit_logistic(p.X, p.y, {}, &w);
  for (int j = 0; j < 3; ++j) {
    CHECK(weighted.weights(j) ==
          doctest::Approx(plain.weights(j)).epsilon(1e-6));
  }
  CHECK(weighted.intercept ==
        doctest::Approx(plain.intercept).epsilon(1e-6));
}

TEST_CASE("a strong ridge shrinks the slope toward zero") {
  RandomStream rs(23);
  const Problem p = random_problem(rs, 100, 2);
  FitOptions opts;
  opts.lambda = 1e6;
  const ProbModel m = fit_logistic(p.X, p.y, opts);
  CHECK(m.weights.norm() < 1e-3);
}

TEST_CASE("prediction applies the standardization and the clamp") {
  ProbModel m;
  m.weights = Eigen::VectorXd::Constant(1, std::log(3.0));
  m.intercept = 0.0;
  m.mean = Eigen::VectorXd::Zero(1);
  m.scale = Eigen::VectorXd::Ones(1);
  m.clamp_eps = 1e-6;

  const double x1 = 1.0;
  CHECK(m.predict_proba(std::span<const double>(&x1, 1)) ==
        doctest::Approx(0.75).epsilon(1e-12));
  const double x0 = 0.0;
  CHECK(m.predict_proba(std::span<const double>(&x0, 1)) ==
        doctest::Approx(0.5).epsilon(1e-12));

  m.intercept = 1000.0;
  CHECK(m.predict_proba(std::span<const double>(&x0, 1)) == 1.0 - 1e-6);
  m.intercept = -1000.0;
  CHECK(m.predict_proba(std::span<const double>(&x0, 1)) == 1e-6);

  const std::vector<double> wrong{1.0, 2.0};
  CHECK_THROWS_AS(m.predict_proba(wrong), NumericError);
}

TEST_CASE("degenerate inputs are rejected") {
  Eigen::MatrixXd X(4, 1);
  X << 0.0, 1.0, 2.0, 3.0;

  SUBCASE("single class") {
    const std::vector<int> y{1, 1, 1, 1};
    CHECK_THROWS_AS(fit_logistic(X, y), FitError);
  }
  SUBCASE("single class by weight") {
    const std::vector<int> y{0, 0, 1, 1};
    const std::vector<double> w{1.0, 1.0, 0.0, 0.0};
    CHECK_THROWS_AS(fit_logistic(X, y, {}, &w), FitError);
  }
  SUBCASE("negative weight") {
    const std::vector<int> y{0, 0, 1, 1};
    const std::vector<double> w{1.0, 1.0, -1.0, 1.0};
    CHECK_THROWS_AS(fit_logistic(X, y, {}, &w), FitError);
  }
  SUBCASE("non-finite feature") {
    X(2, 0) = std::numeric_limits<double>::quiet_NaN();
    const std::vector<int> y{0, 0, 1, 1};
    CHECK_THROWS_AS(fit_logistic(X, y), NumericError);
  }
  SUBCASE("bad label") {
    const std::vector<int> y{0, 0, 2, 1};
    CHECK_THROWS_AS(fit_logistic(X, y), FitError);
  }
}

TEST_CASE("fit finds the separating direction of two Gaussian cells") {
  // Labeled a=0 source cell pair: class means differ along (-1, 1, 0, 0).
  RandomStream rs(31);
  const int n = 4000;
  Eigen::MatrixXd X(n, 4);
  std::vector<int> y;
  for (int i = 0; i < n; ++i) {
    const int label = static_cast<int>(rs.below(2));
    const double mu[4] = {label == 1 ? 0.0 : 1.0, label == 1 ? 1.0 : 0.0,
                          0.0, 0.0};
    for (int j = 0; j < 4; ++j) X(i, j) = mu[j] + rs.normal();
    y.push_back(label);
  }
  const ProbModel m = fit_logistic(X, y);
  Eigen::VectorXd dir = m.raw_weights();
  dir.normalize();
  Eigen::VectorXd truth(4);
  truth << -1.0, 1.0, 0.0, 0.0;
  truth.normalize();
  const double cosine = dir.dot(truth);
  CHECK(cosine > std::cos(10.0 * M_PI / 180.0));
}

TEST_CASE("standardization makes the fit affine-invariant") {
  RandomStream rs(37);
  const Problem p = random_problem(rs, 200, 3);
  Eigen::MatrixXd Xs = p.X;
  for (int j = 0; j < 3; ++j) {
    Xs.col(j) = (p.X.col(j) * (3.0 + j)).array() + 7.0;
  }
  const ProbModel m1 = fit_logistic(p.X, p.y);
  const ProbModel m2 = fit_logistic(Xs, p.y);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> x1(3), x2(3);
    for (int j = 0; j < 3; ++j) {
      x1[j] = p.X(i, j);
      x2[j] = Xs(i, j);
    }
    CHECK(m1.predict_proba(x1) == doctest::Approx(m2.predict_proba(x2))
                                      .epsilon(1e-6));
  }
}

TEST_CASE("model json round trip preserves predictions") {
  RandomStream rs(41);
  const Problem p = random_problem(rs, 60, 2);
  const ProbModel m = fit_logistic(p.X, p.y);
  const ProbModel back = ProbModel::from_json(m.to_json());
  for (int i = 0; i < 10; ++i) {
    const std::vector<double> x{p.X(i, 0), p.X(i, 1)};
    CHECK(back.predict_proba(x) == m.predict_proba(x));
  }
  const nlohmann::json j = m.to_json();
  CHECK(j.contains("lambda"));
  CHECK(j.contains("clamp_eps"));
  CHECK(j.contains("mean"));
  CHECK(j.contains("scale"));
  CHECK(j.contains("weights"));
  CHECK(j.contains("intercept"));
}

TEST_CASE("null weights equal unit weights exactly") {
  RandomStream rs(43);
  const Problem p = random_problem(rs, 50, 2);
  Eigen::VectorXd params(3);
  params << 0.3, -0.7, 0.1;
  const std::vector<double> ones(p.y.size(), 1.0);
  const auto [l1, g1] = loss_and_gradient(params, p.X, p.y, 0.01);
  const auto [l2, g2] = loss_and_gradient(params, p.X, p.y, 0.01, &ones);
  CHECK(l1 == l2);
  CHECK((g1 - g2).lpNorm<Eigen::Infinity>() == 0.0);
}
