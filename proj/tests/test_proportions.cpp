#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "subpop/dataset.hpp"
#include "subpop/errors.hpp"
#include "subpop/proportions.hpp"
#include "subpop/rng.hpp"
#include "subpop/synthetic.hpp"

using namespace subpop;

namespace {

CellCounts make_counts(std::size_t n110, std::size_t n101, std::size_t n100,
                       std::size_t n0a1, std::size_t n0a0) {
  CellCounts c;
  c.n110 = n110;
  c.n101 = n101;
  c.n100 = n100;
  c.n111 = 0;
  c.n1 = n110 + n101 + n100;
  c.n0a1 = n0a1;
  c.n0a0 = n0a0;
  c.n0 = n0a1 + n0a0;
  c.n = c.n1 + c.n0;
  return c;
}

}  // namespace

TEST_CASE("plug-in source and target proportions are exact ratios") {
  const CellCounts c = make_counts(10, 20, 30, 25, 75);
  const SourceProportions sp = estimate_source_proportions(c);
  CHECK(sp.alpha10 == 10.0 / 60.0);
  CHECK(sp.alpha01 == 20.0 / 60.0);
  CHECK(sp.alpha00 == 30.0 / 60.0);
  CHECK(sp.pi == 60.0 / 160.0);

  const RhoB1 rb = estimate_rho_b1(c);
  CHECK(rb.rho == 75.0 / 100.0);
  CHECK(rb.b1 == 10.0 / 40.0);
}

TEST_CASE("plug-in estimators reject empty domains") {
  SUBCASE("no source rows") {
    const CellCounts c = make_counts(0, 0, 0, 10, 10);
    CHECK_THROWS_AS(estimate_source_proportions(c), EstimationError);
  }
  SUBCASE("no target rows") {
    const CellCounts c = make_counts(5, 5, 5, 0, 0);
    CHECK_THROWS_AS(estimate_source_proportions(c), EstimationError);
    CHECK_THROWS_AS(estimate_rho_b1(c), EstimationError);
  }
  SUBCASE("empty labeled a0 cell") {
    const CellCounts c = make_counts(0, 5, 0, 10, 10);
    CHECK_THROWS_AS(estimate_rho_b1(c), EstimationError);
  }
}

TEST_CASE("kl objective vanishes when the ratio terms cancel") {
  // With rho = 1, b1 = beta10, both fractions inside the log are xi0-free
  // multiples that sum to one, so every summand is log(1) = 0.
  const std::vector<double> xi0{0.5, 0.5};
  CHECK(kl_objective(0.3, xi0, 0.3, 1.0) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("kl objective checks its preconditions") {
  const std::vector<double> xi0{0.5};
  CHECK_THROWS_AS(kl_objective(0.3, {}, 0.5, 0.8), EstimationError);
  CHECK_THROWS_AS(kl_objective(-0.1, xi0, 0.5, 0.8), NumericError);
  CHECK_THROWS_AS(kl_objective(0.9, xi0, 0.5, 0.8), NumericError);
  CHECK_THROWS_AS(kl_objective(0.3, xi0, 0.0, 0.8), NumericError);
  CHECK_THROWS_AS(kl_objective(0.3, xi0, 1.0, 0.8), NumericError);
  // Boundary argument drives the log argument to zero.
  const std::vector<double> sure{1.0};
  CHECK_THROWS_AS(kl_objective(0.0, sure, 0.5, 0.8), NumericError);
}

TEST_CASE("kl objective is concave on the open interval") {
  RandomStream rs(51);
  std::vector<double> xi0;
  for (int i = 0; i < 50; ++i) xi0.push_back(0.05 + 0.9 * rs.uniform());
  const double b1 = 0.4, rho = 0.8;
  for (int rep = 0; rep < 200; ++rep) {
    const double lo = 1e-3, hi = rho - 1e-3;
    double u = lo + (hi - lo) * rs.uniform();
    double v = lo + (hi - lo) * rs.uniform();
    const double fu = kl_objective(u, xi0, b1, rho);
    const double fv = kl_objective(v, xi0, b1, rho);
    const double fm = kl_objective(0.5 * (u + v), xi0, b1, rho);
    CHECK(fm >= 0.5 * (fu + fv) - 1e-12);
  }
}

TEST_CASE("split_exact components recombine bitwise") {
  RandomStream rs(53);
  for (int rep = 0; rep < 1000; ++rep) {
    const double total = rs.uniform();
    const double part = total * rs.uniform();
    const auto [a, b] = split_exact(total, part);
    CHECK(a + b == total);
    CHECK(a >= 0.0);
    CHECK(b >= 0.0);
  }
}

TEST_CASE("flat kl inputs fall back to an even split with a warning") {
  SUBCASE("constant posterior values") {
    const std::vector<double> xi0(20, 0.5);
    const BetaEstimate est = estimate_beta_kl_values(xi0, 0.5, 0.8);
    CHECK(est.beta10 == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(est.beta10 + est.beta00 == 0.8);
    CHECK(!est.warnings.empty());
  }
}

TEST_CASE("kl maximizer matches a dense grid scan") {
  RandomStream rs(59);
  for (int inst = 0; inst < 1; ++inst) {
    std::vector<double> xi0;
    for (int i = 0; i < 200; ++i) xi0.push_back(0.02 + 0.96 * rs.uniform());
    const double b1 = 0.35, rho = 0.7;
    const BetaEstimate est = estimate_beta_kl_values(xi0, b1, rho);

    double best = -1e300, best_x = 0.0;
    const int grid = 100000;
    for (int g = 1; g < grid; ++g) {
      const double x = rho * static_cast<double>(g) / grid;
      const double f = kl_objective(x, xi0, b1, rho);
      if (f > best) {
        best = f;
        best_x = x;
      }
    }
    CHECK(std::abs(est.beta10 - best_x) < 1e-4);
  }
}

TEST_CASE("kl estimate on synthetic oracle posteriors concentrates") {
  // Oracle xi0 values on growing target a=0 samples; the estimate should be
  // near the generating value 0.25 on average.
  double total_err = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    SyntheticSpec spec;
    spec.n1 = 200;
    spec.n0 = 4000;
    spec.seed = 900 + static_cast<std::uint64_t>(s);
    const GeneratedData gd = generate(spec);
    const OracleModels om(spec);
    const Dataset t0 = target_a0(gd.data);
    std::vector<double> xi0;
    for (std::size_t i = 0; i < t0.size(); ++i) {
      xi0.push_back(om.xi0(t0[i].features));
    }
    const BetaEstimate est = estimate_beta_kl_values(xi0, 0.5, 0.5);
    total_err += std::abs(est.beta10 - 0.25);
  }
  CHECK(total_err / seeds <= 0.03);
}

TEST_CASE("kl estimate is invariant to input permutation") {
  RandomStream rs(61);
  std::vector<double> xi0;
  for (int i = 0; i < 300; ++i) xi0.push_back(0.05 + 0.9 * rs.uniform());
  const BetaEstimate a = estimate_beta_kl_values(xi0, 0.4, 0.6);
  std::reverse(xi0.begin(), xi0.end());
  const BetaEstimate b = estimate_beta_kl_values(xi0, 0.4, 0.6);
  // Summation order perturbs the objective by ~1e-16, which moves the flat
  // argmax by about its square root; agreement is only meaningful above that.
  CHECK(std::abs(a.beta10 - b.beta10) < 1e-6);
}

TEST_CASE("moment matching solves the two-by-two system exactly") {
  SUBCASE("hand-worked system") {
    // Class summary means 2 and 0, target mean 1, rho = 0.5: equal shares.
    const BetaEstimate est = beta_from_moments(2.0, 0.0, 1.0, 0.5);
    CHECK(est.beta10 == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(est.beta00 == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(est.beta10 + est.beta00 == 0.5);
    CHECK(est.warnings.empty());
  }
  SUBCASE("random solvable systems") {
    RandomStream rs(67);
    for (int rep = 0; rep < 100; ++rep) {
      const double m1 = rs.normal();
      const double m0 = m1 + 0.5 + rs.uniform();
      const double c1 = 0.1 + 0.8 * rs.uniform();
      const double mt = c1 * m1 + (1.0 - c1) * m0;
      const double rho = 0.2 + 0.7 * rs.uniform();
      const BetaEstimate est = beta_from_moments(m1, m0, mt, rho);
      CHECK(std::abs(est.beta10 - rho * c1) < 1e-10);
      CHECK(est.beta10 + est.beta00 == rho);
    }
  }
  SUBCASE("singular system is rejected") {
    CHECK_THROWS_AS(beta_from_moments(1.0, 1.0, 1.0, 0.5), EstimationError);
  }
  SUBCASE("out of range solution is clipped with a warning") {
    // Target mean beyond both class means forces a negative share.
    const BetaEstimate est = beta_from_moments(2.0, 0.0, 3.0, 0.5);
    CHECK(est.beta10 == 0.5);
    CHECK(est.beta00 == 0.0);
    CHECK(!est.warnings.empty());
  }
}

TEST_CASE("dataset moment estimate resolves the worked example") {
  // Source a=0 rows carry labels; target a=0 rows sit exactly between the
  // class summaries, so the classes split the target mass evenly.
  std::vector<Sample> rows;
  rows.push_back({{2.0}, 1, 1, 0});
  rows.push_back({{0.0}, 1, 0, 0});
  rows.push_back({{1.0}, 0, std::nullopt, 0});
  rows.push_back({{1.0}, 0, std::nullopt, 1});
  rows.push_back({{0.5}, 1, 0, 1});
  const Dataset ds(rows, 1);

  SUBCASE("explicit coordinate") {
    MomentSpec spec;
    spec.coordinate = 0;
    const BetaEstimate est = estimate_beta_moment(ds, 0.5, spec);
    CHECK(est.beta10 == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(est.beta00 == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("principal axis of one feature is that feature") {
    MomentSpec spec;
    spec.coordinate = -1;
    const BetaEstimate est = estimate_beta_moment(ds, 0.5, spec);
    CHECK(est.beta10 == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("coordinate out of range") {
    MomentSpec spec;
    spec.coordinate = 3;
    CHECK_THROWS_AS(estimate_beta_moment(ds, 0.5, spec), ConfigError);
  }
}

TEST_CASE("anchor rule hits the cap when the ratio carries no signal") {
  // Constant kappa at its no-signal fixed point: every ratio value equals
  // (1-rho)*(1-pi)/(pi*alpha01), so the estimate lands exactly on 1-rho.
  const double pi = 0.4, alpha01 = 1.0 / 3.0, rho = 0.5;
  const double kappa =
      pi * alpha01 / (pi * alpha01 + (1.0 - pi) * (1.0 - rho));
  const std::vector<double> kv(50, kappa);
  const Beta01Estimate est =
      estimate_beta01_anchor_values(kv, alpha01, pi, rho);
  CHECK(est.beta01 == doctest::Approx(1.0 - rho).epsilon(1e-12));
  CHECK(est.beta01 + est.beta11 == 1.0 - rho);
}

TEST_CASE("anchor quantile zero picks the smallest ratio") {
  const double pi = 0.5, alpha01 = 0.3, rho = 0.5;
  const std::vector<double> kv{0.9, 0.5, 0.8, 0.7};
  // Smallest (1-kappa)/kappa comes from the largest kappa, 0.9.
  const Beta01Estimate est =
      estimate_beta01_anchor_values(kv, alpha01, pi, rho, 0.0);
  const double want = alpha01 * pi / (1.0 - pi) * (1.0 - 0.9) / 0.9;
  CHECK(est.beta01 == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("anchor rule recovers the generating cell weight on oracle input") {
  SyntheticSpec spec;
  spec.n1 = 2000;
  spec.n0 = 8000;
  spec.seed = 77;
  const GeneratedData gd = generate(spec);
  const OracleModels om(spec);
  const Dataset t1 = target_a1(gd.data);
  std::vector<double> kv;
  for (std::size_t i = 0; i < t1.size(); ++i) {
    kv.push_back(om.kappa(t1[i].features));
  }
  const CellCounts c = cell_counts(gd.data);
  const SourceProportions sp = estimate_source_proportions(c);
  const Beta01Estimate est =
      estimate_beta01_anchor_values(kv, sp.alpha01, sp.pi, 0.5, 0.01);
  CHECK(std::abs(est.beta01 - 0.25) <= 0.05);
}

TEST_CASE("anchor rule rejects unusable inputs") {
  const std::vector<double> none;
  const std::vector<double> one{0.5};
  const std::vector<double> two{0.5, 0.5};
  CHECK_THROWS_AS(estimate_beta01_anchor_values(none, 0.3, 0.5, 0.5),
                  EstimationError);
  CHECK_THROWS_AS(
      estimate_beta01_anchor_values(one, 0.0, 0.5, 0.5), EstimationError);
  CHECK_THROWS_AS(
      estimate_beta01_anchor_values(one, 0.3, 0.0, 0.5), EstimationError);
  CHECK_THROWS_AS(
      estimate_beta01_anchor_values(two, 0.3, 0.5, 0.5, -0.1),
      ConfigError);
  CHECK_THROWS_AS(
      estimate_beta01_anchor_values(two, 0.3, 0.5, 0.5, 1.1),
      ConfigError);
  // Every kappa pinned at the clamp floor: ratios are all at the cap and the
  // quantile carries no information at all.
  const std::vector<double> floor_vals(10, 1e-6);
  CHECK_THROWS_AS(
      estimate_beta01_anchor_values(floor_vals, 0.3, 0.5, 0.5, 0.01, 1e-6),
      EstimationError);
}

TEST_CASE("proportions json round trip preserves every field") {
  SourceProportions sp{0.2, 0.3, 0.5, 0.4};
  TargetProportions tp{0.1, 0.2, 0.3, 0.4, 0.6, 0.35};
  const nlohmann::json j =
      proportions_to_json(sp, tp, "kl+anchor", {"clipped"});
  const ProportionsFile back = proportions_from_json(j);
  CHECK(back.source.alpha10 == sp.alpha10);
  CHECK(back.source.alpha01 == sp.alpha01);
  CHECK(back.source.alpha00 == sp.alpha00);
  CHECK(back.source.pi == sp.pi);
  CHECK(back.target.beta11 == tp.beta11);
  CHECK(back.target.beta10 == tp.beta10);
  CHECK(back.target.beta01 == tp.beta01);
  CHECK(back.target.beta00 == tp.beta00);
  CHECK(back.target.rho == tp.rho);
  CHECK(back.target.b1 == tp.b1);
  CHECK(back.method == "kl+anchor");
  REQUIRE(back.warnings.size() == 1);
  CHECK(back.warnings[0] == "clipped");
}

TEST_CASE("proportion consistency checks flag broken sums") {
  SourceProportions sp{1.0 / 6.0, 1.0 / 3.0, 0.5, 0.4};
  TargetProportions tp{0.25, 0.25, 0.25, 0.25, 0.5, 0.5};
  CHECK_NOTHROW(check_proportions(sp, tp));

  SUBCASE("source sum off") {
    sp.alpha00 = 0.6;
    CHECK_THROWS_AS(check_proportions(sp, tp), EstimationError);
  }
  SUBCASE("target sum off") {
    tp.beta11 = 0.3;
    CHECK_THROWS_AS(check_proportions(sp, tp), EstimationError);
  }
  SUBCASE("a0 split must match rho exactly") {
    tp.beta10 = std::nextafter(0.25, 1.0);
    tp.beta00 = 0.5 - tp.beta10;
    // Sum still within tolerance of one, but the exact a0 identity breaks.
    if (tp.beta10 + tp.beta00 != tp.rho) {
      CHECK_THROWS_AS(check_proportions(sp, tp), EstimationError);
    }
  }
  SUBCASE("negative entry") {
    tp.beta01 = -0.01;
    tp.beta11 = 0.51;
    CHECK_THROWS_AS(check_proportions(sp, tp), EstimationError);
  }
}
