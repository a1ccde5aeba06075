#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "subpop/dataset.hpp"
#include "subpop/logistic.hpp"

namespace subpop {

/// Source-domain cell proportions. alpha_ya = pr(Y=y, A=a | source); the
/// (1,1) cell is structurally absent, so three rates suffice. pi is the
/// source share of the pooled sample.
struct SourceProportions {
  double alpha10 = 0.0;
  double alpha01 = 0.0;
  double alpha00 = 0.0;
  double pi = 0.0;
};

/// Target-domain cell proportions beta_ya plus the two directly estimable
/// summaries: rho = pr(A=0 | target) and b1 = pr(Y=1 | source, A=0).
struct TargetProportions {
  double beta11 = 0.0;
  double beta10 = 0.0;
  double beta01 = 0.0;
  double beta00 = 0.0;
  double rho = 0.0;
  double b1 = 0.0;
};

/// Empirical cell rates on the source and the source share pi.
/// Requires n1 > 0 and n0 > 0.
SourceProportions estimate_source_proportions(const CellCounts& c);

struct RhoB1 {
  double rho = 0.0;
  double b1 = 0.0;
};

/// rho from target background counts, b1 from the labeled a=0 source cell.
RhoB1 estimate_rho_b1(const CellCounts& c);

/// Sample mean of log( xi0 * beta10 / b1 + (1 - xi0) * (rho - beta10) /
/// (1 - b1) ) over the given per-row xi0 values. Concave in beta10 on
/// (0, rho). Preconditions: 0 < beta10 < rho, 0 < b1 < 1, each xi0 in (0,1).
double kl_objective(double beta10, std::span<const double> xi0_vals,
                    double b1, double rho);

struct KlOptions {
  int coarse_points = 256;   ///< scan grid before refinement
  double margin = 1e-4;      ///< search on [margin*rho, (1-margin)*rho]
  double tol = 1e-9;         ///< golden-section interval width
};

/// A beta10/beta00 pair; the two always sum to rho exactly.
struct BetaEstimate {
  double beta10 = 0.0;
  double beta00 = 0.0;
  std::vector<std::string> warnings;
};

/// Maximizes kl_objective by coarse scan plus golden-section refinement.
/// A flat objective (xi0 nearly constant, or no curvature across the scan)
/// returns the midpoint rho/2 with a warning rather than an arbitrary
/// grid point.
BetaEstimate estimate_beta_kl_values(std::span<const double> xi0_vals,
                                     double b1, double rho,
                                     const KlOptions& opts = {});

/// Same, with xi0 evaluated by a fitted model on the target a=0 rows.
BetaEstimate estimate_beta_kl(const ProbModel& xi0, const Dataset& target_a0,
                              double b1, double rho,
                              const KlOptions& opts = {});

/// Scalar summary used by the moment matcher: a fixed coordinate, or the
/// first principal axis of the pooled a=0 features when coordinate < 0.
struct MomentSpec {
  int coordinate = -1;
};

/// Solves the two-moment system in closed form: with m(x) = (1, s(x)),
/// the target a=0 moment vector is the beta-weighted mixture of the two
/// labeled source a=0 cell moments. Raises EstimationError when the system
/// is singular (the cells have equal summary moments). Components falling
/// outside [0, rho] are clipped and rescaled, with a warning.
BetaEstimate beta_from_moments(double m_y1, double m_y0, double m_target,
                               double rho);

/// Empirical version on a full dataset: cell moments from the labeled
/// source a=0 rows, target moment from the target a=0 rows.
BetaEstimate estimate_beta_moment(const Dataset& ds, double rho,
                                  const MomentSpec& spec = {});

struct Beta01Estimate {
  double beta01 = 0.0;
  double beta11 = 0.0;
  std::vector<std::string> warnings;
};

/// Anchor-set rule for the unidentified a=1 split: scale the q-th lower
/// quantile of (1 - kappa(x)) / kappa(x) over target a=1 rows by
/// alpha01 * pi / (1 - pi), then cap into [0, 1 - rho]. Near an anchor set
/// (points with no target-specific a=1 mass nearby) the quantile approaches
/// beta01 from above. beta11 is returned as (1 - rho) - beta01.
Beta01Estimate estimate_beta01_anchor(const ProbFn& kappa,
                                      const Dataset& target_a1,
                                      double alpha01, double pi, double rho,
                                      double quantile = 0.01);

/// Same on precomputed kappa values. `clamp_floor` is the probability clamp
/// of the model that produced the values; when every value sits at the
/// clamp bounds the domain model carries no signal and estimation fails.
Beta01Estimate estimate_beta01_anchor_values(std::span<const double> kappa_vals,
                                             double alpha01, double pi,
                                             double rho,
                                             double quantile = 0.01,
                                             double clamp_floor = 1e-6);

/// Serialized form used by the CLI: every rate plus the method tag and any
/// warnings collected along the way.
nlohmann::json proportions_to_json(const SourceProportions& sp,
                                   const TargetProportions& tp,
                                   const std::string& method,
                                   const std::vector<std::string>& warnings);

struct ProportionsFile {
  SourceProportions source;
  TargetProportions target;
  std::string method;
  std::vector<std::string> warnings;
};

ProportionsFile proportions_from_json(const nlohmann::json& j);

/// Checks the simplex constraints: rates in [0,1], alphas summing to one,
/// betas summing to one within 1e-12, beta10 + beta00 == rho exactly.
void check_proportions(const SourceProportions& sp,
                       const TargetProportions& tp);

/// Splits `total` into (part, total - part) with the pair summing back to
/// `total` exactly in floating point.
std::pair<double, double> split_exact(double total, double part);

}  // namespace subpop
