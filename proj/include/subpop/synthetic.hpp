#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "subpop/dataset.hpp"
#include "subpop/logistic.hpp"
#include "subpop/proportions.hpp"

namespace subpop {

/// Four-Gaussian benchmark design. Each (y, a) cell draws features from an
/// identity-covariance normal around its own mean. The source draws the
/// three observable cells with equal probability; the target draws all four
/// equally, so the true cell rates are alpha = 1/3 and beta = 1/4, with
/// rho = 1/2 and b1 = 1/2.
struct SyntheticSpec {
  long n1 = 4000;  ///< source rows
  long n0 = 4000;  ///< target rows
  std::uint64_t seed = 0;
  std::vector<double> mu00{1.0, 0.0, 0.0, 0.0};
  std::vector<double> mu01{0.0, 0.0, 1.0, 0.0};
  std::vector<double> mu10{0.0, 1.0, 0.0, 0.0};
  std::vector<double> mu11{0.0, 0.0, 0.0, 1.0};

  int q() const { return static_cast<int>(mu00.size()); }
  /// Source share of the pooled sample.
  double pi() const {
    return static_cast<double>(n1) / static_cast<double>(n1 + n0);
  }
};

/// Label truth for unlabeled rows, keyed by row position in the dataset.
using TruthTable = std::vector<std::pair<std::size_t, int>>;

struct GeneratedData {
  Dataset data;
  TruthTable truth;  ///< target rows only
};

/// Draws the benchmark sample: n1 source rows first, then n0 target rows.
/// Reproducible bit-for-bit from the seed; cell assignments and per-cell
/// feature draws use separate derived streams.
GeneratedData generate(const SyntheticSpec& spec);

/// Closed-form population quantities of the benchmark design. Densities are
/// evaluated with a shared max-exponent shift, so ratios stay finite far
/// from the means.
class OracleModels {
 public:
  explicit OracleModels(SyntheticSpec spec);

  double xi(std::span<const double> x) const;     ///< pr(Y=1 | x, source)
  double xi0(std::span<const double> x) const;    ///< pr(Y=1 | x, source, a=0)
  double tau1(std::span<const double> x) const;   ///< pr(A=1 | x, source)
  double tau0(std::span<const double> x) const;   ///< pr(A=1 | x, target)
  double kappa(std::span<const double> x) const;  ///< pr(source | x, a=1)
  /// Target posterior pr(Y=1 | x, target); the quantity every adapted
  /// predictor is trying to reach.
  double bayes(std::span<const double> x) const;

  ProbFn xi_fn() const;
  ProbFn xi0_fn() const;
  ProbFn tau1_fn() const;
  ProbFn tau0_fn() const;
  ProbFn kappa_fn() const;
  ProbFn bayes_fn() const;

  SourceProportions source_props() const;
  TargetProportions target_props() const;

  const SyntheticSpec& spec() const { return spec_; }

 private:
  /// exp(-|x - mu_ya|^2 / 2) for the four cells, shifted by the max
  /// exponent; order (00, 01, 10, 11).
  std::array<double, 4> cell_densities(std::span<const double> x) const;

  SyntheticSpec spec_;
};

/// Row-level split of a labeled pool into a source/target pair. Rows in the
/// (y=1, a=1) cell always land in the target; the other cells go to the
/// source with the given per-cell rates. Output rows keep pool order; target
/// rows drop their labels into the returned truth table.
struct PartitionSpec {
  double rate_a = 0.5;  ///< source rate for the (y=0, a=1) cell
  double rate_b = 0.5;  ///< source rate for the (y=1, a=0) cell
  double rate_c = 0.5;  ///< source rate for the (y=0, a=0) cell
  std::uint64_t seed = 0;
};

GeneratedData partition_pool(const Dataset& pool, const PartitionSpec& spec);

/// Side-table IO for label truth: CSV `row_index,y_true`.
void write_truth_csv(const TruthTable& truth, const std::string& path);
TruthTable load_truth_csv(const std::string& path);

}  // namespace subpop
