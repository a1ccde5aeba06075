#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace subpop {

/// One observation. `r` marks the domain (1 = source, 0 = target), `a` the
/// background group, and `y` the label, present exactly when r == 1.
struct Sample {
  std::vector<double> features;
  int r = 1;
  std::optional<int> y;
  int a = 0;
};

/// Immutable collection of samples sharing one feature dimension q.
/// Construction checks dimensions and label presence; design constraints
/// (the missing source cell) are checked separately by validate().
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<Sample> samples, int q);

  /// Infers q from the first sample (q = 0 when empty).
  static Dataset from_samples(std::vector<Sample> samples);

  int q() const { return q_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<Sample>& samples() const { return samples_; }
  auto begin() const { return samples_.begin(); }
  auto end() const { return samples_.end(); }

 private:
  std::vector<Sample> samples_;
  int q_ = 0;
};

/// Joint counts over the (r, y, a) cells of a dataset.
struct CellCounts {
  long n110 = 0;  ///< source, y=1, a=0
  long n101 = 0;  ///< source, y=0, a=1
  long n100 = 0;  ///< source, y=0, a=0
  long n111 = 0;  ///< source, y=1, a=1 (excluded by design; counted anyway)
  long n1 = 0;    ///< all source
  long n0a1 = 0;  ///< target, a=1
  long n0a0 = 0;  ///< target, a=0
  long n0 = 0;    ///< all target
  long n = 0;
};

CellCounts cell_counts(const Dataset& ds);

/// Result of checking a dataset against the sampling design.
struct ValidationReport {
  CellCounts counts;
  /// Indices of source rows in the excluded (y=1, a=1) cell.
  std::vector<std::size_t> violations;
  /// Empty-cell notices; these do not make the dataset invalid on their own.
  std::vector<std::string> warnings;
  bool ok = true;
};

/// Checks the structured-missingness design: no source sample may land in
/// the (y=1, a=1) cell unless `allow_forbidden_cell` is set. Also warns when
/// any of the cells needed for fitting is empty. Never throws.
ValidationReport validate(const Dataset& ds, bool allow_forbidden_cell = false);

/// Same check, raising ValidationError (with offending row indices) on
/// failure. Used by the loaders.
void validate_or_throw(const Dataset& ds, bool allow_forbidden_cell = false);

struct LoadOptions {
  bool has_header = true;
  /// Accept source rows in the excluded (y=1, a=1) cell.
  bool allow_forbidden_cell = false;
};

/// Reads the canonical CSV layout `r,y,a,x1,...,xq` (y blank on target
/// rows). Raises ParseError on malformed cells or an empty file and
/// ValidationError when the design check fails.
Dataset load_csv(const std::string& path, const LoadOptions& opts = {});

/// Writes the same layout; floats carry 17 significant digits so a
/// write/load round trip is bit-exact.
void write_csv(const Dataset& ds, const std::string& path);

/// Rows whose (r, y, a) satisfy `pred`, in original order. The result keeps
/// the parent's q even when empty.
Dataset subset(const Dataset& ds,
               const std::function<bool(int r, const std::optional<int>& y,
                                        int a)>& pred);

// Frequent slices.
Dataset source_rows(const Dataset& ds);
Dataset target_rows(const Dataset& ds);
Dataset source_a0(const Dataset& ds);
Dataset source_a1(const Dataset& ds);
Dataset target_a0(const Dataset& ds);
Dataset target_a1(const Dataset& ds);

/// n-by-q feature matrix of the dataset, rows in order.
Eigen::MatrixXd feature_matrix(const Dataset& ds);

/// Labels of a fully labeled dataset; throws ValidationError if any y is
/// absent.
std::vector<int> labels_y(const Dataset& ds);

/// Formats a double with 17 significant digits (round-trip exact).
std::string format_double(double v);

}  // namespace subpop
