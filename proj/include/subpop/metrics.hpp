#pragma once

#include <span>

namespace subpop {

/// Fraction of agreeing positions. Throws NumericError on empty or
/// mismatched inputs.
double metric_accuracy(std::span<const int> predicted,
                       std::span<const int> truth);

/// F1 for the positive class: 2TP / (2TP + FP + FN). Returns 0 when the
/// denominator vanishes (no positives predicted or present).
double metric_f1(std::span<const int> predicted, std::span<const int> truth);

}  // namespace subpop
