#include "subpop/metrics.hpp"

#include "subpop/errors.hpp"

namespace subpop {

namespace {

void check_labels(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.empty()) throw NumericError("empty label sequence");
  if (predicted.size() != truth.size()) {
    throw NumericError("prediction and truth lengths differ");
  }
  for (int v : predicted) {
    if (v != 0 && v != 1) throw NumericError("labels must be 0 or 1");
  }
  for (int v : truth) {
    if (v != 0 && v != 1) throw NumericError("labels must be 0 or 1");
  }
}

}  // namespace

double metric_accuracy(std::span<const int> predicted,
                       std::span<const int> truth) {
  check_labels(predicted, truth);
  long hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == truth[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double metric_f1(std::span<const int> predicted, std::span<const int> truth) {
  check_labels(predicted, truth);
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == 1 && truth[i] == 1) ++tp;
    if (predicted[i] == 1 && truth[i] == 0) ++fp;
    if (predicted[i] == 0 && truth[i] == 1) ++fn;
  }
  const long denom = 2 * tp + fp + fn;
  if (denom == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace subpop
