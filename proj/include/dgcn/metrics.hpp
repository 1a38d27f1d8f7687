// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

namespace dgcn {

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct MetricsReport {
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  std::vector<ClassScores> per_class;
  std::vector<std::vector<std::size_t>> confusion;  // [gold][pred]
  std::vector<double> mae;                          // regression only

  double mean_mae() const;
  /// Human-readable table of the per-class scores and the confusion matrix.
  std::string to_text(const std::vector<std::string>& class_names = {}) const;
};

/// Precision/recall/F1 per class (0 when a denominator is 0), support-weighted
/// F1, micro accuracy and the confusion matrix.
MetricsReport score_classification(std::span<const std::size_t> preds,
                                   std::span<const std::size_t> golds, std::size_t num_classes);

/// Mean absolute error per attribute over rows of equal length.
std::vector<double> score_regression(const std::vector<std::vector<double>>& preds,
                                     const std::vector<std::vector<double>>& golds);

}  // namespace dgcn
