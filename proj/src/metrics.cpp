// SPDX-License-Identifier: Apache-2.0
#include "dgcn/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "dgcn/tensor.hpp"

namespace dgcn {

double MetricsReport::mean_mae() const {
  if (mae.empty()) return 0.0;
  return std::accumulate(mae.begin(), mae.end(), 0.0) / static_cast<double>(mae.size());
}

std::string MetricsReport::to_text(const std::vector<std::string>& class_names) const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  if (!mae.empty()) {
    os << "MAE per attribute:";
    for (std::size_t a = 0; a < mae.size(); ++a) {
      os << ' ' << (a < class_names.size() ? class_names[a] : "attr" + std::to_string(a)) << '=' << mae[a];
    }
    os << '\n';
    return os.str();
  }
  os << "class        precision  recall     f1         support\n";
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    const auto name = c < class_names.size() ? class_names[c] : std::to_string(c);
    os << std::left << std::setw(13) << name << std::setw(11) << per_class[c].precision
       << std::setw(11) << per_class[c].recall << std::setw(11) << per_class[c].f1
       << per_class[c].support << '\n';
  }
  os << "accuracy " << accuracy << "  weighted F1 " << weighted_f1 << "\nconfusion (rows = gold):\n" << std::right;
  for (const auto& row : confusion) {
    for (auto v : row) os << std::setw(6) << v;
    os << '\n';
  }
  return os.str();
}

MetricsReport score_classification(std::span<const std::size_t> preds,
                                   std::span<const std::size_t> golds, std::size_t num_classes) {
  if (preds.size() != golds.size()) throw Error("score_classification: prediction and gold counts differ");
  if (preds.empty()) throw Error("score_classification: no predictions");
  if (num_classes == 0) throw Error("score_classification: no classes");
  MetricsReport rep;
  rep.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  std::size_t correct = 0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    if (preds[k] >= num_classes || golds[k] >= num_classes) {
      throw Error("score_classification: label " + std::to_string(std::max(preds[k], golds[k])) +
                  " out of range for " + std::to_string(num_classes) + " classes");
    }
    ++rep.confusion[golds[k]][preds[k]];
    correct += preds[k] == golds[k];
  }
  rep.accuracy = static_cast<double>(correct) / static_cast<double>(preds.size());
  rep.per_class.resize(num_classes);
  double weighted = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::size_t tp = rep.confusion[c][c], gold_c = 0, pred_c = 0;
    for (std::size_t k = 0; k < num_classes; ++k) {
      gold_c += rep.confusion[c][k];
      pred_c += rep.confusion[k][c];
    }
    auto& s = rep.per_class[c];
    s.support = gold_c;
    s.precision = pred_c ? static_cast<double>(tp) / static_cast<double>(pred_c) : 0.0;
    s.recall = gold_c ? static_cast<double>(tp) / static_cast<double>(gold_c) : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    weighted += static_cast<double>(gold_c) * s.f1;
  }
  rep.weighted_f1 = weighted / static_cast<double>(preds.size());
  return rep;
}

std::vector<double> score_regression(const std::vector<std::vector<double>>& preds,
                                     const std::vector<std::vector<double>>& golds) {
  if (preds.size() != golds.size()) throw Error("score_regression: prediction and gold counts differ");
  if (preds.empty()) throw Error("score_regression: no predictions");
  const std::size_t attrs = golds.front().size();
  std::vector<double> mae(attrs, 0.0);
  for (std::size_t k = 0; k < preds.size(); ++k) {
    if (preds[k].size() != attrs || golds[k].size() != attrs) {
      throw Error("score_regression: attribute count mismatch at row " + std::to_string(k));
    }
    for (std::size_t a = 0; a < attrs; ++a) mae[a] += std::abs(preds[k][a] - golds[k][a]);
  }
  for (auto& m : mae) m /= static_cast<double>(preds.size());
  return mae;
}

}  // namespace dgcn
