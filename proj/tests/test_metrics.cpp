// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "dgcn/metrics.hpp"
#include "dgcn/tensor.hpp"

using namespace dgcn;

namespace {

// Counts per class directly from the label lists, no confusion matrix.
double oracle_weighted_f1(const std::vector<std::size_t>& p, const std::vector<std::size_t>& g, std::size_t classes) {
  double total = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      tp += p[k] == c && g[k] == c;
      fp += p[k] == c && g[k] != c;
      fn += p[k] != c && g[k] == c;
    }
    const double f1 = tp > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
    total += (tp + fn) * f1;
  }
  return total / static_cast<double>(p.size());
}

}  // namespace

TEST_CASE("perfect predictions") {
  const std::vector<std::size_t> y{0, 2, 1, 2};
  const auto r = score_classification(y, y, 3);
  CHECK(r.accuracy == 1.0);
  CHECK(r.weighted_f1 == 1.0);
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 0; b < 3; ++b) {
      if (a != b) CHECK(r.confusion[a][b] == 0);
    }
  }
}

TEST_CASE("two-class hand example") {
  const std::vector<std::size_t> golds{0, 0, 1, 1}, preds{0, 1, 1, 1};
  const auto r = score_classification(preds, golds, 2);
  CHECK(r.accuracy == 0.75);
  CHECK(r.per_class[0].precision == 1.0);
  CHECK(r.per_class[0].recall == 0.5);
  CHECK(r.per_class[0].f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(r.per_class[1].precision == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(r.per_class[1].recall == 1.0);
  CHECK(r.per_class[1].f1 == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(std::abs(r.weighted_f1 - (2 * (2.0 / 3.0) + 2 * 0.8) / 4) < 1e-12);
  CHECK(r.confusion == std::vector<std::vector<std::size_t>>{{1, 1}, {0, 2}});
}

TEST_CASE("constant predictions on balanced classes") {
  const std::vector<std::size_t> golds{0, 1, 0, 1}, preds{0, 0, 0, 0};
  const auto r = score_classification(preds, golds, 2);
  CHECK(std::abs(r.weighted_f1 - 1.0 / 3.0) < 1e-12);
  CHECK(r.per_class[1].precision == 0.0);
  CHECK(r.per_class[1].f1 == 0.0);
}

TEST_CASE("random pairs agree with a count-based oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t classes = 2 + rng() % 6, n = 1 + rng() % 40;
    std::vector<std::size_t> p(n), g(n);
    for (std::size_t k = 0; k < n; ++k) {
      p[k] = rng() % classes;
      g[k] = rng() % classes;
    }
    const auto r = score_classification(p, g, classes);
    CHECK(std::abs(r.weighted_f1 - oracle_weighted_f1(p, g, classes)) < 1e-12);
    CHECK(r.weighted_f1 >= 0.0);
    CHECK(r.weighted_f1 <= 1.0);
    for (std::size_t c = 0; c < classes; ++c) {
      std::size_t row = 0;
      for (auto v : r.confusion[c]) row += v;
      CHECK(row == r.per_class[c].support);
    }
  }
}

TEST_CASE("invalid inputs") {
  const std::vector<std::size_t> a{0, 1}, b{0};
  CHECK_THROWS_AS(score_classification(a, b, 2), Error);
  CHECK_THROWS_AS(score_classification(a, a, 1), Error);
  CHECK_THROWS_AS(score_classification(std::vector<std::size_t>{}, std::vector<std::size_t>{}, 2), Error);
}

TEST_CASE("regression error per attribute") {
  const std::vector<std::vector<double>> golds{{0.0, 1.0}, {0.5, -1.0}};
  CHECK(score_regression(golds, golds) == std::vector<double>{0.0, 0.0});
  std::vector<std::vector<double>> shifted = golds;
  for (auto& row : shifted) {
    for (auto& v : row) v += 0.1;
  }
  const auto mae = score_regression(shifted, golds);
  CHECK(mae[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(mae[1] == doctest::Approx(0.1).epsilon(1e-12));
  const auto mixed = score_regression({{1.0, 0.0}, {0.0, 0.0}}, {{0.0, 0.0}, {0.0, 3.0}});
  CHECK(mixed == std::vector<double>{0.5, 1.5});
  CHECK_THROWS_AS(score_regression({{1.0}}, {{1.0, 2.0}}), Error);
}

TEST_CASE("text report") {
  const std::vector<std::size_t> y{0, 1, 1};
  const auto text = score_classification(y, y, 2).to_text({"neg", "pos"});
  CHECK(text.find("pos") != std::string::npos);
  CHECK(text.find("weighted F1 1.0000") != std::string::npos);
  MetricsReport reg;
  reg.mae = {0.25, 0.75};
  CHECK(reg.mean_mae() == 0.5);
}
