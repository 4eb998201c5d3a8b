#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "mmsc/metrics.hpp"
#include "mmsc/rng.hpp"

using namespace mmsc;

namespace {

// Independent AUC oracle: pairwise Mann-Whitney with half credit for ties.
double pairwise_auc(const std::vector<double>& scores,
                    const std::vector<int>& labels) {
  double wins = 0.0;
  long long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / double(pairs);
}

}  // namespace

TEST_CASE("roc_auc separable, random and anti-correlated extremes") {
  CHECK(roc_auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}).auc == doctest::Approx(1.0));
  CHECK(roc_auc({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1}).auc == doctest::Approx(0.0));
  // All scores tied: chance level.
  CHECK(roc_auc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}).auc == doctest::Approx(0.5));
}

TEST_CASE("roc_auc on the worked 0.75 example") {
  // Positives {0.9, 0.4}, negatives {0.6, 0.1}: 3 of 4 pairs ranked
  // correctly.
  std::vector<double> s{0.9, 0.4, 0.6, 0.1};
  std::vector<int> l{1, 1, 0, 0};
  RocCurve roc = roc_auc(s, l);
  CHECK(roc.auc == doctest::Approx(0.75));
  CHECK(pairwise_auc(s, l) == doctest::Approx(0.75));
  // Curve endpoints.
  CHECK(roc.points.front().first == doctest::Approx(0.0));
  CHECK(roc.points.front().second == doctest::Approx(0.0));
  CHECK(roc.points.back().first == doctest::Approx(1.0));
  CHECK(roc.points.back().second == doctest::Approx(1.0));
}

TEST_CASE("trapezoidal AUC equals pairwise ranking, ties included") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> scores;
    std::vector<int> labels;
    int n = 30 + trial;
    for (int i = 0; i < n; ++i) {
      // Quantized scores force plenty of ties.
      scores.push_back(rng.uniform_int(0, 9) / 10.0);
      labels.push_back(rng.bernoulli(0.4) ? 1 : 0);
    }
    // Guarantee both classes.
    labels[0] = 0;
    labels[1] = 1;
    CHECK(roc_auc(scores, labels).auc ==
          doctest::Approx(pairwise_auc(scores, labels)).epsilon(1e-9));
  }
}

TEST_CASE("AUC is invariant under monotone score transforms") {
  Rng rng(13);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 50; ++i) {
    scores.push_back(rng.uniform(0.0, 1.0));
    labels.push_back(rng.bernoulli(0.5) ? 1 : 0);
  }
  labels[0] = 0;
  labels[1] = 1;
  double base = roc_auc(scores, labels).auc;
  std::vector<double> warped;
  for (double v : scores) warped.push_back(std::exp(3.0 * v) - 2.0);
  CHECK(roc_auc(warped, labels).auc == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("roc_auc rejects degenerate inputs") {
  CHECK_THROWS_AS(roc_auc({0.5, 0.6}, {1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(roc_auc({0.5, 0.6}, {0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(roc_auc({0.5}, {0, 1}), std::invalid_argument);
}

TEST_CASE("confusion percentages sum to 100 and split correctly") {
  std::vector<double> s{0.9, 0.4, 0.6, 0.1};
  std::vector<int> l{1, 1, 0, 0};
  Confusion c = confusion(s, l, 0.5);
  CHECK(c.tp == doctest::Approx(25.0));
  CHECK(c.fn == doctest::Approx(25.0));
  CHECK(c.fp == doctest::Approx(25.0));
  CHECK(c.tn == doctest::Approx(25.0));
  CHECK(c.tp + c.fp + c.tn + c.fn == doctest::Approx(100.0));
  CHECK(c.total_error() == doctest::Approx(50.0));
}

TEST_CASE("reference confusion rows stay internally consistent") {
  // Published-style breakdowns (percent): each row's error column must
  // equal fp + fn and the four cells of a full table sum to 100.
  struct Row {
    double tp, fp, fn, err;
  };
  const Row rows[] = {
      {47.7, 9.0, 2.3, 11.3},
      {29.7, 3.9, 20.3, 24.2},
      {33.6, 6.3, 16.4, 22.7},
  };
  const double tns[] = {41.0, 46.0, 43.8};
  for (int i = 0; i < 3; ++i) {
    CHECK(rows[i].fp + rows[i].fn == doctest::Approx(rows[i].err).epsilon(1e-9));
    // Cells are rounded to one decimal, so rows sum to 100 within 0.2.
    CHECK(std::abs(rows[i].tp + rows[i].fp + tns[i] + rows[i].fn - 100.0) <=
          0.2);
  }
}

TEST_CASE("mse mean and sum reductions") {
  std::vector<float> pred{1.0f, 2.0f, 3.0f};
  std::vector<float> tgt{1.0f, 0.0f, 0.0f};
  CHECK(mse(pred, tgt, Reduction::Sum) == doctest::Approx(13.0));
  CHECK(mse(pred, tgt, Reduction::Mean) == doctest::Approx(13.0 / 3.0));
  CHECK(mse(pred, pred) == doctest::Approx(0.0));
  // Mean and sum differ by exactly the element count.
  CHECK(mse(pred, tgt, Reduction::Sum) ==
        doctest::Approx(3.0 * mse(pred, tgt, Reduction::Mean)));
}
