#include "mmsc/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace mmsc {

RocCurve roc_auc(const std::vector<double>& scores,
                 const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("roc_auc: scores/labels length mismatch");
  std::size_t pos = 0, neg = 0;
  for (int l : labels) (l ? pos : neg)++;
  if (pos == 0 || neg == 0)
    throw std::invalid_argument("roc_auc: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  RocCurve roc;
  roc.points.emplace_back(0.0, 0.0);
  double tp = 0, fp = 0, auc = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    // Group tied scores so the curve cuts diagonally through ties.
    std::size_t j = i;
    double dtp = 0, dfp = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? dtp : dfp)++;
      ++j;
    }
    double fpr0 = fp / double(neg), tpr0 = tp / double(pos);
    tp += dtp;
    fp += dfp;
    double fpr1 = fp / double(neg), tpr1 = tp / double(pos);
    auc += (fpr1 - fpr0) * (tpr0 + tpr1) * 0.5;
    roc.points.emplace_back(fpr1, tpr1);
    i = j;
  }
  roc.auc = auc;
  return roc;
}

Confusion confusion(const std::vector<double>& scores,
                    const std::vector<int>& labels, double threshold) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("confusion: scores/labels length mismatch");
  if (scores.empty()) throw std::invalid_argument("confusion: empty input");
  long long tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    bool predicted = scores[i] >= threshold;
    if (labels[i]) (predicted ? tp : fn)++;
    else (predicted ? fp : tn)++;
  }
  const double n = double(scores.size());
  Confusion c;
  c.tp = 100.0 * tp / n;
  c.fp = 100.0 * fp / n;
  c.tn = 100.0 * tn / n;
  c.fn = 100.0 * fn / n;
  return c;
}

double mse(const std::vector<float>& pred, const std::vector<float>& target,
           Reduction reduction) {
  if (pred.size() != target.size())
    throw std::invalid_argument("mse: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double d = double(pred[i]) - double(target[i]);
    acc += d * d;
  }
  return reduction == Reduction::Mean ? acc / double(pred.size()) : acc;
}

void write_roc_points(const RocCurve& roc, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open ROC file for write: " + path);
  for (const auto& [fpr, tpr] : roc.points) os << fpr << '\t' << tpr << '\n';
}

}  // namespace mmsc
