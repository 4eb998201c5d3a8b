#pragma once

#include <string>
#include <vector>

namespace mmsc {

// ROC points ordered from (0,0) to (1,1); AUC by the trapezoidal rule with
// tied scores grouped (equivalent to half-credit pairwise ranking).
struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr)
  double auc = 0.0;
};

RocCurve roc_auc(const std::vector<double>& scores,
                 const std::vector<int>& labels);

// Confusion breakdown at a threshold, as percentages of the full sample.
struct Confusion {
  double tp = 0, fp = 0, tn = 0, fn = 0;
  double total_error() const { return fp + fn; }
};

Confusion confusion(const std::vector<double>& scores,
                    const std::vector<int>& labels, double threshold = 0.5);

enum class Reduction { Mean, Sum };

double mse(const std::vector<float>& pred, const std::vector<float>& target,
           Reduction reduction = Reduction::Mean);

void write_roc_points(const RocCurve& roc, const std::string& path);

}  // namespace mmsc
