#pragma once

#include <string>
#include <vector>

#include "mmsc/metrics.hpp"
#include "mmsc/network.hpp"
#include "mmsc/pipeline.hpp"

namespace mmsc {

// VGG-style stack: per block, `convs` 3x3 convolutions (stride 1, pad 1)
// each followed by relu, then a 2x2 maxpool. Dense head ends in softmax
// over two classes (negative, positive).
struct TissueNetConfig {
  int input_size = 256;
  std::vector<std::pair<int, int>> conv_blocks = {{16, 2}, {32, 2}, {64, 2}, {128, 2}};
  std::vector<int> dense_widths = {256};
  int classes = 2;

  void validate() const;
};

struct TrainLogEntry {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_auc = 0.0;
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<TrainLogEntry> entries;
  int best_epoch = -1;
};

// Persisted log omits wall time so artifacts are byte-stable across runs.
void write_train_log(const TrainLog& log, const std::string& path);

struct TissueTrainConfig {
  int epochs = 10;
  int batch_size = 32;
  float lr = 0.01f;
  float momentum = 0.9f;
  double early_stop_auc = 1.01;  // stop once val AUC reaches this
};

Network build_tissue_net(const TissueNetConfig& config, Rng& rng);

// Infers the expected input side from the layer structure.
int network_input_side(const Network& net);

// Balanced training: every batch holds batch_size/2 positives resampled
// with augmentation and batch_size/2 negatives. Selects the best
// validation-AUC epoch and leaves those weights in `net`.
TrainLog train_tissue(Network& net, const std::vector<Patch>& train_pos,
                      const std::vector<Patch>& train_neg,
                      const std::vector<Patch>& val_pos,
                      const std::vector<Patch>& val_neg,
                      const TissueTrainConfig& hyper, Rng& rng);

// Positive-class probability for one patch.
double predict_patch(const Network& net, const Patch& patch);

struct EvalReport {
  RocCurve roc;
  Confusion conf;
  std::size_t samples = 0;
};

EvalReport evaluate_tissue(const Network& net, const std::vector<Patch>& test,
                           int threads = 1, double threshold = 0.5);

void write_eval_report(const EvalReport& report, const std::string& path);

// Scores patches in index order; pure per patch, parallel across patches.
std::vector<double> score_patches(const Network& net,
                                  const std::vector<Patch>& patches,
                                  int threads);

}  // namespace mmsc
