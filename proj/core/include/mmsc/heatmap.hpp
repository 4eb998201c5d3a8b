#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mmsc/image.hpp"
#include "mmsc/network.hpp"
#include "mmsc/pipeline.hpp"
#include "mmsc/tissue.hpp"

namespace mmsc {

// Fully convolutional: three conv blocks each ending in a 2x2 maxpool take
// the 256-px input down to 32x32; a small conv head emits one channel.
// with_aux concatenates the 32x32 aggregation channel before the head and
// runs two extra 3x3 convs.
struct HeatmapNetConfig {
  int input_size = 256;
  std::vector<std::pair<int, int>> conv_blocks = {{8, 2}, {16, 2}, {32, 2}};
  int head_channels = 16;
  bool with_aux = false;

  void validate() const;
};

// One training example: 256-px scan, optional aggregation channel, target.
struct HeatmapExample {
  ImageF input;               // 256x256
  std::optional<ImageF> aux;  // 32x32, required by with_aux nets
  ImageF target;              // 32x32
};

struct HeatmapTrainConfig {
  int epochs = 30;
  int batch_size = 4;
  float lr = 0.05f;
  float momentum = 0.9f;
};

struct HeatmapTrainLogEntry {
  int epoch = 0;
  double train_mse_mean = 0.0;   // per-pixel
  double train_mse_sum = 0.0;    // summed over the 32x32 map
  double val_mse_mean = 0.0;
  double val_mse_sum = 0.0;
  double wall_seconds = 0.0;
};

struct HeatmapTrainLog {
  std::vector<HeatmapTrainLogEntry> entries;
};

void write_heatmap_log(const HeatmapTrainLog& log, const std::string& path);

Network build_heatmap_net(const HeatmapNetConfig& config, Rng& rng);

// Annotation mask area-downsampled to 32x32, Gaussian blurred (sigma 1.5)
// and peak-normalized to 1. No annotation yields the zero map.
ImageF make_target(const Scan& scan, int target_side = 32, double sigma = 1.5);

HeatmapTrainLog train_heatmap(Network& net,
                              const std::vector<HeatmapExample>& train,
                              const std::vector<HeatmapExample>& val,
                              const HeatmapTrainConfig& hyper, Rng& rng);

// 32x32 heatmap with values clamped to [0,1]. aux must be present exactly
// when the net carries an aux layer.
ImageF infer_heatmap(const Network& net, const ImageF& scan256,
                     const ImageF* aux = nullptr);

// Binary support mask: cell true (1) iff map >= threshold.
ImageF heat_region(const ImageF& map, double threshold);

// Text header ("MSHM rows cols") + 32-bit LE floats.
void save_heatmap(const ImageF& map, const std::string& path);
ImageF load_heatmap(const std::string& path);

}  // namespace mmsc
