#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mmsc {

// Plain-text key=value settings, '#' comments, UTF-8.
class KeyValueFile {
 public:
  static KeyValueFile parse_file(const std::string& path);
  static KeyValueFile parse_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  long get_int(const std::string& key, long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  void set(const std::string& key, const std::string& value) {
    values_[key] = value;
  }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct PipelineConfig {
  std::string data_root = "data";
  std::string output_root = "out";
  std::uint64_t seed = 0;  // mandatory in config files

  // Geometry.
  int base_crop = 2048;
  int patch_size = 256;
  std::vector<double> scales = {0.5, 0.33, 0.25};
  int sampling_stride = 32;
  int aggregation_stride = 64;
  int heatmap_input = 256;
  double heat_threshold = 0.25;
  double target_sigma = 1.5;

  // Synthetic generation.
  int synth_size = 2048;
  double synth_contrast = 0.35;
  double synth_positive_frac = 0.5;
  double split_train = 0.7, split_val = 0.1, split_test = 0.2;

  // Patch extraction.
  int negatives_per_scan = 64;  // deterministic subsample of the lattice

  // Tissue training.
  std::string tissue_blocks = "8x1,16x1,32x1,64x1";
  std::string tissue_dense = "64";
  int tissue_epochs = 10;
  int tissue_batch = 16;
  double tissue_lr = 0.01;
  double tissue_momentum = 0.9;

  // Heatmap training.
  std::string heatmap_blocks = "8x1,16x1,32x1";
  int heatmap_head = 16;
  int heatmap_epochs = 30;
  int heatmap_batch = 4;
  double heatmap_lr = 0.05;
  double heatmap_momentum = 0.9;

  int threads = 1;

  static PipelineConfig from_file(const std::string& path);
  static PipelineConfig from_kv(const KeyValueFile& kv);
  void validate() const;
};

std::vector<std::pair<int, int>> parse_blocks(const std::string& spec);
std::vector<int> parse_int_list(const std::string& spec);

}  // namespace mmsc
