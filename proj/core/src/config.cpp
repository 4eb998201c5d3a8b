#include "mmsc/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mmsc {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueFile KeyValueFile::parse_string(const std::string& text) {
  KeyValueFile kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected key=value");
    kv.values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_string(buf.str());
}

std::string KeyValueFile::get(const std::string& key,
                              const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

long KeyValueFile::get_int(const std::string& key, long fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : std::stol(it->second);
}

double KeyValueFile::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : std::stod(it->second);
}

bool KeyValueFile::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  return it->second == "1" || it->second == "true" || it->second == "yes";
}

std::vector<std::pair<int, int>> parse_blocks(const std::string& spec) {
  // "8x2,16x2" -> {{8,2},{16,2}}
  std::vector<std::pair<int, int>> blocks;
  std::istringstream is(spec);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    std::size_t x = tok.find('x');
    if (x == std::string::npos)
      throw std::invalid_argument("bad block spec '" + tok + "' (want FILTERSxCONVS)");
    blocks.emplace_back(std::stoi(tok.substr(0, x)), std::stoi(tok.substr(x + 1)));
  }
  if (blocks.empty()) throw std::invalid_argument("empty block spec");
  return blocks;
}

std::vector<int> parse_int_list(const std::string& spec) {
  std::vector<int> out;
  std::istringstream is(spec);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(std::stoi(tok));
  }
  return out;
}

PipelineConfig PipelineConfig::from_kv(const KeyValueFile& kv) {
  PipelineConfig c;
  if (!kv.has("seed"))
    throw std::invalid_argument("config: 'seed' is mandatory");
  c.seed = std::uint64_t(kv.get_int("seed", 0));
  c.data_root = kv.get("data_root", c.data_root);
  c.output_root = kv.get("output_root", c.output_root);
  c.base_crop = int(kv.get_int("base_crop", c.base_crop));
  c.patch_size = int(kv.get_int("patch_size", c.patch_size));
  if (kv.has("scales")) {
    c.scales.clear();
    std::istringstream is(kv.get("scales", ""));
    std::string tok;
    while (std::getline(is, tok, ',')) c.scales.push_back(std::stod(tok));
  }
  c.sampling_stride = int(kv.get_int("sampling_stride", c.sampling_stride));
  c.aggregation_stride =
      int(kv.get_int("aggregation_stride", c.aggregation_stride));
  c.heatmap_input = int(kv.get_int("heatmap_input", c.heatmap_input));
  c.heat_threshold = kv.get_double("heat_threshold", c.heat_threshold);
  c.target_sigma = kv.get_double("target_sigma", c.target_sigma);
  c.synth_size = int(kv.get_int("synth_size", c.synth_size));
  c.synth_contrast = kv.get_double("synth_contrast", c.synth_contrast);
  c.synth_positive_frac =
      kv.get_double("synth_positive_frac", c.synth_positive_frac);
  c.split_train = kv.get_double("split_train", c.split_train);
  c.split_val = kv.get_double("split_val", c.split_val);
  c.split_test = kv.get_double("split_test", c.split_test);
  c.negatives_per_scan =
      int(kv.get_int("negatives_per_scan", c.negatives_per_scan));
  c.tissue_blocks = kv.get("tissue_blocks", c.tissue_blocks);
  c.tissue_dense = kv.get("tissue_dense", c.tissue_dense);
  c.tissue_epochs = int(kv.get_int("tissue_epochs", c.tissue_epochs));
  c.tissue_batch = int(kv.get_int("tissue_batch", c.tissue_batch));
  c.tissue_lr = kv.get_double("tissue_lr", c.tissue_lr);
  c.tissue_momentum = kv.get_double("tissue_momentum", c.tissue_momentum);
  c.heatmap_blocks = kv.get("heatmap_blocks", c.heatmap_blocks);
  c.heatmap_head = int(kv.get_int("heatmap_head", c.heatmap_head));
  c.heatmap_epochs = int(kv.get_int("heatmap_epochs", c.heatmap_epochs));
  c.heatmap_batch = int(kv.get_int("heatmap_batch", c.heatmap_batch));
  c.heatmap_lr = kv.get_double("heatmap_lr", c.heatmap_lr);
  c.heatmap_momentum = kv.get_double("heatmap_momentum", c.heatmap_momentum);
  c.threads = int(kv.get_int("threads", c.threads));
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
  return from_kv(KeyValueFile::parse_file(path));
}

void PipelineConfig::validate() const {
  if (sampling_stride <= 0 || aggregation_stride <= 0)
    throw std::invalid_argument("config: strides must be positive");
  if (patch_size <= 0) throw std::invalid_argument("config: patch_size must be positive");
  if (scales.empty()) throw std::invalid_argument("config: scales must be nonempty");
  for (double s : scales) {
    bool ok = false;
    for (double a : {0.5, 0.33, 0.25}) ok = ok || std::abs(s - a) < 1e-9;
    if (!ok)
      throw std::invalid_argument("config: scales must be drawn from 0.5/0.33/0.25");
  }
  if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
  if (!(heat_threshold > 0.0 && heat_threshold < 1.0))
    throw std::invalid_argument("config: heat_threshold must be in (0,1)");
}

}  // namespace mmsc
