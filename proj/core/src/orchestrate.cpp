#include "mmsc/orchestrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "mmsc/aggregation.hpp"
#include "mmsc/heatmap.hpp"
#include "mmsc/image.hpp"
#include "mmsc/metrics.hpp"
#include "mmsc/pipeline.hpp"
#include "mmsc/saliency.hpp"
#include "mmsc/synth.hpp"
#include "mmsc/tissue.hpp"

namespace fs = std::filesystem;

namespace mmsc {

namespace {

// Stage tags for seed derivation.
constexpr std::uint64_t kStageSynth = 1;
constexpr std::uint64_t kStagePatches = 2;
constexpr std::uint64_t kStageTissue = 3;
constexpr std::uint64_t kStageHeatmap = 4;

bool log_info() {
  const char* lvl = std::getenv("MMSC_LOG");
  return lvl && (std::string(lvl) == "info" || std::string(lvl) == "debug");
}

void info(const std::string& msg) {
  if (log_info()) std::cerr << "[mmsc] " << msg << "\n";
}

struct ScanRecord {
  std::string pixels_path;
  std::string mask_path;  // "-" if absent
  std::string case_id;
  Laterality laterality;
  View view;
  int grade;
  std::string split;
};

std::vector<ScanRecord> read_scan_index(const PipelineConfig& config) {
  const std::string path = scan_index_path(config);
  if (!fs::exists(path)) throw MissingArtifact(path);
  std::ifstream is(path);
  std::vector<ScanRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    ScanRecord r;
    std::string lat, view, grade;
    std::getline(ss, r.pixels_path, '\t');
    std::getline(ss, r.mask_path, '\t');
    std::getline(ss, r.case_id, '\t');
    std::getline(ss, lat, '\t');
    std::getline(ss, view, '\t');
    std::getline(ss, grade, '\t');
    std::getline(ss, r.split, '\t');
    r.laterality = lat == "R" ? Laterality::Right : Laterality::Left;
    r.view = view == "MLO" ? View::MLO : View::CC;
    r.grade = std::stoi(grade);
    out.push_back(std::move(r));
  }
  return out;
}

Scan load_scan(const ScanRecord& rec) {
  Scan scan;
  scan.pixels = read_pgm(rec.pixels_path);
  scan.laterality = rec.laterality;
  scan.view = rec.view;
  scan.case_id = rec.case_id;
  scan.grade = rec.grade;
  if (rec.mask_path != "-") scan.annotation = read_pgm(rec.mask_path);
  return scan;
}

ImageF binarize(const ImageF& mask) {
  ImageF out = mask;
  for (auto& v : out.data) v = v > 0.5f ? 1.0f : 0.0f;
  return out;
}

// normalize -> 2048 base crop, with the mask along for the ride.
Scan to_base(const Scan& scan, const PipelineConfig& config) {
  return crop_base(normalize_orientation(scan), config.base_crop);
}

Scan scale_scan(const Scan& base, double scale) {
  Scan out = base;
  out.pixels = downsample(base.pixels, scale);
  if (base.annotation)
    out.annotation = binarize(downsample(*base.annotation, scale));
  return out;
}

Patch load_patch(const ManifestEntry& e) {
  Patch p;
  p.pixels = read_pgm(e.path);
  p.positive = e.positive;
  p.offset_i = e.offset_i;
  p.offset_j = e.offset_j;
  p.scale = e.scale;
  return p;
}

std::vector<Patch> load_split(const DatasetManifest& manifest,
                              const std::string& split, double scale,
                              bool positive) {
  std::vector<Patch> out;
  for (const auto& e : manifest.entries)
    if (e.split == split && std::abs(e.scale - scale) < 1e-9 &&
        e.positive == positive)
      out.push_back(load_patch(e));
  return out;
}

TissueNetConfig tissue_config(const PipelineConfig& config) {
  TissueNetConfig tc;
  tc.input_size = config.patch_size;
  tc.conv_blocks = parse_blocks(config.tissue_blocks);
  tc.dense_widths = parse_int_list(config.tissue_dense);
  return tc;
}

HeatmapNetConfig heatmap_config(const PipelineConfig& config, bool with_aux) {
  HeatmapNetConfig hc;
  hc.input_size = config.heatmap_input;
  hc.conv_blocks = parse_blocks(config.heatmap_blocks);
  hc.head_channels = config.heatmap_head;
  hc.with_aux = with_aux;
  return hc;
}

std::uint64_t scale_tag(double scale) {
  return std::uint64_t(std::lround(scale * 100));
}

// The aggregation channel for one base-cropped scan at x0.5.
ImageF aux_channel(const Network& tissue_net, const Scan& base,
                   const PipelineConfig& config) {
  ImageF half = downsample(base.pixels, 0.5);
  AggregationGrid grid = aggregate_local(tissue_net, half,
                                         config.aggregation_stride,
                                         config.threads, 0.5);
  return grid_to_channel(grid, 32);
}

std::vector<HeatmapExample> build_heatmap_examples(
    const PipelineConfig& config, const std::vector<ScanRecord>& records,
    const std::string& split, const Network* tissue_net) {
  std::vector<HeatmapExample> out;
  for (const auto& rec : records) {
    if (rec.split != split) continue;
    Scan base = to_base(load_scan(rec), config);
    HeatmapExample ex;
    ex.input = resize_area(base.pixels, config.heatmap_input, config.heatmap_input);
    ex.target = make_target(base, 32, config.target_sigma);
    if (tissue_net) ex.aux = aux_channel(*tissue_net, base, config);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

std::string format_scale(double scale) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", scale);
  return buf;
}

std::string scan_index_path(const PipelineConfig& config) {
  return config.data_root + "/scans.tsv";
}

std::string patch_manifest_path(const PipelineConfig& config) {
  return config.output_root + "/patches/manifest.tsv";
}

std::string tissue_ckpt_path(const PipelineConfig& config, double scale) {
  return config.output_root + "/models/tissue_s" + format_scale(scale) + ".ckpt";
}

std::string heatmap_ckpt_path(const PipelineConfig& config, bool with_aux) {
  return config.output_root + "/models/heatmap_" +
         (with_aux ? std::string("aux") : std::string("base")) + ".ckpt";
}

void cmd_synth(const PipelineConfig& config, int count) {
  if (count < 0) throw std::runtime_error("synth: count must be >= 0");
  fs::create_directories(config.data_root + "/scans");
  Rng stage = Rng(config.seed).derive(kStageSynth);

  const int n_train = int(std::lround(count * config.split_train));
  const int n_val = int(std::lround(count * config.split_val));

  std::ofstream index(scan_index_path(config));
  if (!index)
    throw std::runtime_error("cannot write scan index: " + scan_index_path(config));

  long positives_so_far = 0;
  for (int i = 0; i < count; ++i) {
    Rng crng = stage.derive(std::uint64_t(i) + 1);
    // Bresenham-style interleave keeps both classes in every split.
    bool positive =
        std::llround((i + 1) * config.synth_positive_frac) > positives_so_far;
    if (positive) ++positives_so_far;

    SynthParams params;
    params.height = params.width = config.synth_size;
    params.lesion_count = positive ? crng.uniform_int(1, 3) : 0;
    params.contrast = config.synth_contrast;
    params.laterality = crng.bernoulli(0.5) ? Laterality::Right : Laterality::Left;
    char cid[32];
    std::snprintf(cid, sizeof(cid), "case%04d", i);
    params.case_id = cid;
    // Lesions scaled so they survive the coarsest magnification.
    params.lesion_radius_min = std::max(8.0, config.synth_size * 0.02);
    params.lesion_radius_max = std::max(16.0, config.synth_size * 0.045);

    Scan scan = generate_synthetic_case(crng, params);
    std::string px = config.data_root + "/scans/" + params.case_id + ".pgm";
    std::string mk = "-";
    write_pgm(px, scan.pixels, 65535);
    if (scan.annotation) {
      mk = config.data_root + "/scans/" + params.case_id + "_mask.pgm";
      write_pgm(mk, *scan.annotation, 255);
    }
    std::string split = i < n_train ? "train" : (i < n_train + n_val ? "val" : "test");
    index << px << '\t' << mk << '\t' << params.case_id << '\t'
          << (scan.laterality == Laterality::Right ? "R" : "L") << '\t'
          << (scan.view == View::MLO ? "MLO" : "CC") << '\t' << scan.grade
          << '\t' << split << '\n';
    info("synth " + params.case_id + " lesions=" +
         std::to_string(params.lesion_count) + " split=" + split);
  }
}

void cmd_patches(const PipelineConfig& config) {
  auto records = read_scan_index(config);
  fs::create_directories(config.output_root + "/patches");
  DatasetManifest manifest;
  // counts[scale][split] = {pos, neg}
  std::map<std::string, std::map<std::string, std::pair<long, long>>> counts;

  for (const auto& rec : records) {
    if (rec.grade >= 2 && rec.mask_path == "-") {
      std::cerr << "[mmsc] warning: case " << rec.case_id
                << " graded >= 2 but has no mask, skipping\n";
      continue;
    }
    Scan base = to_base(load_scan(rec), config);
    for (double scale : config.scales) {
      Scan scaled = scale_scan(base, scale);
      std::string sdir =
          config.output_root + "/patches/s" + format_scale(scale);
      fs::create_directories(sdir);

      std::vector<Patch> pos;
      if (scaled.has_findings())
        pos = sample_positive_patches(scaled, config.patch_size, scale);
      std::vector<Patch> neg = sample_negative_patches(
          scaled, config.patch_size, scale, config.sampling_stride);
      // Deterministic even-spaced subsample of the lattice at desk scale.
      if (int(neg.size()) > config.negatives_per_scan) {
        std::vector<Patch> kept;
        for (int k = 0; k < config.negatives_per_scan; ++k)
          kept.push_back(neg[std::size_t(k) * neg.size() /
                             std::size_t(config.negatives_per_scan)]);
        neg = std::move(kept);
      }

      auto emit = [&](const Patch& p, int idx) {
        char name[96];
        std::snprintf(name, sizeof(name), "%s/%s_%c%03d.pgm", sdir.c_str(),
                      rec.case_id.c_str(), p.positive ? 'p' : 'n', idx);
        write_pgm(name, p.pixels, 65535);
        ManifestEntry e;
        e.path = name;
        e.positive = p.positive;
        e.offset_i = p.offset_i;
        e.offset_j = p.offset_j;
        e.scale = scale;
        e.case_id = rec.case_id;
        e.split = rec.split;
        manifest.entries.push_back(std::move(e));
      };
      int idx = 0;
      for (const Patch& p : pos) emit(p, idx++);
      idx = 0;
      for (const Patch& p : neg) emit(p, idx++);
      auto& cc = counts[format_scale(scale)][rec.split];
      cc.first += long(pos.size());
      cc.second += long(neg.size());
    }
    info("patches " + rec.case_id);
  }

  manifest.check_split_hygiene();
  write_manifest(manifest, patch_manifest_path(config));

  std::ofstream report(config.output_root + "/patches/counts.txt");
  report << "Tissue patch counts (findings positive / negative)\n";
  for (const auto& [scale, splits] : counts) {
    report << "scale x" << scale << "\n";
    for (const char* split : {"train", "val", "test"}) {
      auto it = splits.find(split);
      long p = it == splits.end() ? 0 : it->second.first;
      long n = it == splits.end() ? 0 : it->second.second;
      report << "  " << split << "\t" << p << " / " << n << "\n";
    }
  }
}

void cmd_train_tissue(const PipelineConfig& config, double scale) {
  if (!fs::exists(patch_manifest_path(config)))
    throw MissingArtifact(patch_manifest_path(config));
  DatasetManifest manifest = read_manifest(patch_manifest_path(config));
  auto train_pos = load_split(manifest, "train", scale, true);
  auto train_neg = load_split(manifest, "train", scale, false);
  auto val_pos = load_split(manifest, "val", scale, true);
  auto val_neg = load_split(manifest, "val", scale, false);

  Rng rng = Rng(config.seed).derive(kStageTissue).derive(scale_tag(scale));
  Network net = build_tissue_net(tissue_config(config), rng);

  TissueTrainConfig hyper;
  hyper.epochs = config.tissue_epochs;
  hyper.batch_size = config.tissue_batch;
  hyper.lr = float(config.tissue_lr);
  hyper.momentum = float(config.tissue_momentum);

  Rng trng = rng.derive(2);
  TrainLog log = train_tissue(net, train_pos, train_neg, val_pos, val_neg,
                              hyper, trng);
  fs::create_directories(config.output_root + "/models");
  save_checkpoint(net, tissue_ckpt_path(config, scale));
  write_train_log(log, config.output_root + "/models/tissue_s" +
                           format_scale(scale) + "_log.tsv");
  info("trained tissue x" + format_scale(scale) + ", best epoch " +
       std::to_string(log.best_epoch));
}

void cmd_eval_tissue(const PipelineConfig& config, double scale) {
  if (!fs::exists(tissue_ckpt_path(config, scale)))
    throw MissingArtifact(tissue_ckpt_path(config, scale));
  if (!fs::exists(patch_manifest_path(config)))
    throw MissingArtifact(patch_manifest_path(config));
  Network net = load_checkpoint(tissue_ckpt_path(config, scale));
  DatasetManifest manifest = read_manifest(patch_manifest_path(config));
  auto test_pos = load_split(manifest, "test", scale, true);
  auto test_neg = load_split(manifest, "test", scale, false);
  std::vector<Patch> test = std::move(test_pos);
  test.insert(test.end(), test_neg.begin(), test_neg.end());

  EvalReport report = evaluate_tissue(net, test, config.threads);
  fs::create_directories(config.output_root + "/reports");
  std::string stem = config.output_root + "/reports/tissue_s" + format_scale(scale);
  write_eval_report(report, stem + "_report.txt");
  write_roc_points(report.roc, stem + "_roc.tsv");
  info("eval tissue x" + format_scale(scale) + " auc=" +
       std::to_string(report.roc.auc));
}

void cmd_train_heatmap(const PipelineConfig& config, bool with_aux) {
  auto records = read_scan_index(config);
  Network tissue_net;
  const Network* tissue_ptr = nullptr;
  if (with_aux) {
    if (!fs::exists(tissue_ckpt_path(config, 0.5)))
      throw MissingArtifact(tissue_ckpt_path(config, 0.5));
    tissue_net = load_checkpoint(tissue_ckpt_path(config, 0.5));
    tissue_ptr = &tissue_net;
  }
  auto train = build_heatmap_examples(config, records, "train", tissue_ptr);
  auto val = build_heatmap_examples(config, records, "val", tissue_ptr);

  Rng rng = Rng(config.seed).derive(kStageHeatmap).derive(with_aux ? 2 : 1);
  Network net = build_heatmap_net(heatmap_config(config, with_aux), rng);

  HeatmapTrainConfig hyper;
  hyper.epochs = config.heatmap_epochs;
  hyper.batch_size = config.heatmap_batch;
  hyper.lr = float(config.heatmap_lr);
  hyper.momentum = float(config.heatmap_momentum);

  Rng trng = rng.derive(2);
  HeatmapTrainLog log = train_heatmap(net, train, val, hyper, trng);
  fs::create_directories(config.output_root + "/models");
  save_checkpoint(net, heatmap_ckpt_path(config, with_aux));
  write_heatmap_log(log, config.output_root + "/models/heatmap_" +
                             (with_aux ? std::string("aux") : std::string("base")) +
                             "_log.tsv");
}

void cmd_infer(const PipelineConfig& config, bool with_aux, double scale) {
  auto records = read_scan_index(config);
  if (!fs::exists(heatmap_ckpt_path(config, with_aux)))
    throw MissingArtifact(heatmap_ckpt_path(config, with_aux));
  Network heat_net = load_checkpoint(heatmap_ckpt_path(config, with_aux));
  Network tissue_net;
  if (with_aux) {
    if (!fs::exists(tissue_ckpt_path(config, 0.5)))
      throw MissingArtifact(tissue_ckpt_path(config, 0.5));
    tissue_net = load_checkpoint(tissue_ckpt_path(config, 0.5));
  }
  fs::create_directories(config.output_root + "/heatmaps");
  fs::create_directories(config.output_root + "/grids");

  for (const auto& rec : records) {
    if (rec.split != "test") continue;
    Scan base = to_base(load_scan(rec), config);
    ImageF input =
        resize_area(base.pixels, config.heatmap_input, config.heatmap_input);
    ImageF heat;
    if (with_aux) {
      ImageF half = downsample(base.pixels, 0.5);
      AggregationGrid grid = aggregate_local(
          tissue_net, half, config.aggregation_stride, config.threads, 0.5);
      save_grid(grid, config.output_root + "/grids/" + rec.case_id + ".bin");
      export_grid_pgm(grid,
                      config.output_root + "/grids/" + rec.case_id + ".pgm");
      ImageF channel = grid_to_channel(grid, 32);
      heat = infer_heatmap(heat_net, input, &channel);
    } else {
      heat = infer_heatmap(heat_net, input);
    }
    save_heatmap(heat, config.output_root + "/heatmaps/" + rec.case_id + ".bin");
    write_pgm(config.output_root + "/heatmaps/" + rec.case_id + ".pgm", heat, 255);
    info("infer " + rec.case_id);
  }
  (void)scale;
}

void cmd_saliency(const PipelineConfig& config, bool with_aux, double scale) {
  auto records = read_scan_index(config);
  if (!fs::exists(tissue_ckpt_path(config, scale)))
    throw MissingArtifact(tissue_ckpt_path(config, scale));
  Network tissue_net = load_checkpoint(tissue_ckpt_path(config, scale));
  fs::create_directories(config.output_root + "/saliency");

  GatedSaliencyOptions options;
  options.heat_threshold = config.heat_threshold;
  options.stride = config.aggregation_stride;

  for (const auto& rec : records) {
    if (rec.split != "test") continue;
    std::string heat_path =
        config.output_root + "/heatmaps/" + rec.case_id + ".bin";
    if (!fs::exists(heat_path)) throw MissingArtifact(heat_path);
    ImageF heat = load_heatmap(heat_path);

    Scan base = to_base(load_scan(rec), config);
    Scan scaled = scale_scan(base, scale);
    ImageF sal = gated_saliency(scaled.pixels, tissue_net, heat, options);

    std::string stem = config.output_root + "/saliency/" + rec.case_id;
    export_saliency(sal, stem + ".pgm", stem + ".bin");
    export_saliency_composite(
        scaled.pixels, sal,
        scaled.annotation ? &*scaled.annotation : nullptr, stem + ".png");
    info("saliency " + rec.case_id);
  }
  (void)with_aux;
}

}  // namespace mmsc
