#pragma once

#include <stdexcept>
#include <string>

#include "mmsc/config.hpp"

namespace mmsc {

// Thrown when a subcommand needs an artifact a previous stage should have
// produced. The CLI maps this to exit code 3.
struct MissingArtifact : std::runtime_error {
  explicit MissingArtifact(const std::string& path)
      : std::runtime_error("missing upstream artifact: " + path) {}
};

// Subcommand bodies shared by the CLI and the acceptance suite. Each writes
// its artifacts to deterministic paths under the config roots and is
// idempotent given identical config + seed.

// Generates `count` synthetic cases (scans + masks + scan index + Table-1
// style split assignment) under data_root.
void cmd_synth(const PipelineConfig& config, int count);

// normalize -> crop -> downsample -> sample positives/negatives per scale;
// writes patch PGMs, the patch manifest and a counts report.
void cmd_patches(const PipelineConfig& config);

void cmd_train_tissue(const PipelineConfig& config, double scale);
void cmd_eval_tissue(const PipelineConfig& config, double scale);

// with_aux requires the x0.5 tissue checkpoint for the aggregation channel.
void cmd_train_heatmap(const PipelineConfig& config, bool with_aux);

// Aggregation grid + heatmap for every test-split case.
void cmd_infer(const PipelineConfig& config, bool with_aux, double scale);

// Gated saliency reconstruction + composite PNGs for every test-split case.
void cmd_saliency(const PipelineConfig& config, bool with_aux, double scale);

// Artifact path helpers (also used by tests).
std::string scan_index_path(const PipelineConfig& config);
std::string patch_manifest_path(const PipelineConfig& config);
std::string tissue_ckpt_path(const PipelineConfig& config, double scale);
std::string heatmap_ckpt_path(const PipelineConfig& config, bool with_aux);
std::string format_scale(double scale);

}  // namespace mmsc
