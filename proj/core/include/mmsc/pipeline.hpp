#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mmsc/image.hpp"
#include "mmsc/rng.hpp"

namespace mmsc {

enum class Laterality { Left, Right };
enum class View { CC, MLO };

// Full-resolution grayscale scan in [0,1] with optional annotation mask
// (0/1 values, same dims) and its assessment grade 0..5. A grade is present
// iff the mask is present.
struct Scan {
  ImageF pixels;
  Laterality laterality = Laterality::Left;
  View view = View::CC;
  std::string case_id;
  std::optional<ImageF> annotation;
  int grade = 0;

  bool has_findings() const { return annotation.has_value() && grade >= 2; }
};

// Fixed-size tile in [0,1] with its source offset in the (downsampled)
// base-crop frame and the magnification it was sampled at.
struct Patch {
  ImageF pixels;
  bool positive = false;
  int offset_i = 0;  // row
  int offset_j = 0;  // col
  double scale = 0.5;
};

struct ManifestEntry {
  std::string path;
  bool positive = false;
  int offset_i = 0;
  int offset_j = 0;
  double scale = 0.5;
  std::string case_id;
  std::string split;  // train | val | test
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> split(const std::string& name) const;
  // No case may appear in more than one split.
  void check_split_hygiene() const;
};

void write_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

// Mirrors right-laterality scans (and their masks) horizontally so breast
// tissue touches the right edge. Left scans pass through unchanged.
Scan normalize_orientation(const Scan& scan);

// 2048x2048 crop right-aligned on the nipple proxy (rightmost tissue column
// at intensity > 10% of max; proxy row is the centroid of that column's
// tissue run), vertically centered on the proxy row. Zero-padded where the
// window leaves the scan. Mask cropped identically.
Scan crop_base(const Scan& scan, int crop_size = 2048);

// One positive patch per connected mask component, centered on its center
// of mass and clamped to bounds. Components whose bounding box exceeds the
// patch size on either axis are skipped. Requires grade >= 2.
std::vector<Patch> sample_positive_patches(const Scan& scan, int patch_size,
                                           double scale);

// Stride-32 lattice of negative patches; a patch is kept iff its footprint
// has zero overlap with the annotation mask. No tissue-content filter.
std::vector<Patch> sample_negative_patches(const Scan& scan, int patch_size,
                                           double scale, int stride = 32);

// Augmentation draws, applied in order: brightness scale, right-angle
// rotation, integer offset with edge clamp, horizontal flip, crop-and-resize
// keeping >= 87.5% of each side.
struct AugmentParams {
  double brightness = 1.0;   // in [0.8, 1.2]
  int rotation_quarters = 0; // 0..3
  int offset_r = 0;          // in [-16, 16]
  int offset_c = 0;
  bool hflip = false;
  double crop_frac = 1.0;    // in [0.875, 1]
  double crop_pos_r = 0.0;   // in [0, 1], position of the crop window
  double crop_pos_c = 0.0;

  static AugmentParams identity() { return AugmentParams{}; }
};

AugmentParams draw_augment_params(Rng& rng);
Patch apply_augment(const Patch& patch, const AugmentParams& params);
Patch augment(const Patch& patch, Rng& rng);

}  // namespace mmsc
