#pragma once

#include <string>

#include "mmsc/image.hpp"
#include "mmsc/network.hpp"
#include "mmsc/pipeline.hpp"

namespace mmsc {

// |dH/dx| of the prediction entropy with respect to each input pixel. The
// entropy comes from the model's own softmax output; no labels consumed.
ImageF patch_saliency(const Network& net, const Patch& patch);

struct GatedSaliencyOptions {
  double heat_threshold = 0.25;
  double positive_cutoff = 0.5;
  int stride = 64;
  bool normalize_overlap = false;  // divide by per-pixel contribution count
};

// Slides over the scan at the given stride. A patch contributes iff its
// prediction is positive and its center maps inside the thresholded heat
// support; contributions add at their global offsets and everything outside
// the upsampled support is zeroed.
ImageF gated_saliency(const ImageF& scan, const Network& net,
                      const ImageF& heat, const GatedSaliencyOptions& options);

// 16-bit PGM scaled to the image max, plus raw float payload.
void export_saliency(const ImageF& saliency, const std::string& pgm_path,
                     const std::string& raw_path);

// Scan / saliency-overlay / annotation-contour triptych for eyeballing.
void export_saliency_composite(const ImageF& scan, const ImageF& saliency,
                               const ImageF* annotation,
                               const std::string& png_path);

}  // namespace mmsc
