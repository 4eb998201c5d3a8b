#pragma once

#include <string>

#include "mmsc/image.hpp"
#include "mmsc/network.hpp"

namespace mmsc {

// Lattice of tissue-classifier probabilities collected across a scan at a
// fixed stride. Cell (a,b) is the positive-class probability of the patch
// at offset (a*stride, b*stride) in the downsampled base-crop frame.
struct AggregationGrid {
  ImageF values;  // rows x cols of z values in [0,1]
  int stride = 64;
  int patch_size = 0;
  double scale = 0.5;
};

// Slides the classifier over the scan. Grid dims per axis are
// floor((S - P) / stride) + 1. Cells are pure and evaluated independently;
// thread count does not change the result.
AggregationGrid aggregate_local(const Network& net, const ImageF& scan,
                                int stride = 64, int threads = 1,
                                double scale = 0.5);

// Bilinear registration of the grid onto a square channel (default 32x32)
// for the heatmap model's auxiliary input; values clamped to [0,1].
ImageF grid_to_channel(const AggregationGrid& grid, int side = 32);

// Text header ("MSAG rows cols stride patch scale") + 32-bit LE floats.
void save_grid(const AggregationGrid& grid, const std::string& path);
AggregationGrid load_grid(const std::string& path);

void export_grid_pgm(const AggregationGrid& grid, const std::string& path);

}  // namespace mmsc
