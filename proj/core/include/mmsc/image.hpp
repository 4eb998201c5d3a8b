#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mmsc {

// Row-major float matrix used for scans, masks, heatmaps and saliency.
struct ImageF {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  ImageF() = default;
  ImageF(int h, int w, float fill = 0.0f)
      : height(h), width(w), data(std::size_t(h) * w, fill) {}

  float& at(int r, int c) { return data[std::size_t(r) * width + c]; }
  float at(int r, int c) const { return data[std::size_t(r) * width + c]; }
  std::size_t size() const { return data.size(); }
  bool same_dims(const ImageF& o) const {
    return height == o.height && width == o.width;
  }
};

// PGM (P5) binary I/O. Values are scaled by maxval to/from [0,1] floats.
// 16-bit payloads are big-endian per the PNM convention.
ImageF read_pgm(const std::string& path);
void write_pgm(const std::string& path, const ImageF& img, int maxval = 65535);

// Minimal 8-bit PNG writer (grayscale or RGB interleaved), zlib-compressed.
void write_png_gray(const std::string& path, const ImageF& img);
void write_png_rgb(const std::string& path, int height, int width,
                   const std::vector<std::uint8_t>& rgb);

ImageF mirror_horizontal(const ImageF& img);

// Area-average resampling to the given output dims (box filter with
// fractional pixel coverage).
ImageF resize_area(const ImageF& img, int out_h, int out_w);

// Area-average downsampling by one of the supported magnification factors;
// output dims = round(dim * factor).
ImageF downsample(const ImageF& img, double factor);

ImageF resize_bilinear(const ImageF& img, int out_h, int out_w);

// Separable Gaussian, kernel radius ceil(3*sigma), edge-replicate padding.
// When the input peak is 1 the output is renormalized to peak 1.
ImageF gaussian_blur(const ImageF& img, double sigma);

}  // namespace mmsc
