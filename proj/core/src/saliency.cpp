#include "mmsc/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "mmsc/heatmap.hpp"
#include "mmsc/ops.hpp"
#include "mmsc/tissue.hpp"

namespace mmsc {

ImageF patch_saliency(const Network& net, const Patch& patch) {
  const int P = network_input_side(net);
  if (patch.pixels.height != P || patch.pixels.width != P)
    throw std::invalid_argument("patch_saliency: patch size mismatch");
  Graph g;
  Tensor input({1, 1, P, P}, patch.pixels.data, /*requires_grad=*/true);
  Tensor probs = net.forward(g, input);
  Tensor h = entropy_node(g, probs);
  g.backward(h);
  ImageF out(P, P);
  const auto& grad = input.grad();
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data[i] = std::abs(grad[i]);
  return out;
}

ImageF gated_saliency(const ImageF& scan, const Network& net,
                      const ImageF& heat, const GatedSaliencyOptions& options) {
  const int P = network_input_side(net);
  if (scan.height < P || scan.width < P)
    throw std::invalid_argument("gated_saliency: scan smaller than patch size");
  const ImageF support = heat_region(heat, options.heat_threshold);
  ImageF out(scan.height, scan.width, 0.0f);
  ImageF counts(scan.height, scan.width, 0.0f);

  for (int i = 0; i + P <= scan.height; i += options.stride) {
    for (int j = 0; j + P <= scan.width; j += options.stride) {
      Patch p;
      p.pixels = ImageF(P, P);
      for (int r = 0; r < P; ++r)
        for (int c = 0; c < P; ++c) p.pixels.at(r, c) = scan.at(i + r, j + c);
      double z = predict_patch(net, p);
      if (!(z > options.positive_cutoff)) continue;
      int hr = std::min(heat.height - 1,
                        (i + P / 2) * heat.height / scan.height);
      int hc = std::min(heat.width - 1, (j + P / 2) * heat.width / scan.width);
      if (support.at(hr, hc) <= 0.5f) continue;
      ImageF sal = patch_saliency(net, p);
      for (int r = 0; r < P; ++r)
        for (int c = 0; c < P; ++c) {
          out.at(i + r, j + c) += sal.at(r, c);
          counts.at(i + r, j + c) += 1.0f;
        }
    }
  }

  if (options.normalize_overlap)
    for (std::size_t k = 0; k < out.size(); ++k)
      if (counts.data[k] > 0.0f) out.data[k] /= counts.data[k];

  // The heatmap is a tight bound: zero everything outside its support.
  for (int r = 0; r < scan.height; ++r) {
    int hr = std::min(heat.height - 1, r * heat.height / scan.height);
    for (int c = 0; c < scan.width; ++c) {
      int hc = std::min(heat.width - 1, c * heat.width / scan.width);
      if (support.at(hr, hc) <= 0.5f) out.at(r, c) = 0.0f;
    }
  }
  return out;
}

void export_saliency(const ImageF& saliency, const std::string& pgm_path,
                     const std::string& raw_path) {
  float mx = 0.0f;
  for (float v : saliency.data) mx = std::max(mx, v);
  ImageF scaled = saliency;
  if (mx > 0.0f)
    for (auto& v : scaled.data) v /= mx;
  write_pgm(pgm_path, scaled, 65535);

  std::ofstream os(raw_path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open saliency raw for write: " + raw_path);
  char hdr[64];
  std::snprintf(hdr, sizeof(hdr), "MSSL %d %d\n", saliency.height, saliency.width);
  os << hdr;
  os.write(reinterpret_cast<const char*>(saliency.data.data()),
           std::streamsize(saliency.size() * 4));
  if (!os) throw std::runtime_error("saliency write failed: " + raw_path);
}

void export_saliency_composite(const ImageF& scan, const ImageF& saliency,
                               const ImageF* annotation,
                               const std::string& png_path) {
  const int H = scan.height, W = scan.width;
  float smax = 0.0f;
  for (float v : saliency.data) smax = std::max(smax, v);

  // Three panels: scan, scan with saliency in red, annotation contour.
  std::vector<std::uint8_t> rgb(std::size_t(H) * (3 * W) * 3, 0);
  auto put = [&](int r, int c, std::uint8_t rr, std::uint8_t gg, std::uint8_t bb) {
    std::size_t k = (std::size_t(r) * 3 * W + c) * 3;
    rgb[k] = rr;
    rgb[k + 1] = gg;
    rgb[k + 2] = bb;
  };
  auto gray8 = [](float v) {
    return std::uint8_t(std::lround(std::clamp(double(v), 0.0, 1.0) * 255));
  };
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      std::uint8_t g = gray8(scan.at(r, c));
      put(r, c, g, g, g);
      float s = smax > 0 ? saliency.at(r, c) / smax : 0.0f;
      put(r, W + c, std::uint8_t(std::min(255.0, g + 255.0 * s)),
          std::uint8_t(g * (1.0f - 0.6f * s)), std::uint8_t(g * (1.0f - 0.6f * s)));
      bool edge = false;
      if (annotation && annotation->at(r, c) > 0.5f) {
        for (int dr = -1; dr <= 1 && !edge; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            int nr = r + dr, nc = c + dc;
            if (nr < 0 || nr >= H || nc < 0 || nc >= W ||
                annotation->at(nr, nc) <= 0.5f) {
              edge = true;
              break;
            }
          }
      }
      if (edge)
        put(r, 2 * W + c, 0, 255, 0);
      else
        put(r, 2 * W + c, g, g, g);
    }
  }
  write_png_rgb(png_path, H, 3 * W, rgb);
}

}  // namespace mmsc
