#include "mmsc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mmsc {

void SynthParams::validate() const {
  if (height <= 0 || width <= 0)
    throw std::invalid_argument("synth: dims must be positive");
  if (lesion_count < 0)
    throw std::invalid_argument("synth: lesion count must be >= 0");
  if (!(contrast > 0.0 && contrast <= 1.0))
    throw std::invalid_argument("synth: contrast must be in (0,1]");
  if (lesion_radius_min <= 0 || lesion_radius_max < lesion_radius_min)
    throw std::invalid_argument("synth: bad lesion radius range");
}

namespace {

// Bilinearly interpolated lattice noise, a few octaves.
ImageF value_noise(Rng& rng, int h, int w, int base_cell, int octaves) {
  ImageF out(h, w, 0.0f);
  double amp = 1.0, amp_total = 0.0;
  for (int oct = 0; oct < octaves; ++oct) {
    int cell = std::max(2, base_cell >> oct);
    int gh = h / cell + 2, gw = w / cell + 2;
    std::vector<double> lattice(std::size_t(gh) * gw);
    for (auto& v : lattice) v = rng.uniform(-1.0, 1.0);
    for (int r = 0; r < h; ++r) {
      double fy = double(r) / cell;
      int y0 = int(fy);
      double wy = fy - y0;
      for (int c = 0; c < w; ++c) {
        double fx = double(c) / cell;
        int x0 = int(fx);
        double wx = fx - x0;
        const double* row0 = lattice.data() + std::size_t(y0) * gw;
        const double* row1 = row0 + gw;
        double v = (1 - wy) * ((1 - wx) * row0[x0] + wx * row0[x0 + 1]) +
                   wy * ((1 - wx) * row1[x0] + wx * row1[x0 + 1]);
        out.at(r, c) += float(amp * v);
      }
    }
    amp_total += amp;
    amp *= 0.5;
  }
  for (auto& v : out.data) v = float(v / amp_total);
  return out;
}

struct Lesion {
  double cr, cc, radius, aspect, angle, spik_amp;
  int spik_lobes;
  // Spiculated boundary: radius modulated around the ellipse.
  bool contains(double r, double c) const {
    double dr = r - cr, dc = c - cc;
    double ca = std::cos(angle), sa = std::sin(angle);
    double u = ca * dc + sa * dr, v = -sa * dc + ca * dr;
    u /= aspect;
    double d = std::hypot(u, v);
    if (d < 1e-9) return true;
    double theta = std::atan2(v, u);
    double rb = radius * (1.0 + spik_amp * std::sin(spik_lobes * theta));
    return d <= rb;
  }
  double boundary_frac(double r, double c) const {
    double dr = r - cr, dc = c - cc;
    double ca = std::cos(angle), sa = std::sin(angle);
    double u = ca * dc + sa * dr, v = -sa * dc + ca * dr;
    u /= aspect;
    double d = std::hypot(u, v);
    double theta = std::atan2(v, u);
    double rb = radius * (1.0 + spik_amp * std::sin(spik_lobes * theta));
    return d / std::max(rb, 1e-9);
  }
};

}  // namespace

Scan generate_synthetic_case(Rng& rng, const SynthParams& params) {
  params.validate();
  const int H = params.height, W = params.width;

  // Tissue: half-ellipse opening to the right edge.
  const double cy = H * rng.uniform(0.45, 0.55);
  const double ry = H * rng.uniform(0.38, 0.46);
  const double rx = W * rng.uniform(0.58, 0.72);
  auto tissue_dist = [&](double r, double c) {
    double dy = (r - cy) / ry, dx = (double(W - 1) - c) / rx;
    return dy * dy + dx * dx;  // < 1 inside
  };

  ImageF noise = value_noise(rng, H, W, std::max(8, H / 16), 3);
  ImageF img(H, W, 0.0f);
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      double d = tissue_dist(r, c);
      if (d >= 1.0) continue;
      double body = 0.30 + 0.25 * (1.0 - d);  // brighter toward chest wall
      double v = body + params.texture_amp * noise.at(r, c);
      img.at(r, c) = float(std::clamp(v, 0.02, 0.62));
    }
  }

  Scan scan;
  scan.laterality = params.laterality;
  scan.view = params.view;
  scan.case_id = params.case_id;

  if (params.lesion_count > 0) {
    std::vector<Lesion> lesions;
    int attempts = 0;
    while (int(lesions.size()) < params.lesion_count && attempts < 10000) {
      ++attempts;
      Lesion l;
      l.radius = rng.uniform(params.lesion_radius_min, params.lesion_radius_max);
      l.cr = rng.uniform(0.0, double(H - 1));
      l.cc = rng.uniform(0.0, double(W - 1));
      l.aspect = rng.uniform(0.8, 1.4);
      l.angle = rng.uniform(0.0, 3.14159265358979);
      if (rng.bernoulli(params.spiculated_prob)) {
        l.spik_amp = rng.uniform(0.1, 0.22);
        l.spik_lobes = rng.uniform_int(5, 9);
      } else {
        l.spik_amp = 0.0;
        l.spik_lobes = 1;
      }
      double margin = l.radius * (1.0 + l.spik_amp) * std::max(1.0, l.aspect);
      // Fully inside the tissue ellipse and inside image bounds.
      if (l.cr - margin < 0 || l.cr + margin >= H || l.cc - margin < 0 ||
          l.cc + margin >= W)
        continue;
      if (tissue_dist(l.cr - margin, l.cc) >= 0.8 ||
          tissue_dist(l.cr + margin, l.cc) >= 0.8 ||
          tissue_dist(l.cr, l.cc - margin) >= 0.8 ||
          tissue_dist(l.cr, l.cc + margin) >= 0.8)
        continue;
      bool overlap = false;
      for (const Lesion& o : lesions) {
        double omargin = o.radius * (1.0 + o.spik_amp) * std::max(1.0, o.aspect);
        if (std::hypot(l.cr - o.cr, l.cc - o.cc) < margin + omargin + 8)
          overlap = true;
      }
      if (!overlap) lesions.push_back(l);
    }
    if (int(lesions.size()) < params.lesion_count)
      throw std::runtime_error("synth: could not place requested lesions");

    ImageF mask(H, W, 0.0f);
    for (const Lesion& l : lesions) {
      double reach = l.radius * (1.0 + l.spik_amp) * std::max(1.0, l.aspect) + 2;
      int r0 = std::max(0, int(l.cr - reach)), r1 = std::min(H, int(l.cr + reach) + 1);
      int c0 = std::max(0, int(l.cc - reach)), c1 = std::min(W, int(l.cc + reach) + 1);
      for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) {
          if (!l.contains(r, c)) continue;
          mask.at(r, c) = 1.0f;
          double f = l.boundary_frac(r, c);  // 0 center, 1 boundary
          double bump = params.contrast * (0.75 + 0.25 * (1.0 - f));
          img.at(r, c) = float(std::clamp(double(img.at(r, c)) + bump, 0.0, 1.0));
        }
      }
    }
    scan.annotation = std::move(mask);
    scan.grade = rng.uniform_int(3, 5);
  } else {
    scan.grade = rng.uniform_int(0, 1);
  }

  if (params.laterality == Laterality::Right) {
    img = mirror_horizontal(img);
    if (scan.annotation) scan.annotation = mirror_horizontal(*scan.annotation);
  }
  scan.pixels = std::move(img);
  return scan;
}

}  // namespace mmsc
