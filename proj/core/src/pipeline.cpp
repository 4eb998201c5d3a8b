#include "mmsc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mmsc {

std::vector<ManifestEntry> DatasetManifest::split(const std::string& name) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == name) out.push_back(e);
  return out;
}

void DatasetManifest::check_split_hygiene() const {
  std::map<std::string, std::string> seen;
  for (const auto& e : entries) {
    auto it = seen.find(e.case_id);
    if (it == seen.end())
      seen.emplace(e.case_id, e.split);
    else if (it->second != e.split)
      throw std::runtime_error("case " + e.case_id +
                               " appears in splits " + it->second + " and " +
                               e.split);
  }
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open manifest for write: " + path);
  for (const auto& e : m.entries) {
    char scale[32];
    std::snprintf(scale, sizeof(scale), "%g", e.scale);
    os << e.path << '\t' << (e.positive ? "pos" : "neg") << '\t' << e.offset_i
       << '\t' << e.offset_j << '\t' << scale << '\t' << e.case_id << '\t'
       << e.split << '\n';
  }
  if (!os) throw std::runtime_error("manifest write failed: " + path);
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open manifest: " + path);
  DatasetManifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    ManifestEntry e;
    std::string label, scale;
    if (!std::getline(ss, e.path, '\t') || !std::getline(ss, label, '\t'))
      throw std::runtime_error("malformed manifest line " +
                               std::to_string(lineno) + " in " + path);
    std::string tok;
    std::getline(ss, tok, '\t');
    e.offset_i = std::stoi(tok);
    std::getline(ss, tok, '\t');
    e.offset_j = std::stoi(tok);
    std::getline(ss, scale, '\t');
    e.scale = std::stod(scale);
    std::getline(ss, e.case_id, '\t');
    std::getline(ss, e.split, '\t');
    e.positive = (label == "pos");
    m.entries.push_back(std::move(e));
  }
  return m;
}

Scan normalize_orientation(const Scan& scan) {
  if (scan.laterality == Laterality::Left) return scan;
  Scan out = scan;
  out.pixels = mirror_horizontal(scan.pixels);
  if (scan.annotation) out.annotation = mirror_horizontal(*scan.annotation);
  return out;
}

Scan crop_base(const Scan& scan, int crop_size) {
  const ImageF& img = scan.pixels;
  float mx = 0.0f;
  for (float v : img.data) mx = std::max(mx, v);
  if (mx <= 0.0f)
    throw std::runtime_error("crop_base: scan has no tissue above threshold");
  const float thr = 0.1f * mx;

  // Nipple proxy: rightmost column with tissue; its row is the centroid of
  // that column's tissue run.
  int proxy_col = -1;
  for (int c = img.width - 1; c >= 0 && proxy_col < 0; --c)
    for (int r = 0; r < img.height; ++r)
      if (img.at(r, c) > thr) {
        proxy_col = c;
        break;
      }
  long long row_sum = 0, row_n = 0;
  for (int r = 0; r < img.height; ++r)
    if (img.at(r, proxy_col) > thr) {
      row_sum += r;
      ++row_n;
    }
  const int proxy_row = int(std::llround(double(row_sum) / double(row_n)));

  const int S = crop_size;
  const int r0 = proxy_row - S / 2;           // rows [r0, r0+S)
  const int c0 = proxy_col - (S - 1);         // cols [c0, c0+S), right edge on proxy

  auto crop = [&](const ImageF& src) {
    ImageF out(S, S, 0.0f);
    int sr0 = std::max(0, r0), sr1 = std::min(src.height, r0 + S);
    int sc0 = std::max(0, c0), sc1 = std::min(src.width, c0 + S);
    for (int r = sr0; r < sr1; ++r)
      for (int c = sc0; c < sc1; ++c) out.at(r - r0, c - c0) = src.at(r, c);
    return out;
  };

  Scan out = scan;
  out.pixels = crop(img);
  if (scan.annotation) out.annotation = crop(*scan.annotation);
  return out;
}

namespace {

struct Component {
  double centroid_r = 0.0, centroid_c = 0.0;
  int min_r = 1 << 30, max_r = -1, min_c = 1 << 30, max_c = -1;
  long long count = 0;
};

// 8-connected components of mask > 0.5.
std::vector<Component> connected_components(const ImageF& mask) {
  std::vector<Component> comps;
  std::vector<char> visited(mask.size(), 0);
  for (int sr = 0; sr < mask.height; ++sr) {
    for (int sc = 0; sc < mask.width; ++sc) {
      std::size_t si = std::size_t(sr) * mask.width + sc;
      if (visited[si] || mask.data[si] <= 0.5f) continue;
      Component comp;
      double rsum = 0, csum = 0;
      std::deque<std::pair<int, int>> queue{{sr, sc}};
      visited[si] = 1;
      while (!queue.empty()) {
        auto [r, c] = queue.front();
        queue.pop_front();
        rsum += r;
        csum += c;
        ++comp.count;
        comp.min_r = std::min(comp.min_r, r);
        comp.max_r = std::max(comp.max_r, r);
        comp.min_c = std::min(comp.min_c, c);
        comp.max_c = std::max(comp.max_c, c);
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            int nr = r + dr, nc = c + dc;
            if (nr < 0 || nr >= mask.height || nc < 0 || nc >= mask.width)
              continue;
            std::size_t ni = std::size_t(nr) * mask.width + nc;
            if (!visited[ni] && mask.data[ni] > 0.5f) {
              visited[ni] = 1;
              queue.emplace_back(nr, nc);
            }
          }
        }
      }
      comp.centroid_r = rsum / double(comp.count);
      comp.centroid_c = csum / double(comp.count);
      comps.push_back(comp);
    }
  }
  return comps;
}

Patch cut_patch(const ImageF& img, int top, int left, int size, double scale) {
  Patch p;
  p.pixels = ImageF(size, size);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c)
      p.pixels.at(r, c) = std::clamp(img.at(top + r, left + c), 0.0f, 1.0f);
  p.offset_i = top;
  p.offset_j = left;
  p.scale = scale;
  return p;
}

}  // namespace

std::vector<Patch> sample_positive_patches(const Scan& scan, int patch_size,
                                           double scale) {
  if (!scan.annotation || scan.grade < 2)
    throw std::invalid_argument(
        "sample_positive_patches: scan has no graded annotation");
  const ImageF& img = scan.pixels;
  if (img.height < patch_size || img.width < patch_size)
    throw std::invalid_argument("sample_positive_patches: scan smaller than patch");
  std::vector<Patch> out;
  for (const Component& comp : connected_components(*scan.annotation)) {
    if (comp.max_r - comp.min_r + 1 > patch_size ||
        comp.max_c - comp.min_c + 1 > patch_size)
      continue;  // very large annotation, skipped
    int top = int(std::lround(comp.centroid_r)) - patch_size / 2;
    int left = int(std::lround(comp.centroid_c)) - patch_size / 2;
    top = std::clamp(top, 0, img.height - patch_size);
    left = std::clamp(left, 0, img.width - patch_size);
    Patch p = cut_patch(img, top, left, patch_size, scale);
    p.positive = true;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Patch> sample_negative_patches(const Scan& scan, int patch_size,
                                           double scale, int stride) {
  const ImageF& img = scan.pixels;
  if (img.height < patch_size || img.width < patch_size) return {};
  const ImageF* mask = scan.annotation ? &*scan.annotation : nullptr;
  std::vector<Patch> out;
  for (int i = 0; i + patch_size <= img.height; i += stride) {
    for (int j = 0; j + patch_size <= img.width; j += stride) {
      bool overlaps = false;
      if (mask) {
        for (int r = i; r < i + patch_size && !overlaps; ++r)
          for (int c = j; c < j + patch_size; ++c)
            if (mask->at(r, c) > 0.5f) {
              overlaps = true;
              break;
            }
      }
      if (overlaps) continue;
      Patch p = cut_patch(img, i, j, patch_size, scale);
      p.positive = false;
      out.push_back(std::move(p));
    }
  }
  return out;
}

AugmentParams draw_augment_params(Rng& rng) {
  AugmentParams a;
  a.brightness = rng.uniform(0.8, 1.2);
  a.rotation_quarters = rng.uniform_int(0, 3);
  a.offset_r = rng.uniform_int(-16, 16);
  a.offset_c = rng.uniform_int(-16, 16);
  a.hflip = rng.bernoulli(0.5);
  a.crop_frac = rng.uniform(0.875, 1.0);
  a.crop_pos_r = rng.uniform();
  a.crop_pos_c = rng.uniform();
  return a;
}

Patch apply_augment(const Patch& patch, const AugmentParams& a) {
  const int P = patch.pixels.height;
  ImageF img = patch.pixels;

  if (a.brightness != 1.0)
    for (auto& v : img.data) v = float(v * a.brightness);

  for (int q = 0; q < (a.rotation_quarters & 3); ++q) {
    ImageF rot(P, P);
    for (int r = 0; r < P; ++r)
      for (int c = 0; c < P; ++c) rot.at(c, P - 1 - r) = img.at(r, c);
    img = std::move(rot);
  }

  if (a.offset_r != 0 || a.offset_c != 0) {
    ImageF sh(P, P);
    for (int r = 0; r < P; ++r) {
      int sr = std::clamp(r - a.offset_r, 0, P - 1);
      for (int c = 0; c < P; ++c)
        sh.at(r, c) = img.at(sr, std::clamp(c - a.offset_c, 0, P - 1));
    }
    img = std::move(sh);
  }

  if (a.hflip) img = mirror_horizontal(img);

  int side = int(std::lround(P * std::clamp(a.crop_frac, 0.875, 1.0)));
  side = std::clamp(side, 1, P);
  if (side < P) {
    int r0 = int(std::lround(a.crop_pos_r * (P - side)));
    int c0 = int(std::lround(a.crop_pos_c * (P - side)));
    ImageF crop(side, side);
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c) crop.at(r, c) = img.at(r0 + r, c0 + c);
    img = resize_bilinear(crop, P, P);
  }

  for (auto& v : img.data) v = std::clamp(v, 0.0f, 1.0f);

  Patch out = patch;
  out.pixels = std::move(img);
  return out;
}

Patch augment(const Patch& patch, Rng& rng) {
  return apply_augment(patch, draw_augment_params(rng));
}

}  // namespace mmsc
