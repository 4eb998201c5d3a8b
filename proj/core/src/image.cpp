#include "mmsc/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <zlib.h>

namespace mmsc {

namespace {

int read_pnm_token(std::istream& is) {
  // Skips whitespace and '#' comments.
  int c;
  while ((c = is.get()) != EOF) {
    if (c == '#') {
      while ((c = is.get()) != EOF && c != '\n') {
      }
    } else if (!std::isspace(c)) {
      is.unget();
      break;
    }
  }
  int v;
  if (!(is >> v)) throw std::runtime_error("malformed PNM header");
  return v;
}

}  // namespace

ImageF read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open PGM: " + path);
  char m0 = 0, m1 = 0;
  is.get(m0);
  is.get(m1);
  if (m0 != 'P' || m1 != '5')
    throw std::runtime_error("not a binary PGM (P5): " + path);
  int w = read_pnm_token(is);
  int h = read_pnm_token(is);
  int maxval = read_pnm_token(is);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
    throw std::runtime_error("bad PGM header in " + path);
  is.get();  // single whitespace after maxval
  ImageF img(h, w);
  if (maxval < 256) {
    std::vector<std::uint8_t> buf(img.size());
    is.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
    if (!is) throw std::runtime_error("truncated PGM: " + path);
    for (std::size_t i = 0; i < buf.size(); ++i)
      img.data[i] = float(buf[i]) / float(maxval);
  } else {
    std::vector<std::uint8_t> buf(img.size() * 2);
    is.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
    if (!is) throw std::runtime_error("truncated PGM: " + path);
    for (std::size_t i = 0; i < img.size(); ++i) {
      unsigned v = unsigned(buf[2 * i]) << 8 | buf[2 * i + 1];
      img.data[i] = float(v) / float(maxval);
    }
  }
  return img;
}

void write_pgm(const std::string& path, const ImageF& img, int maxval) {
  if (maxval <= 0 || maxval > 65535)
    throw std::invalid_argument("write_pgm: maxval out of range");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open PGM for write: " + path);
  os << "P5\n" << img.width << " " << img.height << "\n" << maxval << "\n";
  auto quant = [&](float v) {
    double q = std::clamp(double(v), 0.0, 1.0) * maxval;
    return unsigned(std::lround(q));
  };
  if (maxval < 256) {
    std::vector<std::uint8_t> buf(img.size());
    for (std::size_t i = 0; i < img.size(); ++i)
      buf[i] = std::uint8_t(quant(img.data[i]));
    os.write(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
  } else {
    std::vector<std::uint8_t> buf(img.size() * 2);
    for (std::size_t i = 0; i < img.size(); ++i) {
      unsigned v = quant(img.data[i]);
      buf[2 * i] = std::uint8_t(v >> 8);
      buf[2 * i + 1] = std::uint8_t(v & 0xff);
    }
    os.write(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
  }
  if (!os) throw std::runtime_error("PGM write failed: " + path);
}

namespace {

void png_chunk(std::ostream& os, const char type[4],
               const std::vector<std::uint8_t>& payload) {
  std::uint32_t len = std::uint32_t(payload.size());
  std::uint8_t hdr[8] = {std::uint8_t(len >> 24), std::uint8_t(len >> 16),
                         std::uint8_t(len >> 8),  std::uint8_t(len),
                         std::uint8_t(type[0]),   std::uint8_t(type[1]),
                         std::uint8_t(type[2]),   std::uint8_t(type[3])};
  os.write(reinterpret_cast<char*>(hdr), 8);
  if (!payload.empty())
    os.write(reinterpret_cast<const char*>(payload.data()),
             std::streamsize(payload.size()));
  uLong crc = crc32(0L, hdr + 4, 4);
  if (!payload.empty()) crc = crc32(crc, payload.data(), uInt(payload.size()));
  std::uint8_t cb[4] = {std::uint8_t(crc >> 24), std::uint8_t(crc >> 16),
                        std::uint8_t(crc >> 8), std::uint8_t(crc)};
  os.write(reinterpret_cast<char*>(cb), 4);
}

void write_png(const std::string& path, int height, int width, int channels,
               const std::uint8_t* pixels) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open PNG for write: " + path);
  static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  os.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<std::uint8_t> ihdr(13);
  auto put32 = [](std::uint8_t* p, std::uint32_t v) {
    p[0] = std::uint8_t(v >> 24);
    p[1] = std::uint8_t(v >> 16);
    p[2] = std::uint8_t(v >> 8);
    p[3] = std::uint8_t(v);
  };
  put32(ihdr.data(), std::uint32_t(width));
  put32(ihdr.data() + 4, std::uint32_t(height));
  ihdr[8] = 8;                                  // bit depth
  ihdr[9] = channels == 1 ? 0 : 2;              // gray or truecolor
  ihdr[10] = ihdr[11] = ihdr[12] = 0;
  png_chunk(os, "IHDR", ihdr);

  std::vector<std::uint8_t> raw;
  raw.reserve(std::size_t(height) * (std::size_t(width) * channels + 1));
  for (int r = 0; r < height; ++r) {
    raw.push_back(0);  // filter: none
    const std::uint8_t* row = pixels + std::size_t(r) * width * channels;
    raw.insert(raw.end(), row, row + std::size_t(width) * channels);
  }
  uLongf bound = compressBound(uLong(raw.size()));
  std::vector<std::uint8_t> idat(bound);
  if (compress2(idat.data(), &bound, raw.data(), uLong(raw.size()), 6) != Z_OK)
    throw std::runtime_error("PNG deflate failed");
  idat.resize(bound);
  png_chunk(os, "IDAT", idat);
  png_chunk(os, "IEND", {});
  if (!os) throw std::runtime_error("PNG write failed: " + path);
}

}  // namespace

void write_png_gray(const std::string& path, const ImageF& img) {
  std::vector<std::uint8_t> px(img.size());
  for (std::size_t i = 0; i < img.size(); ++i)
    px[i] = std::uint8_t(std::lround(std::clamp(double(img.data[i]), 0.0, 1.0) * 255));
  write_png(path, img.height, img.width, 1, px.data());
}

void write_png_rgb(const std::string& path, int height, int width,
                   const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != std::size_t(height) * width * 3)
    throw std::invalid_argument("write_png_rgb: buffer size mismatch");
  write_png(path, height, width, 3, rgb.data());
}

ImageF mirror_horizontal(const ImageF& img) {
  ImageF out(img.height, img.width);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      out.at(r, c) = img.at(r, img.width - 1 - c);
  return out;
}

ImageF resize_area(const ImageF& img, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0)
    throw std::invalid_argument("resize_area: output dims must be positive");
  ImageF out(out_h, out_w);
  const double sy = double(img.height) / out_h;
  const double sx = double(img.width) / out_w;
  for (int r = 0; r < out_h; ++r) {
    double y0 = r * sy, y1 = (r + 1) * sy;
    int iy0 = int(std::floor(y0)), iy1 = std::min(img.height, int(std::ceil(y1)));
    for (int c = 0; c < out_w; ++c) {
      double x0 = c * sx, x1 = (c + 1) * sx;
      int ix0 = int(std::floor(x0)), ix1 = std::min(img.width, int(std::ceil(x1)));
      double acc = 0.0, area = 0.0;
      for (int y = iy0; y < iy1; ++y) {
        double wy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
        for (int x = ix0; x < ix1; ++x) {
          double wx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
          acc += img.at(y, x) * wy * wx;
          area += wy * wx;
        }
      }
      out.at(r, c) = float(acc / area);
    }
  }
  return out;
}

ImageF downsample(const ImageF& img, double factor) {
  const double allowed[] = {0.5, 0.33, 0.25};
  bool ok = false;
  for (double a : allowed) ok = ok || std::abs(factor - a) < 1e-9;
  if (!ok)
    throw std::invalid_argument("downsample: factor must be one of 0.5/0.33/0.25");
  int oh = int(std::lround(img.height * factor));
  int ow = int(std::lround(img.width * factor));
  return resize_area(img, oh, ow);
}

ImageF resize_bilinear(const ImageF& img, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0)
    throw std::invalid_argument("resize_bilinear: output dims must be positive");
  ImageF out(out_h, out_w);
  // Pixel-center alignment; degenerates to identity when dims match.
  for (int r = 0; r < out_h; ++r) {
    double fy = out_h == 1 ? 0.0
                           : (double(r) + 0.5) * img.height / out_h - 0.5;
    fy = std::clamp(fy, 0.0, double(img.height - 1));
    int y0 = int(std::floor(fy));
    int y1 = std::min(y0 + 1, img.height - 1);
    double wy = fy - y0;
    for (int c = 0; c < out_w; ++c) {
      double fx = out_w == 1 ? 0.0
                             : (double(c) + 0.5) * img.width / out_w - 0.5;
      fx = std::clamp(fx, 0.0, double(img.width - 1));
      int x0 = int(std::floor(fx));
      int x1 = std::min(x0 + 1, img.width - 1);
      double wx = fx - x0;
      double v = (1 - wy) * ((1 - wx) * img.at(y0, x0) + wx * img.at(y0, x1)) +
                 wy * ((1 - wx) * img.at(y1, x0) + wx * img.at(y1, x1));
      out.at(r, c) = float(v);
    }
  }
  return out;
}

ImageF gaussian_blur(const ImageF& img, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_blur: sigma must be > 0");
  const int radius = int(std::ceil(3.0 * sigma));
  std::vector<double> kernel(std::size_t(2 * radius + 1));
  double ksum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[std::size_t(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    ksum += kernel[std::size_t(i + radius)];
  }
  for (auto& k : kernel) k /= ksum;

  float in_max = 0.0f;
  for (float v : img.data) in_max = std::max(in_max, v);

  auto clampi = [](int v, int lo, int hi) { return std::min(std::max(v, lo), hi); };
  ImageF tmp(img.height, img.width);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[std::size_t(i + radius)] *
               img.at(r, clampi(c + i, 0, img.width - 1));
      tmp.at(r, c) = float(acc);
    }
  }
  ImageF out(img.height, img.width);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[std::size_t(i + radius)] *
               tmp.at(clampi(r + i, 0, img.height - 1), c);
      out.at(r, c) = float(acc);
    }
  }
  if (std::abs(in_max - 1.0f) < 1e-6f) {
    float out_max = 0.0f;
    for (float v : out.data) out_max = std::max(out_max, v);
    if (out_max > 0.0f)
      for (auto& v : out.data) v /= out_max;
  }
  return out;
}

}  // namespace mmsc
