#include "mmsc/aggregation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "mmsc/pipeline.hpp"
#include "mmsc/tissue.hpp"

namespace mmsc {

AggregationGrid aggregate_local(const Network& net, const ImageF& scan,
                                int stride, int threads, double scale) {
  if (stride < 1) throw std::invalid_argument("aggregate_local: stride must be >= 1");
  const int P = network_input_side(net);
  if (scan.height < P || scan.width < P)
    throw std::invalid_argument("aggregate_local: scan " +
                                std::to_string(scan.height) + "x" +
                                std::to_string(scan.width) +
                                " smaller than patch size " + std::to_string(P));
  const int rows = (scan.height - P) / stride + 1;
  const int cols = (scan.width - P) / stride + 1;

  AggregationGrid grid;
  grid.values = ImageF(rows, cols);
  grid.stride = stride;
  grid.patch_size = P;
  grid.scale = scale;

  auto eval_cell = [&](int a, int b) {
    Patch p;
    p.pixels = ImageF(P, P);
    for (int r = 0; r < P; ++r)
      for (int c = 0; c < P; ++c)
        p.pixels.at(r, c) = scan.at(a * stride + r, b * stride + c);
    grid.values.at(a, b) =
        float(std::clamp(predict_patch(net, p), 0.0, 1.0));
  };

  threads = std::max(1, threads);
  if (threads == 1) {
    for (int a = 0; a < rows; ++a)
      for (int b = 0; b < cols; ++b) eval_cell(a, b);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t]() {
        for (int idx = t; idx < rows * cols; idx += threads)
          eval_cell(idx / cols, idx % cols);
      });
    }
    for (auto& th : pool) th.join();
  }
  return grid;
}

ImageF grid_to_channel(const AggregationGrid& grid, int side) {
  if (grid.values.size() == 0)
    throw std::invalid_argument("grid_to_channel: empty grid");
  ImageF out = resize_bilinear(grid.values, side, side);
  for (auto& v : out.data) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

void save_grid(const AggregationGrid& grid, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open grid for write: " + path);
  char hdr[128];
  std::snprintf(hdr, sizeof(hdr), "MSAG %d %d %d %d %g\n", grid.values.height,
                grid.values.width, grid.stride, grid.patch_size, grid.scale);
  os << hdr;
  static_assert(sizeof(float) == 4);
  os.write(reinterpret_cast<const char*>(grid.values.data.data()),
           std::streamsize(grid.values.size() * 4));
  if (!os) throw std::runtime_error("grid write failed: " + path);
}

AggregationGrid load_grid(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open grid: " + path);
  std::string magic;
  int rows, cols;
  AggregationGrid grid;
  is >> magic >> rows >> cols >> grid.stride >> grid.patch_size >> grid.scale;
  if (magic != "MSAG" || !is || rows <= 0 || cols <= 0)
    throw std::runtime_error("not an aggregation grid file: " + path);
  is.get();  // newline
  grid.values = ImageF(rows, cols);
  is.read(reinterpret_cast<char*>(grid.values.data.data()),
          std::streamsize(grid.values.size() * 4));
  if (!is) throw std::runtime_error("truncated grid file: " + path);
  return grid;
}

void export_grid_pgm(const AggregationGrid& grid, const std::string& path) {
  write_pgm(path, grid.values, 255);
}

}  // namespace mmsc
