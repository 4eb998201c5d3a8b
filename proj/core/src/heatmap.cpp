#include "mmsc/heatmap.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "mmsc/metrics.hpp"
#include "mmsc/ops.hpp"

namespace mmsc {

void HeatmapNetConfig::validate() const {
  if (input_size <= 0) throw std::invalid_argument("heatmap config: bad input size");
  if (conv_blocks.empty())
    throw std::invalid_argument("heatmap config: no conv blocks");
  int side = input_size;
  for (const auto& [filters, convs] : conv_blocks) {
    if (filters <= 0 || convs <= 0)
      throw std::invalid_argument("heatmap config: bad block spec");
    if (side % 2 != 0)
      throw std::invalid_argument("heatmap config: odd side before maxpool");
    side /= 2;
  }
  if (head_channels <= 0)
    throw std::invalid_argument("heatmap config: bad head width");
}

Network build_heatmap_net(const HeatmapNetConfig& config, Rng& rng) {
  config.validate();
  Network net;
  int idx = 0, channels = 1;
  auto add_layer = [&](LayerKind kind, std::vector<std::uint32_t> dims) {
    Layer l;
    l.kind = kind;
    l.dims = std::move(dims);
    l.name = "layer" + std::to_string(idx++);
    if (kind == LayerKind::Conv) {
      int o = int(l.dims[0]), c = int(l.dims[1]), k = int(l.dims[2]);
      net.params.add(l.name + ".w", Tensor({o, c, k, k}));
      net.params.add(l.name + ".b", Tensor({o}));
    }
    net.layers.push_back(std::move(l));
  };
  auto conv3 = [&](int out) {
    add_layer(LayerKind::Conv,
              {std::uint32_t(out), std::uint32_t(channels), 3, 1, 1});
    add_layer(LayerKind::Relu, {});
    channels = out;
  };
  for (const auto& [filters, convs] : config.conv_blocks) {
    for (int i = 0; i < convs; ++i) conv3(filters);
    add_layer(LayerKind::MaxPool, {});
  }
  if (config.with_aux) {
    add_layer(LayerKind::ConcatAux, {1});
    channels += 1;
    conv3(config.head_channels);
    conv3(config.head_channels);
  } else {
    conv3(config.head_channels);
  }
  // Linear 1x1 projection to the single-channel heat output.
  add_layer(LayerKind::Conv, {1, std::uint32_t(channels), 1, 1, 0});
  init_params(net, rng);
  return net;
}

ImageF make_target(const Scan& scan, int target_side, double sigma) {
  if (!scan.annotation) return ImageF(target_side, target_side, 0.0f);
  ImageF down = resize_area(*scan.annotation, target_side, target_side);
  float mx = 0.0f;
  for (float v : down.data) mx = std::max(mx, v);
  if (mx <= 0.0f) return ImageF(target_side, target_side, 0.0f);
  ImageF blurred = gaussian_blur(down, sigma);
  float bmx = 0.0f;
  for (float v : blurred.data) bmx = std::max(bmx, v);
  for (auto& v : blurred.data) v /= bmx;
  return blurred;
}

namespace {

int heat_output_side(const Network&) {
  return 32;  // pinned by the three-pool architecture
}

Tensor image_to_tensor(const ImageF& img, bool requires_grad = false) {
  Tensor t({1, 1, img.height, img.width}, img.data, requires_grad);
  return t;
}

double run_batch(Network& net, SgdOptimizer* opt,
                 const std::vector<const HeatmapExample*>& batch,
                 bool with_aux) {
  // One example per graph; losses averaged, gradients accumulated.
  double loss_acc = 0.0;
  if (opt) net.params.zero_grad();
  for (const HeatmapExample* ex : batch) {
    Graph g;
    Tensor input = image_to_tensor(ex->input);
    Tensor aux;
    const Tensor* auxp = nullptr;
    if (with_aux) {
      if (!ex->aux)
        throw std::invalid_argument(
            "train_heatmap: with_aux net requires an aux channel for every example");
      aux = image_to_tensor(*ex->aux);
      auxp = &aux;
    }
    Tensor pred = net.forward(g, input, auxp);
    Tensor target({1, 1, ex->target.height, ex->target.width}, ex->target.data);
    Tensor loss = mse_loss(g, pred, target);
    loss_acc += loss.item();
    if (opt) g.backward(loss);
  }
  if (opt) {
    // Scale accumulated gradients to the batch mean.
    const float inv = 1.0f / float(batch.size());
    for (auto& [name, p] : net.params)
      for (auto& gv : p.grad()) gv *= inv;
    opt->step(net.params);
  }
  return loss_acc / double(batch.size());
}

}  // namespace

HeatmapTrainLog train_heatmap(Network& net,
                              const std::vector<HeatmapExample>& train,
                              const std::vector<HeatmapExample>& val,
                              const HeatmapTrainConfig& hyper, Rng& rng) {
  if (train.empty()) throw std::invalid_argument("train_heatmap: empty train set");
  const bool with_aux = net.has_aux_layer();
  for (const auto& ex : train)
    if (with_aux && !ex.aux)
      throw std::invalid_argument(
          "train_heatmap: with_aux net requires an aux channel for every example");

  SgdOptimizer opt(hyper.lr, hyper.momentum);
  HeatmapTrainLog log;
  const int out_side = heat_output_side(net);
  const double pixels = double(out_side) * out_side;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    Rng erng = rng.derive(std::uint64_t(epoch) + 1);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[erng.uniform_int(0, int(i) - 1)]);

    double loss_acc = 0.0;
    int batches = 0;
    for (std::size_t off = 0; off < train.size(); off += hyper.batch_size) {
      std::vector<const HeatmapExample*> batch;
      for (std::size_t i = off; i < std::min(train.size(), off + hyper.batch_size); ++i)
        batch.push_back(&train[order[i]]);
      loss_acc += run_batch(net, &opt, batch, with_aux);
      ++batches;
    }

    HeatmapTrainLogEntry entry;
    entry.epoch = epoch;
    entry.train_mse_mean = loss_acc / batches;
    entry.train_mse_sum = entry.train_mse_mean * pixels;
    if (!val.empty()) {
      std::vector<const HeatmapExample*> vbatch;
      for (const auto& ex : val) vbatch.push_back(&ex);
      entry.val_mse_mean = run_batch(net, nullptr, vbatch, with_aux);
      entry.val_mse_sum = entry.val_mse_mean * pixels;
    }
    entry.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    log.entries.push_back(entry);
  }
  return log;
}

ImageF infer_heatmap(const Network& net, const ImageF& scan256,
                     const ImageF* aux) {
  const bool with_aux = net.has_aux_layer();
  if (with_aux && !aux)
    throw std::invalid_argument("infer_heatmap: net requires an aux channel");
  if (!with_aux && aux)
    throw std::invalid_argument(
        "infer_heatmap: baseline net takes no aux channel");
  Graph g;
  Tensor input = image_to_tensor(scan256);
  Tensor auxt;
  const Tensor* auxp = nullptr;
  if (aux) {
    auxt = image_to_tensor(*aux);
    auxp = &auxt;
  }
  Tensor out = net.forward(g, input, auxp);
  if (out.ndim() != 4 || out.dim(1) != 1)
    throw std::invalid_argument("infer_heatmap: unexpected output shape " +
                                out.shape_str());
  ImageF map(out.dim(2), out.dim(3));
  for (std::size_t i = 0; i < map.size(); ++i)
    map.data[i] = std::clamp(out.data()[i], 0.0f, 1.0f);
  return map;
}

ImageF heat_region(const ImageF& map, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("heat_region: threshold must be in (0,1)");
  ImageF out(map.height, map.width);
  for (std::size_t i = 0; i < map.size(); ++i)
    out.data[i] = map.data[i] >= threshold ? 1.0f : 0.0f;
  return out;
}

void write_heatmap_log(const HeatmapTrainLog& log, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open heatmap log for write: " + path);
  os << "epoch\ttrain_mse_mean\ttrain_mse_sum\tval_mse_mean\tval_mse_sum\n";
  char buf[200];
  for (const auto& e : log.entries) {
    std::snprintf(buf, sizeof(buf), "%d\t%.6f\t%.4f\t%.6f\t%.4f\n", e.epoch,
                  e.train_mse_mean, e.train_mse_sum, e.val_mse_mean,
                  e.val_mse_sum);
    os << buf;
  }
}

void save_heatmap(const ImageF& map, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open heatmap for write: " + path);
  char hdr[64];
  std::snprintf(hdr, sizeof(hdr), "MSHM %d %d\n", map.height, map.width);
  os << hdr;
  os.write(reinterpret_cast<const char*>(map.data.data()),
           std::streamsize(map.size() * 4));
  if (!os) throw std::runtime_error("heatmap write failed: " + path);
}

ImageF load_heatmap(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open heatmap: " + path);
  std::string magic;
  int rows = 0, cols = 0;
  is >> magic >> rows >> cols;
  if (magic != "MSHM" || !is || rows <= 0 || cols <= 0)
    throw std::runtime_error("not a heatmap file: " + path);
  is.get();
  ImageF map(rows, cols);
  is.read(reinterpret_cast<char*>(map.data.data()),
          std::streamsize(map.size() * 4));
  if (!is) throw std::runtime_error("truncated heatmap file: " + path);
  return map;
}

}  // namespace mmsc
