#include "mmsc/tissue.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "mmsc/ops.hpp"

namespace mmsc {

void TissueNetConfig::validate() const {
  if (input_size <= 0) throw std::invalid_argument("tissue config: bad input size");
  if (conv_blocks.empty()) throw std::invalid_argument("tissue config: no conv blocks");
  if (classes < 2) throw std::invalid_argument("tissue config: needs >= 2 classes");
  int side = input_size;
  for (const auto& [filters, convs] : conv_blocks) {
    if (filters <= 0 || convs <= 0)
      throw std::invalid_argument("tissue config: bad block spec");
    if (side % 2 != 0)
      throw std::invalid_argument(
          "tissue config: input size not divisible by 2^blocks");
    side /= 2;
  }
  if (side < 1)
    throw std::invalid_argument("tissue config: feature map collapses below 1x1");
}

void write_train_log(const TrainLog& log, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open train log for write: " + path);
  os << "epoch\ttrain_loss\tval_loss\tval_auc\n";
  char buf[160];
  for (const auto& e : log.entries) {
    std::snprintf(buf, sizeof(buf), "%d\t%.6f\t%.6f\t%.6f\n", e.epoch,
                  e.train_loss, e.val_loss, e.val_auc);
    os << buf;
  }
  os << "best_epoch\t" << log.best_epoch << "\n";
}

Network build_tissue_net(const TissueNetConfig& config, Rng& rng) {
  config.validate();
  Network net;
  int idx = 0;
  int channels = 1, side = config.input_size;
  auto add_layer = [&](LayerKind kind, std::vector<std::uint32_t> dims) {
    Layer l;
    l.kind = kind;
    l.dims = std::move(dims);
    l.name = "layer" + std::to_string(idx++);
    if (kind == LayerKind::Conv) {
      int o = int(l.dims[0]), c = int(l.dims[1]), k = int(l.dims[2]);
      net.params.add(l.name + ".w", Tensor({o, c, k, k}));
      net.params.add(l.name + ".b", Tensor({o}));
    } else if (kind == LayerKind::Dense) {
      net.params.add(l.name + ".w", Tensor({int(l.dims[0]), int(l.dims[1])}));
      net.params.add(l.name + ".b", Tensor({int(l.dims[1])}));
    }
    net.layers.push_back(std::move(l));
  };
  for (const auto& [filters, convs] : config.conv_blocks) {
    for (int i = 0; i < convs; ++i) {
      add_layer(LayerKind::Conv,
                {std::uint32_t(filters), std::uint32_t(channels), 3, 1, 1});
      add_layer(LayerKind::Relu, {});
      channels = filters;
    }
    add_layer(LayerKind::MaxPool, {});
    side /= 2;
  }
  add_layer(LayerKind::Flatten, {});
  int features = channels * side * side;
  for (int width : config.dense_widths) {
    add_layer(LayerKind::Dense, {std::uint32_t(features), std::uint32_t(width)});
    add_layer(LayerKind::Relu, {});
    features = width;
  }
  add_layer(LayerKind::Dense,
            {std::uint32_t(features), std::uint32_t(config.classes)});
  add_layer(LayerKind::Softmax, {});
  init_params(net, rng);
  return net;
}

int network_input_side(const Network& net) {
  // Walk the conv stack: pools halve the side; the first dense layer's
  // input width together with the last conv's channel count pins it.
  int pools = 0, channels = 1;
  std::size_t dense_in = 0;
  for (const Layer& l : net.layers) {
    if (l.kind == LayerKind::MaxPool) ++pools;
    else if (l.kind == LayerKind::Conv) channels = int(l.dims[0]);
    else if (l.kind == LayerKind::ConcatAux) channels += 1;
    else if (l.kind == LayerKind::Dense) {
      dense_in = l.dims[0];
      break;
    }
  }
  if (dense_in == 0)
    throw std::invalid_argument("network has no dense head");
  double spatial = std::sqrt(double(dense_in) / channels);
  int side = int(std::lround(spatial)) << pools;
  if (std::size_t(channels) * (std::size_t(side >> pools) * (side >> pools)) !=
      dense_in)
    throw std::invalid_argument("network structure does not pin an input size");
  return side;
}

namespace {

Tensor batch_to_tensor(const std::vector<const Patch*>& batch, int P,
                       bool requires_grad = false) {
  Tensor t({int(batch.size()), 1, P, P}, requires_grad);
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const ImageF& img = batch[n]->pixels;
    if (img.height != P || img.width != P)
      throw std::invalid_argument(
          "patch size " + std::to_string(img.height) + "x" +
          std::to_string(img.width) + " does not match network input " +
          std::to_string(P));
    std::copy(img.data.begin(), img.data.end(),
              t.data() + n * std::size_t(P) * P);
  }
  return t;
}

double batch_loss_and_step(Network& net, SgdOptimizer& opt,
                           const std::vector<const Patch*>& batch,
                           const std::vector<int>& labels, int P) {
  Graph g;
  Tensor input = batch_to_tensor(batch, P);
  Tensor probs = net.forward(g, input);
  Tensor loss = cross_entropy(g, probs, labels);
  net.params.zero_grad();
  g.backward(loss);
  opt.step(net.params);
  return loss.item();
}

}  // namespace

std::vector<double> score_patches(const Network& net,
                                  const std::vector<Patch>& patches,
                                  int threads) {
  std::vector<double> scores(patches.size());
  threads = std::max(1, threads);
  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      scores[i] = predict_patch(net, patches[i]);
  };
  if (threads == 1 || patches.size() < 2) {
    worker(0, patches.size());
  } else {
    std::vector<std::thread> pool;
    std::size_t chunk = (patches.size() + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      std::size_t b = std::size_t(t) * chunk;
      std::size_t e = std::min(patches.size(), b + chunk);
      if (b < e) pool.emplace_back(worker, b, e);
    }
    for (auto& th : pool) th.join();
  }
  return scores;
}

TrainLog train_tissue(Network& net, const std::vector<Patch>& train_pos,
                      const std::vector<Patch>& train_neg,
                      const std::vector<Patch>& val_pos,
                      const std::vector<Patch>& val_neg,
                      const TissueTrainConfig& hyper, Rng& rng) {
  if (train_pos.empty() || train_neg.empty())
    throw std::invalid_argument("train_tissue: both classes required in train split");
  const int P = network_input_side(net);
  const int half = std::max(1, hyper.batch_size / 2);

  SgdOptimizer opt(hyper.lr, hyper.momentum);
  TrainLog log;
  ParamSet best = net.params.clone();
  double best_auc = -1.0;

  std::vector<int> labels(std::size_t(2) * half);
  for (int i = 0; i < half; ++i) labels[i] = 1;
  for (int i = half; i < 2 * half; ++i) labels[std::size_t(i)] = 0;

  std::vector<std::size_t> neg_order(train_neg.size());
  std::iota(neg_order.begin(), neg_order.end(), 0);

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    Rng erng = rng.derive(std::uint64_t(epoch) + 1);
    // Fisher-Yates over the negative pool each epoch.
    for (std::size_t i = neg_order.size(); i > 1; --i)
      std::swap(neg_order[i - 1], neg_order[erng.uniform_int(0, int(i) - 1)]);

    double loss_acc = 0.0;
    int batches = 0;
    std::vector<Patch> aug_store;
    for (std::size_t off = 0; off + half <= train_neg.size(); off += half) {
      aug_store.clear();
      aug_store.reserve(half);
      std::vector<const Patch*> batch;
      for (int i = 0; i < half; ++i) {
        const Patch& src = train_pos[erng.uniform_int(0, int(train_pos.size()) - 1)];
        aug_store.push_back(augment(src, erng));
      }
      for (int i = 0; i < half; ++i) batch.push_back(&aug_store[std::size_t(i)]);
      for (int i = 0; i < half; ++i)
        batch.push_back(&train_neg[neg_order[off + std::size_t(i)]]);
      loss_acc += batch_loss_and_step(net, opt, batch, labels, P);
      ++batches;
    }

    TrainLogEntry entry;
    entry.epoch = epoch;
    entry.train_loss = batches ? loss_acc / batches : 0.0;

    if (!val_pos.empty() && !val_neg.empty()) {
      std::vector<Patch> val;
      val.insert(val.end(), val_pos.begin(), val_pos.end());
      val.insert(val.end(), val_neg.begin(), val_neg.end());
      std::vector<int> vlabels;
      std::vector<double> vscores = score_patches(net, val, 1);
      for (const Patch& p : val) vlabels.push_back(p.positive ? 1 : 0);
      double vloss = 0.0;
      for (std::size_t i = 0; i < val.size(); ++i) {
        double p = vlabels[i] ? vscores[i] : 1.0 - vscores[i];
        vloss -= std::log(std::max(p, 1e-12));
      }
      entry.val_loss = vloss / double(val.size());
      entry.val_auc = roc_auc(vscores, vlabels).auc;
    }
    entry.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    log.entries.push_back(entry);

    if (entry.val_auc > best_auc) {
      best_auc = entry.val_auc;
      best.copy_from(net.params);
      log.best_epoch = epoch;
    }
    if (entry.val_auc >= hyper.early_stop_auc) break;
  }

  net.params.copy_from(best);
  return log;
}

double predict_patch(const Network& net, const Patch& patch) {
  const int P = network_input_side(net);
  Graph g;
  std::vector<const Patch*> one{&patch};
  Tensor probs = net.forward(g, batch_to_tensor(one, P));
  if (probs.ndim() != 2 || probs.dim(1) < 2)
    throw std::invalid_argument("predict_patch: network head is not a classifier");
  return double(probs.data()[1]);  // class 1 = findings positive
}

EvalReport evaluate_tissue(const Network& net, const std::vector<Patch>& test,
                           int threads, double threshold) {
  if (test.empty()) throw std::invalid_argument("evaluate_tissue: empty test set");
  std::vector<int> labels;
  for (const Patch& p : test) labels.push_back(p.positive ? 1 : 0);
  std::vector<double> scores = score_patches(net, test, threads);
  EvalReport report;
  report.roc = roc_auc(scores, labels);  // rejects single-class sets
  report.conf = confusion(scores, labels, threshold);
  report.samples = test.size();
  return report;
}

void write_eval_report(const EvalReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open report for write: " + path);
  char buf[64];
  auto put = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%s=%.4f\n", key, v);
    os << buf;
  };
  os << "samples=" << report.samples << "\n";
  put("auc", report.roc.auc);
  put("tp_pct", report.conf.tp);
  put("fp_pct", report.conf.fp);
  put("tn_pct", report.conf.tn);
  put("fn_pct", report.conf.fn);
  put("total_error_pct", report.conf.total_error());
}

}  // namespace mmsc
