#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "mmsc/rng.hpp"
#include "mmsc/tissue.hpp"

using namespace mmsc;

namespace {

// Bright-vs-dark toy patches that a small net separates in a few epochs.
std::vector<Patch> toy_patches(Rng& rng, int count, bool positive, int side) {
  std::vector<Patch> out;
  for (int i = 0; i < count; ++i) {
    Patch p;
    p.positive = positive;
    p.pixels = ImageF(side, side);
    double base = positive ? 0.75 : 0.2;
    for (auto& v : p.pixels.data)
      v = float(std::clamp(base + rng.uniform(-0.1, 0.1), 0.0, 1.0));
    out.push_back(std::move(p));
  }
  return out;
}

Network tiny_net(Rng& rng, int side = 8) {
  TissueNetConfig cfg;
  cfg.input_size = side;
  cfg.conv_blocks = {{4, 1}};
  cfg.dense_widths = {8};
  return build_tissue_net(cfg, rng);
}

}  // namespace

TEST_CASE("default architecture pins a 256-px input with 16-px feature maps") {
  Rng rng(1);
  TissueNetConfig cfg;  // four pooled blocks
  Network net = build_tissue_net(cfg, rng);
  CHECK(network_input_side(net) == 256);
  // First dense layer sees 128 channels at 256 / 2^4 = 16 px.
  for (const Layer& l : net.layers)
    if (l.kind == LayerKind::Dense) {
      CHECK(l.dims[0] == 128u * 16u * 16u);
      break;
    }
  // Stack order: conv/relu pairs, pools, flatten, dense head, softmax last.
  CHECK(net.layers.back().kind == LayerKind::Softmax);
  int pools = 0;
  for (const Layer& l : net.layers)
    if (l.kind == LayerKind::MaxPool) ++pools;
  CHECK(pools == 4);
}

TEST_CASE("builds are deterministic in the seed") {
  Rng a(88), b(88), c(89);
  Network na = tiny_net(a), nb = tiny_net(b), nc = tiny_net(c);
  bool same_ab = true, same_ac = true;
  for (const auto& [name, p] : na.params) {
    const auto& qb = nb.params.at(name).vec();
    const auto& qc = nc.params.at(name).vec();
    for (std::size_t i = 0; i < p.size(); ++i) {
      same_ab = same_ab && p.vec()[i] == qb[i];
      same_ac = same_ac && p.vec()[i] == qc[i];
    }
  }
  CHECK(same_ab);
  CHECK_FALSE(same_ac);
}

TEST_CASE("config validation rejects impossible stacks") {
  TissueNetConfig bad;
  bad.input_size = 20;  // 20 -> 10 -> 5, odd before the third pool
  bad.conv_blocks = {{4, 1}, {8, 1}, {8, 1}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  TissueNetConfig one_class;
  one_class.classes = 1;
  CHECK_THROWS_AS(one_class.validate(), std::invalid_argument);
}

TEST_CASE("prediction is a probability and repeatable") {
  Rng rng(7);
  Network net = tiny_net(rng);
  Patch p;
  p.pixels = ImageF(8, 8);
  for (auto& v : p.pixels.data) v = float(rng.uniform(0.0, 1.0));
  double z1 = predict_patch(net, p);
  double z2 = predict_patch(net, p);
  CHECK(z1 == z2);
  CHECK(z1 >= 0.0);
  CHECK(z1 <= 1.0);

  Patch wrong;
  wrong.pixels = ImageF(16, 16);
  CHECK_THROWS_AS(predict_patch(net, wrong), std::invalid_argument);
}

TEST_CASE("score_patches is order-preserving and thread-invariant") {
  Rng rng(15);
  Network net = tiny_net(rng);
  std::vector<Patch> patches = toy_patches(rng, 11, false, 8);
  auto p1 = score_patches(net, patches, 1);
  auto p4 = score_patches(net, patches, 4);
  REQUIRE(p1.size() == 11);
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i] == p4[i]);  // bitwise: threading must not change results
    CHECK(p1[i] == predict_patch(net, patches[i]));
  }
}

TEST_CASE("training separates a toy task and restores the best epoch") {
  Rng rng(303);
  Network net = tiny_net(rng);
  Rng drng(404);
  auto train_pos = toy_patches(drng, 12, true, 8);
  auto train_neg = toy_patches(drng, 12, false, 8);
  auto val_pos = toy_patches(drng, 6, true, 8);
  auto val_neg = toy_patches(drng, 6, false, 8);

  TissueTrainConfig hyper;
  hyper.epochs = 8;
  hyper.batch_size = 8;
  hyper.lr = 0.05f;
  TrainLog log = train_tissue(net, train_pos, train_neg, val_pos, val_neg,
                              hyper, rng);
  REQUIRE_FALSE(log.entries.empty());
  REQUIRE(log.best_epoch >= 0);
  REQUIRE(log.best_epoch < int(log.entries.size()));

  double best_auc = -1.0;
  for (const auto& e : log.entries) best_auc = std::max(best_auc, e.val_auc);
  CHECK(log.entries[std::size_t(log.best_epoch)].val_auc ==
        doctest::Approx(best_auc));
  CHECK(best_auc > 0.9);

  // Restored weights reproduce the best epoch's validation AUC.
  std::vector<Patch> val;
  val.insert(val.end(), val_pos.begin(), val_pos.end());
  val.insert(val.end(), val_neg.begin(), val_neg.end());
  EvalReport report = evaluate_tissue(net, val);
  CHECK(report.roc.auc == doctest::Approx(best_auc));
  CHECK(report.samples == val.size());
  CHECK(report.conf.tp + report.conf.fp + report.conf.tn + report.conf.fn ==
        doctest::Approx(100.0));
}

TEST_CASE("early stopping cuts training short once the AUC target is met") {
  Rng rng(21);
  Network net = tiny_net(rng);
  Rng drng(22);
  auto pos = toy_patches(drng, 8, true, 8);
  auto neg = toy_patches(drng, 8, false, 8);
  TissueTrainConfig hyper;
  hyper.epochs = 50;
  hyper.batch_size = 8;
  hyper.lr = 0.05f;
  hyper.early_stop_auc = 1.0;
  TrainLog log = train_tissue(net, pos, neg, pos, neg, hyper, rng);
  CHECK(int(log.entries.size()) < 50);
  CHECK(log.entries.back().val_auc >= 1.0);
}

TEST_CASE("training requires both classes") {
  Rng rng(5);
  Network net = tiny_net(rng);
  auto pos = toy_patches(rng, 4, true, 8);
  CHECK_THROWS_AS(
      train_tissue(net, pos, {}, pos, pos, TissueTrainConfig{}, rng),
      std::invalid_argument);
}

TEST_CASE("two seeded training runs agree bitwise") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    Network net = tiny_net(rng);
    Rng drng(1000);
    auto pos = toy_patches(drng, 6, true, 8);
    auto neg = toy_patches(drng, 6, false, 8);
    TissueTrainConfig hyper;
    hyper.epochs = 3;
    hyper.batch_size = 4;
    train_tissue(net, pos, neg, pos, neg, hyper, rng);
    std::vector<float> flat;
    for (const auto& [k, p] : net.params)
      flat.insert(flat.end(), p.vec().begin(), p.vec().end());
    return flat;
  };
  auto a = run(9001), b = run(9001);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}
