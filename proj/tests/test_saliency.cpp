#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <filesystem>

#include "mmsc/ops.hpp"
#include "mmsc/rng.hpp"
#include "mmsc/saliency.hpp"
#include "mmsc/tissue.hpp"
#include "oracle.hpp"

using namespace mmsc;

namespace {

Network tiny_net(Rng& rng, int side = 8) {
  TissueNetConfig cfg;
  cfg.input_size = side;
  cfg.conv_blocks = {{3, 1}};
  cfg.dense_widths = {6};
  return build_tissue_net(cfg, rng);
}

Patch noise_patch(Rng& rng, int side = 8) {
  Patch p;
  p.pixels = ImageF(side, side);
  for (auto& v : p.pixels.data) v = float(rng.uniform(0.0, 1.0));
  return p;
}

}  // namespace

TEST_CASE("entropy_node values and gradient") {
  Graph g;
  CHECK(entropy_node(g, Tensor({1, 2}, {0.5f, 0.5f})).item() ==
        doctest::Approx(std::log(2.0)));
  CHECK(entropy_node(g, Tensor({1, 2}, {1.0f, 0.0f})).item() ==
        doctest::Approx(0.0));
  CHECK(entropy_node(g, Tensor({1, 2}, {0.9f, 0.1f})).item() ==
        doctest::Approx(-0.9 * std::log(0.9) - 0.1 * std::log(0.1))
            .epsilon(1e-6));

  // dH/dp_i = -(log p_i + 1).
  Tensor p({1, 2}, {0.7f, 0.3f}, true);
  Graph g2;
  Tensor h = entropy_node(g2, p);
  g2.backward(h);
  CHECK(p.grad()[0] == doctest::Approx(-(std::log(0.7) + 1.0)).epsilon(1e-5));
  CHECK(p.grad()[1] == doctest::Approx(-(std::log(0.3) + 1.0)).epsilon(1e-5));
}

TEST_CASE("zeroed classifier head yields zero saliency everywhere") {
  Rng rng(17);
  Network net = tiny_net(rng);
  // Zero the final dense layer: softmax is constant, entropy flat in x.
  std::string last;
  for (const Layer& l : net.layers)
    if (l.kind == LayerKind::Dense) last = l.name;
  for (auto& v : net.params.at(last + ".w").vec()) v = 0.0f;
  for (auto& v : net.params.at(last + ".b").vec()) v = 0.0f;

  ImageF sal = patch_saliency(net, noise_patch(rng));
  for (float v : sal.data) CHECK(v == 0.0f);
}

TEST_CASE("patch saliency matches |dH/dx| from central differences") {
  Rng rng(18);
  Network net = tiny_net(rng);
  Patch p = noise_patch(rng);
  ImageF sal = patch_saliency(net, p);
  REQUIRE(sal.height == 8);
  REQUIRE(sal.width == 8);
  for (float v : sal.data) CHECK(v >= 0.0f);

  oracle::RefNet ref = oracle::RefNet::from(net);
  std::vector<double> x(p.pixels.data.begin(), p.pixels.data.end());
  const double h = 1e-4;
  Rng pick(19);
  for (int sample = 0; sample < 20; ++sample) {
    std::size_t i = std::size_t(pick.uniform_int(0, 63));
    double orig = x[i];
    x[i] = orig + h;
    double hp = ref.entropy(x, 1, 8, 8);
    x[i] = orig - h;
    double hm = ref.entropy(x, 1, 8, 8);
    x[i] = orig;
    double fd = std::abs((hp - hm) / (2.0 * h));
    CHECK(sal.data[i] == doctest::Approx(fd).epsilon(2e-2).scale(0.1));
  }

  Patch wrong;
  wrong.pixels = ImageF(16, 16);
  CHECK_THROWS_AS(patch_saliency(net, wrong), std::invalid_argument);
}

TEST_CASE("gated saliency honours both gates") {
  Rng rng(23);
  Network net = tiny_net(rng);
  ImageF scan(32, 32);
  for (auto& v : scan.data) v = float(rng.uniform(0.0, 1.0));

  GatedSaliencyOptions opt;
  opt.stride = 8;
  opt.positive_cutoff = -1.0;  // admit every patch; heat is the only gate

  // Cold heatmap suppresses everything.
  ImageF cold(4, 4, 0.0f);
  ImageF none = gated_saliency(scan, net, cold, opt);
  for (float v : none.data) CHECK(v == 0.0f);

  // Impossible classifier cutoff also suppresses everything, even when the
  // heatmap is fully hot.
  ImageF hot(4, 4, 1.0f);
  GatedSaliencyOptions strict = opt;
  strict.positive_cutoff = 2.0;
  ImageF vetoed = gated_saliency(scan, net, hot, strict);
  for (float v : vetoed.data) CHECK(v == 0.0f);

  // Half-hot support: output is exactly zero outside it.
  ImageF half(4, 4, 0.0f);
  for (int r = 0; r < 4; ++r)
    for (int c = 2; c < 4; ++c) half.at(r, c) = 1.0f;
  ImageF gated = gated_saliency(scan, net, half, opt);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 16; ++c) CHECK(gated.at(r, c) == 0.0f);
  double right_mass = 0.0;
  for (int r = 0; r < 32; ++r)
    for (int c = 16; c < 32; ++c) right_mass += gated.at(r, c);
  CHECK(right_mass > 0.0);
}

TEST_CASE("contributions add across overlapping admitted patches") {
  Rng rng(29);
  Network net = tiny_net(rng);
  ImageF scan(16, 16);
  for (auto& v : scan.data) v = float(rng.uniform(0.0, 1.0));
  ImageF hot(4, 4, 1.0f);

  GatedSaliencyOptions opt;
  opt.stride = 8;
  opt.positive_cutoff = -1.0;
  ImageF out = gated_saliency(scan, net, hot, opt);

  // Independent reconstruction: sum per-patch saliency at each offset.
  ImageF expect(16, 16, 0.0f);
  for (int i = 0; i + 8 <= 16; i += 8)
    for (int j = 0; j + 8 <= 16; j += 8) {
      Patch p;
      p.pixels = ImageF(8, 8);
      for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) p.pixels.at(r, c) = scan.at(i + r, j + c);
      ImageF sal = patch_saliency(net, p);
      for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) expect.at(i + r, j + c) += sal.at(r, c);
    }
  for (std::size_t k = 0; k < out.size(); ++k)
    CHECK(out.data[k] == doctest::Approx(expect.data[k]).epsilon(1e-6));

  // Overlap normalization divides by the contribution count.
  GatedSaliencyOptions norm = opt;
  norm.stride = 4;
  norm.normalize_overlap = true;
  ImageF averaged = gated_saliency(scan, net, hot, norm);
  float mx = 0.0f;
  for (float v : averaged.data) mx = std::max(mx, v);
  CHECK(mx > 0.0f);
}

TEST_CASE("saliency export writes both artifacts") {
  Rng rng(31);
  ImageF sal(8, 8);
  for (auto& v : sal.data) v = float(rng.uniform(0.0, 2.0));  // unnormalized
  auto dir = std::filesystem::temp_directory_path() / "mmsc_sal_tests";
  std::filesystem::create_directories(dir);
  std::string pgm = (dir / "s.pgm").string();
  std::string raw = (dir / "s.bin").string();
  export_saliency(sal, pgm, raw);
  ImageF viewed = read_pgm(pgm);
  float mx = 0.0f;
  for (float v : viewed.data) mx = std::max(mx, v);
  CHECK(mx == doctest::Approx(1.0f));  // scaled to the image max
  CHECK(std::filesystem::file_size(raw) > sal.size() * 4);

  ImageF scan(8, 8, 0.4f);
  ImageF ann(8, 8, 0.0f);
  ann.at(4, 4) = 1.0f;
  std::string png = (dir / "composite.png").string();
  export_saliency_composite(scan, sal, &ann, png);
  CHECK(std::filesystem::file_size(png) > 0);
}
