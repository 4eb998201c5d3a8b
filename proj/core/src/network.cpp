#include "mmsc/network.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "mmsc/ops.hpp"

namespace mmsc {

namespace {
constexpr char kMagic[4] = {'M', 'S', 'D', 'C'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void ParamSet::add(const std::string& name, Tensor t) {
  if (params_.count(name))
    throw std::invalid_argument("duplicate parameter name: " + name);
  t.set_requires_grad(true);
  params_.emplace(name, std::move(t));
}

Tensor& ParamSet::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end())
    throw std::invalid_argument("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end())
    throw std::invalid_argument("unknown parameter: " + name);
  return it->second;
}

std::size_t ParamSet::numel() const {
  std::size_t n = 0;
  for (const auto& [k, v] : params_) n += v.size();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& [k, v] : params_) v.zero_grad();
}

ParamSet ParamSet::clone() const {
  ParamSet out;
  for (const auto& [k, v] : params_) out.add(k, Tensor(v.shape(), v.vec()));
  return out;
}

void ParamSet::copy_from(const ParamSet& other) {
  for (auto& [k, v] : params_) v.vec() = other.at(k).vec();
}

Tensor Network::forward(Graph& g, const Tensor& input, const Tensor* aux) const {
  Tensor cur = input;
  bool aux_consumed = false;
  for (const Layer& layer : layers) {
    switch (layer.kind) {
      case LayerKind::Conv: {
        int stride = int(layer.dims[3]), pad = int(layer.dims[4]);
        cur = conv2d(g, cur, params.at(layer.name + ".w"),
                     params.at(layer.name + ".b"), stride, pad);
        break;
      }
      case LayerKind::Dense:
        cur = dense(g, cur, params.at(layer.name + ".w"),
                    params.at(layer.name + ".b"));
        break;
      case LayerKind::MaxPool:
        cur = maxpool2(g, cur);
        break;
      case LayerKind::Relu:
        cur = relu(g, cur);
        break;
      case LayerKind::Softmax:
        cur = softmax(g, cur);
        break;
      case LayerKind::Flatten:
        cur = flatten(g, cur);
        break;
      case LayerKind::ConcatAux:
        if (!aux)
          throw std::invalid_argument(
              "network expects an auxiliary channel but none was given");
        cur = concat_channels(g, cur, *aux);
        aux_consumed = true;
        break;
    }
  }
  if (aux && !aux_consumed)
    throw std::invalid_argument(
        "auxiliary channel given to a network without an aux layer");
  return cur;
}

bool Network::has_aux_layer() const {
  for (const Layer& l : layers)
    if (l.kind == LayerKind::ConcatAux) return true;
  return false;
}

void init_params(Network& net, Rng& rng) {
  for (const Layer& layer : net.layers) {
    if (layer.kind == LayerKind::Conv) {
      int out_c = int(layer.dims[0]), in_c = int(layer.dims[1]),
          k = int(layer.dims[2]);
      double scale = std::sqrt(2.0 / double(in_c * k * k));
      Tensor& w = net.params.at(layer.name + ".w");
      for (auto& v : w.vec()) v = float(rng.normal() * scale);
      Tensor& b = net.params.at(layer.name + ".b");
      for (auto& v : b.vec()) v = 0.0f;
      (void)out_c;
    } else if (layer.kind == LayerKind::Dense) {
      int in_f = int(layer.dims[0]);
      double scale = std::sqrt(2.0 / double(in_f));
      Tensor& w = net.params.at(layer.name + ".w");
      for (auto& v : w.vec()) v = float(rng.normal() * scale);
      Tensor& b = net.params.at(layer.name + ".b");
      for (auto& v : b.vec()) v = 0.0f;
    }
  }
}

SgdOptimizer::SgdOptimizer(float lr, float momentum) : lr_(lr), momentum_(momentum) {
  if (!(lr > 0.0f)) throw std::invalid_argument("sgd: lr must be > 0");
  if (momentum < 0.0f || momentum >= 1.0f)
    throw std::invalid_argument("sgd: momentum must be in [0,1)");
}

void SgdOptimizer::step(ParamSet& params) {
  for (auto& [name, p] : params) {
    if (!p.has_grad())
      throw std::invalid_argument("sgd: missing gradient for parameter " + name);
    auto& v = velocity_[name];
    if (v.empty()) v.assign(p.size(), 0.0f);
    const auto& g = p.grad();
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = momentum_ * v[i] + g[i];
      p.data()[i] -= lr_ * v[i];
    }
  }
}

void sgd_step(ParamSet& params,
              const std::map<std::string, std::vector<float>>& grads,
              std::map<std::string, std::vector<float>>& velocity, float lr,
              float momentum) {
  if (!(lr > 0.0f)) throw std::invalid_argument("sgd: lr must be > 0");
  if (momentum < 0.0f || momentum >= 1.0f)
    throw std::invalid_argument("sgd: momentum must be in [0,1)");
  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end() || git->second.size() != p.size())
      throw std::invalid_argument("sgd: missing gradient for parameter " + name);
    auto& v = velocity[name];
    if (v.empty()) v.assign(p.size(), 0.0f);
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = momentum * v[i] + git->second[i];
      p.data()[i] -= lr * v[i];
    }
  }
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {(unsigned char)(v & 0xff), (unsigned char)(v >> 8 & 0xff),
                        (unsigned char)(v >> 16 & 0xff),
                        (unsigned char)(v >> 24 & 0xff)};
  os.write(reinterpret_cast<char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 |
         std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

void put_floats(std::ostream& os, const std::vector<float>& v) {
  // Little-endian host assumed; static_assert guards the layout.
  static_assert(sizeof(float) == 4);
  os.write(reinterpret_cast<const char*>(v.data()),
           std::streamsize(v.size() * 4));
}

void get_floats(std::istream& is, std::vector<float>& v) {
  is.read(reinterpret_cast<char*>(v.data()), std::streamsize(v.size() * 4));
}

// Weight/bias element counts implied by a layer's dims.
std::pair<std::size_t, std::size_t> param_counts(const Layer& l) {
  switch (l.kind) {
    case LayerKind::Conv: {
      std::size_t o = l.dims[0], c = l.dims[1], k = l.dims[2];
      return {o * c * k * k, o};
    }
    case LayerKind::Dense:
      return {std::size_t(l.dims[0]) * l.dims[1], l.dims[1]};
    default:
      return {0, 0};
  }
}

}  // namespace

void save_checkpoint(const Network& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for write: " + path);
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, std::uint32_t(net.layers.size()));
  for (const Layer& l : net.layers) {
    unsigned char tag = (unsigned char)l.kind;
    unsigned char nd = (unsigned char)l.dims.size();
    os.write(reinterpret_cast<char*>(&tag), 1);
    os.write(reinterpret_cast<char*>(&nd), 1);
    for (std::uint32_t d : l.dims) put_u32(os, d);
    auto [nw, nb] = param_counts(l);
    if (nw) {
      put_floats(os, net.params.at(l.name + ".w").vec());
      put_floats(os, net.params.at(l.name + ".b").vec());
    }
    (void)nb;
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

Network load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  std::uint32_t version = get_u32(is);
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version) + " in " + path);
  std::uint32_t layer_count = get_u32(is);
  Network net;
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    unsigned char tag = 0, nd = 0;
    is.read(reinterpret_cast<char*>(&tag), 1);
    is.read(reinterpret_cast<char*>(&nd), 1);
    Layer l;
    l.kind = LayerKind(tag);
    for (int d = 0; d < int(nd); ++d) l.dims.push_back(get_u32(is));
    l.name = "layer" + std::to_string(i);
    auto [nw, nb] = param_counts(l);
    if (nw) {
      std::vector<int> wshape, bshape;
      if (l.kind == LayerKind::Conv)
        wshape = {int(l.dims[0]), int(l.dims[1]), int(l.dims[2]),
                  int(l.dims[2])};
      else
        wshape = {int(l.dims[0]), int(l.dims[1])};
      Tensor w(wshape), b({int(nb)});
      get_floats(is, w.vec());
      get_floats(is, b.vec());
      net.params.add(l.name + ".w", std::move(w));
      net.params.add(l.name + ".b", std::move(b));
    }
    net.layers.push_back(std::move(l));
    if (!is) throw std::runtime_error("truncated checkpoint: " + path);
  }
  return net;
}

}  // namespace mmsc
