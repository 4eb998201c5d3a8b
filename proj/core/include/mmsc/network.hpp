#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mmsc/rng.hpp"
#include "mmsc/tensor.hpp"

namespace mmsc {

// Named parameter tensors; all entries require gradients.
class ParamSet {
 public:
  void add(const std::string& name, Tensor t);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }
  std::size_t count() const { return params_.size(); }
  std::size_t numel() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  // Deep copy; the clone shares nothing with the original.
  ParamSet clone() const;
  void copy_from(const ParamSet& other);

 private:
  std::map<std::string, Tensor> params_;
};

enum class LayerKind : std::uint8_t {
  Conv = 1,
  Dense = 2,
  MaxPool = 3,
  Relu = 4,
  Softmax = 5,
  Flatten = 6,
  ConcatAux = 7,  // concatenates the auxiliary channel at this point
};

// One entry of a sequential net. Conv dims: {out_c, in_c, k, stride, pad};
// Dense dims: {in_f, out_f}; others carry no dims.
struct Layer {
  LayerKind kind;
  std::vector<std::uint32_t> dims;
  std::string name;  // parameter key prefix, e.g. "conv0"
};

// Sequential network: layer list plus its ParamSet. Forward is define-by-run
// on a caller-provided Graph.
struct Network {
  std::vector<Layer> layers;
  ParamSet params;

  // aux, when given, is consumed by the ConcatAux layer (NCHW, matching the
  // feature map's spatial dims at that point).
  Tensor forward(Graph& g, const Tensor& input,
                 const Tensor* aux = nullptr) const;
  bool has_aux_layer() const;
};

// He-style initialization scaled by fan-in; deterministic given the rng.
void init_params(Network& net, Rng& rng);

// Momentum SGD. v <- momentum*v + g; p <- p - lr*v. Throws if any parameter
// is missing a gradient.
class SgdOptimizer {
 public:
  SgdOptimizer(float lr, float momentum);
  void step(ParamSet& params);

 private:
  float lr_, momentum_;
  std::map<std::string, std::vector<float>> velocity_;
};

// Single step on an explicit gradient map (parameter name -> gradient,
// same length as the parameter). Velocity is caller-owned state.
void sgd_step(ParamSet& params,
              const std::map<std::string, std::vector<float>>& grads,
              std::map<std::string, std::vector<float>>& velocity, float lr,
              float momentum);

// Checkpoint container format: magic "MSDC", u32 LE version, u32 LE layer
// count, then per layer: u8 kind tag, u8 dim count, u32 LE dims, f32 LE
// weights then biases. Unknown versions are rejected.
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

}  // namespace mmsc
