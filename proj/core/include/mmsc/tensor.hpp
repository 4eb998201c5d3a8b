#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mmsc {

struct TensorImpl {
  std::vector<int> shape;
  std::vector<float> data;
  std::vector<float> grad;  // allocated lazily, same length as data
  bool requires_grad = false;
};

// Shared-ownership handle to an n-d float array. Images use NCHW order.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<int> shape, bool requires_grad = false);
  Tensor(std::vector<int> shape, std::vector<float> data,
         bool requires_grad = false);
  Tensor(std::vector<int> shape, std::initializer_list<float> data,
         bool requires_grad = false)
      : Tensor(std::move(shape), std::vector<float>(data), requires_grad) {}

  static Tensor scalar(float v);
  static Tensor zeros_like(const Tensor& t);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const { return impl_->shape; }
  std::size_t size() const { return impl_->data.size(); }
  int dim(int i) const { return impl_->shape[size_t(i)]; }
  int ndim() const { return int(impl_->shape.size()); }

  float* data() { return impl_->data.data(); }
  const float* data() const { return impl_->data.data(); }
  std::vector<float>& vec() { return impl_->data; }
  const std::vector<float>& vec() const { return impl_->data; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }

  bool has_grad() const { return !impl_->grad.empty(); }
  // Zero-initializes the gradient buffer on first access.
  std::vector<float>& grad();
  const std::vector<float>& grad() const { return impl_->grad; }
  void zero_grad();

  float item() const;

  bool same_shape(const Tensor& o) const { return impl_->shape == o.impl_->shape; }
  std::string shape_str() const;

  TensorImpl* impl() const { return impl_.get(); }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Define-by-run tape. Forward ops append backward closures; backward() runs
// them in reverse so every node's inputs are visited after the node itself.
class Graph {
 public:
  void record(std::function<void()> backward_fn) {
    tape_.push_back(std::move(backward_fn));
  }

  // Seeds root with gradient 1 and propagates to every requires_grad tensor
  // reachable from it. Gradients accumulate additively across fan-out.
  void backward(const Tensor& root);

  void clear() { tape_.clear(); }
  std::size_t size() const { return tape_.size(); }

 private:
  std::vector<std::function<void()>> tape_;
};

std::size_t shape_numel(const std::vector<int>& shape);

}  // namespace mmsc
