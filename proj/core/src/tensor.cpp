#include "mmsc/tensor.hpp"

#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mmsc {

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("negative tensor dimension");
    n *= std::size_t(d);
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  impl_->shape = std::move(shape);
  impl_->data.assign(shape_numel(impl_->shape), 0.0f);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data,
               bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  if (shape_numel(shape) != data.size())
    throw std::invalid_argument("tensor data length does not match shape");
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(float v) { return Tensor({1}, {v}); }

Tensor Tensor::zeros_like(const Tensor& t) { return Tensor(t.shape()); }

std::vector<float>& Tensor::grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0f);
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0f);
}

float Tensor::item() const {
  if (impl_->data.size() != 1)
    throw std::invalid_argument("item() on non-scalar tensor " + shape_str());
  return impl_->data[0];
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < impl_->shape.size(); ++i) {
    if (i) os << "x";
    os << impl_->shape[i];
  }
  os << "]";
  return os.str();
}

void Graph::backward(const Tensor& root) {
  if (root.size() != 1)
    throw std::invalid_argument("backward requires a scalar root, got " +
                                root.shape_str());
  Tensor r = root;
  r.grad()[0] = 1.0f;
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
}

}  // namespace mmsc
