#pragma once

#include "mmsc/tensor.hpp"

namespace mmsc {

// Forward ops over the tape. All inputs are NCHW for images. Each op records
// its backward closure on the graph when any input requires gradients.

// Cross-correlation (no kernel flip). kernel is OCkk, bias is O.
// Output spatial dim = floor((H + 2*pad - k) / stride) + 1.
Tensor conv2d(Graph& g, const Tensor& input, const Tensor& kernel,
              const Tensor& bias, int stride = 1, int pad = 0);

// 2x2 max pooling, stride 2. Backward routes gradient to the argmax cell;
// ties break to the first cell in row-major scan order.
Tensor maxpool2(Graph& g, const Tensor& input);

// input N x F, weights F x K, bias K.
Tensor dense(Graph& g, const Tensor& input, const Tensor& weights,
             const Tensor& bias);

Tensor relu(Graph& g, const Tensor& input);

// Row-wise softmax over N x K logits, max-subtracted for stability.
Tensor softmax(Graph& g, const Tensor& logits);

// Mean of -log p[label] over the batch; probabilities clamped to >= 1e-12.
Tensor cross_entropy(Graph& g, const Tensor& probs,
                     const std::vector<int>& labels);

// H = -sum p log p over a single normalized probability row (1 x K or K).
Tensor entropy_node(Graph& g, const Tensor& probs);

// Mean of squared differences; target carries no gradient.
Tensor mse_loss(Graph& g, const Tensor& pred, const Tensor& target);

// Concatenate two NCHW tensors along the channel axis.
Tensor concat_channels(Graph& g, const Tensor& a, const Tensor& b);

// Flatten NCHW -> N x (C*H*W).
Tensor flatten(Graph& g, const Tensor& input);

Tensor add(Graph& g, const Tensor& a, const Tensor& b);
Tensor sum(Graph& g, const Tensor& input);

// Plain entropy of a probability vector (not recorded on a tape). Rejects
// rows that do not sum to 1 within 1e-4. Natural log; 0 log 0 taken as 0.
double entropy(const std::vector<double>& probs);

}  // namespace mmsc
