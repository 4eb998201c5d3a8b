#include "mmsc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mmsc {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

bool wants_grad(std::initializer_list<const Tensor*> ins) {
  for (const Tensor* t : ins)
    if (t->requires_grad()) return true;
  return false;
}

// col is (C*k*k) x (Ho*Wo), row-major.
void im2col(const float* in, int C, int H, int W, int k, int stride, int pad,
            int Ho, int Wo, float* col) {
  const int plane = Ho * Wo;
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* row = col + (std::size_t(c) * k * k + ky * k + kx) * plane;
        for (int y = 0; y < Ho; ++y) {
          int iy = y * stride - pad + ky;
          if (iy < 0 || iy >= H) {
            std::fill(row + y * Wo, row + (y + 1) * Wo, 0.0f);
            continue;
          }
          const float* src = in + (std::size_t(c) * H + iy) * W;
          for (int x = 0; x < Wo; ++x) {
            int ix = x * stride - pad + kx;
            row[y * Wo + x] = (ix >= 0 && ix < W) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im_add(const float* col, int C, int H, int W, int k, int stride,
                int pad, int Ho, int Wo, float* in_grad) {
  const int plane = Ho * Wo;
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* row = col + (std::size_t(c) * k * k + ky * k + kx) * plane;
        for (int y = 0; y < Ho; ++y) {
          int iy = y * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          float* dst = in_grad + (std::size_t(c) * H + iy) * W;
          for (int x = 0; x < Wo; ++x) {
            int ix = x * stride - pad + kx;
            if (ix >= 0 && ix < W) dst[ix] += row[y * Wo + x];
          }
        }
      }
    }
  }
}

// C (MxN) += A (MxK) * B (KxN)
void matmul_add(const float* A, const float* B, float* C, int M, int K, int N) {
  for (int m = 0; m < M; ++m) {
    float* crow = C + std::size_t(m) * N;
    for (int kk = 0; kk < K; ++kk) {
      const float a = A[std::size_t(m) * K + kk];
      if (a == 0.0f) continue;
      const float* brow = B + std::size_t(kk) * N;
      for (int n = 0; n < N; ++n) crow[n] += a * brow[n];
    }
  }
}

// C (MxK2) += A (MxN) * B(K2xN)^T  (dot of rows)
void matmul_abt_add(const float* A, const float* B, float* C, int M, int N,
                    int K2) {
  for (int m = 0; m < M; ++m) {
    const float* arow = A + std::size_t(m) * N;
    for (int k2 = 0; k2 < K2; ++k2) {
      const float* brow = B + std::size_t(k2) * N;
      float acc = 0.0f;
      for (int n = 0; n < N; ++n) acc += arow[n] * brow[n];
      C[std::size_t(m) * K2 + k2] += acc;
    }
  }
}

// C (KxN) += A (OxK)^T * B (OxN)
void matmul_atb_add(const float* A, const float* B, float* C, int O, int K,
                    int N) {
  for (int o = 0; o < O; ++o) {
    const float* brow = B + std::size_t(o) * N;
    for (int k = 0; k < K; ++k) {
      const float a = A[std::size_t(o) * K + k];
      if (a == 0.0f) continue;
      float* crow = C + std::size_t(k) * N;
      for (int n = 0; n < N; ++n) crow[n] += a * brow[n];
    }
  }
}

}  // namespace

Tensor conv2d(Graph& g, const Tensor& input, const Tensor& kernel,
              const Tensor& bias, int stride, int pad) {
  require(input.ndim() == 4, "conv2d: input must be NCHW, got " +
                                 input.shape_str());
  require(kernel.ndim() == 4 && kernel.dim(2) == kernel.dim(3),
          "conv2d: kernel must be OCkk, got " + kernel.shape_str());
  require(stride >= 1, "conv2d: stride must be >= 1");
  require(pad >= 0, "conv2d: pad must be >= 0");
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2),
            W = input.dim(3);
  const int O = kernel.dim(0), k = kernel.dim(2);
  require(kernel.dim(1) == C, "conv2d: channel mismatch between input " +
                                  input.shape_str() + " and kernel " +
                                  kernel.shape_str());
  require(bias.size() == std::size_t(O),
          "conv2d: bias size mismatch with kernel " + kernel.shape_str());
  require(k <= H + 2 * pad && k <= W + 2 * pad,
          "conv2d: kernel " + kernel.shape_str() + " larger than padded input " +
              input.shape_str());
  const int Ho = (H + 2 * pad - k) / stride + 1;
  const int Wo = (W + 2 * pad - k) / stride + 1;
  const int K = C * k * k, plane = Ho * Wo;

  Tensor out({N, O, Ho, Wo},
             wants_grad({&input, &kernel, &bias}));
  std::vector<float> col(std::size_t(K) * plane);
  for (int n = 0; n < N; ++n) {
    im2col(input.data() + std::size_t(n) * C * H * W, C, H, W, k, stride, pad,
           Ho, Wo, col.data());
    float* o = out.data() + std::size_t(n) * O * plane;
    for (int oc = 0; oc < O; ++oc)
      std::fill(o + std::size_t(oc) * plane, o + std::size_t(oc + 1) * plane,
                bias.data()[oc]);
    matmul_add(kernel.data(), col.data(), o, O, K, plane);
  }

  if (out.requires_grad()) {
    Tensor in = input, ker = kernel, b = bias, res = out;
    g.record([in, ker, b, res, stride, pad]() mutable {
      if (res.impl()->grad.empty()) return;
      const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
      const int O = ker.dim(0), k = ker.dim(2);
      const int Ho = res.dim(2), Wo = res.dim(3);
      const int K = C * k * k, plane = Ho * Wo;
      std::vector<float> col(std::size_t(K) * plane);
      std::vector<float> dcol(std::size_t(K) * plane);
      for (int n = 0; n < N; ++n) {
        const float* go = res.grad().data() + std::size_t(n) * O * plane;
        if (b.requires_grad()) {
          for (int oc = 0; oc < O; ++oc) {
            float acc = 0.0f;
            const float* row = go + std::size_t(oc) * plane;
            for (int p = 0; p < plane; ++p) acc += row[p];
            b.grad()[oc] += acc;
          }
        }
        if (ker.requires_grad() || in.requires_grad())
          im2col(in.data() + std::size_t(n) * C * H * W, C, H, W, k, stride,
                 pad, Ho, Wo, col.data());
        if (ker.requires_grad())
          matmul_abt_add(go, col.data(), ker.grad().data(), O, plane, K);
        if (in.requires_grad()) {
          std::fill(dcol.begin(), dcol.end(), 0.0f);
          matmul_atb_add(ker.data(), go, dcol.data(), O, K, plane);
          col2im_add(dcol.data(), C, H, W, k, stride, pad, Ho, Wo,
                     in.grad().data() + std::size_t(n) * C * H * W);
        }
      }
    });
  }
  return out;
}

Tensor maxpool2(Graph& g, const Tensor& input) {
  require(input.ndim() == 4, "maxpool2: input must be NCHW, got " +
                                 input.shape_str());
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2),
            W = input.dim(3);
  require(H % 2 == 0 && W % 2 == 0,
          "maxpool2: spatial dims must be even, got " + input.shape_str());
  const int Ho = H / 2, Wo = W / 2;
  Tensor out({N, C, Ho, Wo}, input.requires_grad());
  auto argmax = std::make_shared<std::vector<int>>(out.size());
  const float* src = input.data();
  float* dst = out.data();
  for (int nc = 0; nc < N * C; ++nc) {
    const float* plane = src + std::size_t(nc) * H * W;
    for (int y = 0; y < Ho; ++y) {
      for (int x = 0; x < Wo; ++x) {
        // Row-major scan of the 2x2 window; strict > keeps the first max.
        int best = (2 * y) * W + 2 * x;
        float bv = plane[best];
        const int cand[3] = {(2 * y) * W + 2 * x + 1, (2 * y + 1) * W + 2 * x,
                             (2 * y + 1) * W + 2 * x + 1};
        for (int idx : cand) {
          if (plane[idx] > bv) {
            bv = plane[idx];
            best = idx;
          }
        }
        std::size_t oi = std::size_t(nc) * Ho * Wo + y * Wo + x;
        dst[oi] = bv;
        (*argmax)[oi] = best;
      }
    }
  }
  if (out.requires_grad()) {
    Tensor in = input, res = out;
    g.record([in, res, argmax, H, W, Ho, Wo]() mutable {
      if (res.impl()->grad.empty()) return;
      const int planes = in.dim(0) * in.dim(1);
      for (int nc = 0; nc < planes; ++nc) {
        float* gi = in.grad().data() + std::size_t(nc) * H * W;
        const float* go = res.grad().data() + std::size_t(nc) * Ho * Wo;
        const int* am = argmax->data() + std::size_t(nc) * Ho * Wo;
        for (int p = 0; p < Ho * Wo; ++p) gi[am[p]] += go[p];
      }
    });
  }
  return out;
}

Tensor dense(Graph& g, const Tensor& input, const Tensor& weights,
             const Tensor& bias) {
  require(input.ndim() == 2, "dense: input must be NxF, got " +
                                 input.shape_str());
  require(weights.ndim() == 2, "dense: weights must be FxK, got " +
                                   weights.shape_str());
  const int N = input.dim(0), F = input.dim(1), K = weights.dim(1);
  require(weights.dim(0) == F, "dense: inner dim mismatch between input " +
                                   input.shape_str() + " and weights " +
                                   weights.shape_str());
  require(bias.size() == std::size_t(K), "dense: bias size mismatch");
  Tensor out({N, K}, wants_grad({&input, &weights, &bias}));
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) out.data()[std::size_t(n) * K + k] = bias.data()[k];
  matmul_add(input.data(), weights.data(), out.data(), N, F, K);
  if (out.requires_grad()) {
    Tensor in = input, w = weights, b = bias, res = out;
    g.record([in, w, b, res]() mutable {
      if (res.impl()->grad.empty()) return;
      const int N = in.dim(0), F = in.dim(1), K = w.dim(1);
      const float* go = res.grad().data();
      if (b.requires_grad())
        for (int n = 0; n < N; ++n)
          for (int k = 0; k < K; ++k) b.grad()[k] += go[std::size_t(n) * K + k];
      if (w.requires_grad())
        matmul_atb_add(in.data(), go, w.grad().data(), N, F, K);
      if (in.requires_grad())
        matmul_abt_add(go, w.data(), in.grad().data(), N, K, F);
    });
  }
  return out;
}

Tensor relu(Graph& g, const Tensor& input) {
  Tensor out(input.shape(), input.requires_grad());
  for (std::size_t i = 0; i < input.size(); ++i)
    out.data()[i] = input.data()[i] > 0.0f ? input.data()[i] : 0.0f;
  if (out.requires_grad()) {
    Tensor in = input, res = out;
    g.record([in, res]() mutable {
      if (res.impl()->grad.empty()) return;
      for (std::size_t i = 0; i < in.size(); ++i)
        if (in.data()[i] > 0.0f) in.grad()[i] += res.grad()[i];
    });
  }
  return out;
}

Tensor softmax(Graph& g, const Tensor& logits) {
  require(logits.ndim() == 2, "softmax: logits must be NxK, got " +
                                  logits.shape_str());
  const int N = logits.dim(0), K = logits.dim(1);
  require(K >= 2, "softmax: needs K >= 2 classes");
  for (std::size_t i = 0; i < logits.size(); ++i)
    require(std::isfinite(logits.data()[i]), "softmax: non-finite logit");
  Tensor out({N, K}, logits.requires_grad());
  for (int n = 0; n < N; ++n) {
    const float* row = logits.data() + std::size_t(n) * K;
    float* orow = out.data() + std::size_t(n) * K;
    float mx = row[0];
    for (int k = 1; k < K; ++k) mx = std::max(mx, row[k]);
    float denom = 0.0f;
    for (int k = 0; k < K; ++k) {
      orow[k] = std::exp(row[k] - mx);
      denom += orow[k];
    }
    for (int k = 0; k < K; ++k) orow[k] /= denom;
  }
  if (out.requires_grad()) {
    Tensor in = logits, res = out;
    g.record([in, res]() mutable {
      if (res.impl()->grad.empty()) return;
      const int N = in.dim(0), K = in.dim(1);
      for (int n = 0; n < N; ++n) {
        const float* p = res.data() + std::size_t(n) * K;
        const float* go = res.grad().data() + std::size_t(n) * K;
        float dot = 0.0f;
        for (int k = 0; k < K; ++k) dot += go[k] * p[k];
        float* gi = in.grad().data() + std::size_t(n) * K;
        for (int k = 0; k < K; ++k) gi[k] += p[k] * (go[k] - dot);
      }
    });
  }
  return out;
}

Tensor cross_entropy(Graph& g, const Tensor& probs,
                     const std::vector<int>& labels) {
  require(probs.ndim() == 2, "cross_entropy: probs must be NxK");
  const int N = probs.dim(0), K = probs.dim(1);
  require(int(labels.size()) == N, "cross_entropy: label count mismatch");
  for (int lbl : labels)
    require(lbl >= 0 && lbl < K, "cross_entropy: label out of range [0," +
                                     std::to_string(K) + ")");
  double acc = 0.0;
  for (int n = 0; n < N; ++n) {
    float p = probs.data()[std::size_t(n) * K + labels[n]];
    acc -= std::log(std::max(p, 1e-12f));
  }
  Tensor out({1}, {float(acc / N)});
  if (probs.requires_grad()) {
    out.set_requires_grad(true);
    Tensor in = probs, res = out;
    g.record([in, res, labels]() mutable {
      if (res.impl()->grad.empty()) return;
      const int N = in.dim(0), K = in.dim(1);
      const float go = res.grad()[0];
      for (int n = 0; n < N; ++n) {
        float p = std::max(in.data()[std::size_t(n) * K + labels[n]], 1e-12f);
        in.grad()[std::size_t(n) * K + labels[n]] += go * (-1.0f / (p * N));
      }
    });
  }
  return out;
}

Tensor entropy_node(Graph& g, const Tensor& probs) {
  require(probs.ndim() <= 2, "entropy_node: expects a probability row");
  const std::size_t K = probs.size();
  require(K >= 2, "entropy_node: needs K >= 2");
  double h = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    double p = probs.data()[k];
    if (p > 1e-12) h -= p * std::log(p);
  }
  Tensor out({1}, {float(h)});
  if (probs.requires_grad()) {
    out.set_requires_grad(true);
    Tensor in = probs, res = out;
    g.record([in, res]() mutable {
      if (res.impl()->grad.empty()) return;
      const float go = res.grad()[0];
      for (std::size_t k = 0; k < in.size(); ++k) {
        float p = std::max(in.data()[k], 1e-12f);
        in.grad()[k] += go * (-(std::log(p) + 1.0f));
      }
    });
  }
  return out;
}

Tensor mse_loss(Graph& g, const Tensor& pred, const Tensor& target) {
  require(pred.same_shape(target), "mse_loss: shape mismatch " +
                                       pred.shape_str() + " vs " +
                                       target.shape_str());
  const std::size_t n = pred.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = double(pred.data()[i]) - double(target.data()[i]);
    acc += d * d;
  }
  Tensor out({1}, {float(acc / double(n))});
  if (pred.requires_grad()) {
    out.set_requires_grad(true);
    Tensor p = pred, t = target, res = out;
    g.record([p, t, res]() mutable {
      if (res.impl()->grad.empty()) return;
      const float go = res.grad()[0];
      const float scale = 2.0f / float(p.size());
      for (std::size_t i = 0; i < p.size(); ++i)
        p.grad()[i] += go * scale * (p.data()[i] - t.data()[i]);
    });
  }
  return out;
}

Tensor concat_channels(Graph& g, const Tensor& a, const Tensor& b) {
  require(a.ndim() == 4 && b.ndim() == 4, "concat_channels: inputs must be NCHW");
  require(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
          "concat_channels: mismatch " + a.shape_str() + " vs " + b.shape_str());
  const int N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2),
            W = a.dim(3);
  const std::size_t plane = std::size_t(H) * W;
  Tensor out({N, Ca + Cb, H, W}, wants_grad({&a, &b}));
  for (int n = 0; n < N; ++n) {
    float* o = out.data() + std::size_t(n) * (Ca + Cb) * plane;
    std::copy_n(a.data() + std::size_t(n) * Ca * plane, Ca * plane, o);
    std::copy_n(b.data() + std::size_t(n) * Cb * plane, Cb * plane,
                o + Ca * plane);
  }
  if (out.requires_grad()) {
    Tensor ta = a, tb = b, res = out;
    g.record([ta, tb, res, N, Ca, Cb, plane]() mutable {
      if (res.impl()->grad.empty()) return;
      for (int n = 0; n < N; ++n) {
        const float* go = res.grad().data() + std::size_t(n) * (Ca + Cb) * plane;
        if (ta.requires_grad()) {
          float* ga = ta.grad().data() + std::size_t(n) * Ca * plane;
          for (std::size_t i = 0; i < Ca * plane; ++i) ga[i] += go[i];
        }
        if (tb.requires_grad()) {
          float* gb = tb.grad().data() + std::size_t(n) * Cb * plane;
          for (std::size_t i = 0; i < Cb * plane; ++i)
            gb[i] += go[Ca * plane + i];
        }
      }
    });
  }
  return out;
}

Tensor flatten(Graph& g, const Tensor& input) {
  require(input.ndim() == 4, "flatten: input must be NCHW");
  const int N = input.dim(0);
  const int F = int(input.size()) / N;
  Tensor out({N, F}, input.vec(), input.requires_grad());
  if (out.requires_grad()) {
    Tensor in = input, res = out;
    g.record([in, res]() mutable {
      if (res.impl()->grad.empty()) return;
      for (std::size_t i = 0; i < in.size(); ++i)
        in.grad()[i] += res.grad()[i];
    });
  }
  return out;
}

Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), "add: shape mismatch " + a.shape_str() + " vs " +
                               b.shape_str());
  Tensor out(a.shape(), wants_grad({&a, &b}));
  for (std::size_t i = 0; i < a.size(); ++i)
    out.data()[i] = a.data()[i] + b.data()[i];
  if (out.requires_grad()) {
    Tensor ta = a, tb = b, res = out;
    g.record([ta, tb, res]() mutable {
      if (res.impl()->grad.empty()) return;
      for (std::size_t i = 0; i < res.size(); ++i) {
        if (ta.requires_grad()) ta.grad()[i] += res.grad()[i];
        if (tb.requires_grad()) tb.grad()[i] += res.grad()[i];
      }
    });
  }
  return out;
}

Tensor sum(Graph& g, const Tensor& input) {
  double acc = 0.0;
  for (std::size_t i = 0; i < input.size(); ++i) acc += input.data()[i];
  Tensor out({1}, {float(acc)});
  if (input.requires_grad()) {
    out.set_requires_grad(true);
    Tensor in = input, res = out;
    g.record([in, res]() mutable {
      if (res.impl()->grad.empty()) return;
      for (std::size_t i = 0; i < in.size(); ++i)
        in.grad()[i] += res.grad()[0];
    });
  }
  return out;
}

double entropy(const std::vector<double>& probs) {
  double s = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p))
      throw std::invalid_argument("entropy: probabilities must be in [0,1]");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-4)
    throw std::invalid_argument("entropy: input not normalized (sum " +
                                std::to_string(s) + ")");
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

}  // namespace mmsc
