#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "crossview/kernels.hpp"
#include "crossview/rng.hpp"
#include "crossview/tensor.hpp"

namespace crossview::nn {

enum class Mode { train, eval };

// A named tensor with its gradient and Adam moments. Buffers that are
// checkpointed but not optimized (batch-norm running stats) set
// trainable=false and carry no grad/moment storage.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> adam_m;
  Tensor<T> adam_v;
  bool trainable = true;

  void setup(std::string param_name, std::vector<int> shape, bool is_trainable = true) {
    name = std::move(param_name);
    trainable = is_trainable;
    value = Tensor<T>(shape);
    if (trainable) {
      grad = Tensor<T>(shape);
      adam_m = Tensor<T>(shape);
      adam_v = Tensor<T>(shape);
    }
  }
};

template <typename T>
using ParamRefs = std::vector<Param<T>*>;

template <typename T>
void zero_grads(const ParamRefs<T>& params) {
  for (Param<T>* p : params) {
    if (p->trainable) p->grad.set_zero();
  }
}

template <typename T>
std::size_t trainable_count(const ParamRefs<T>& params) {
  std::size_t n = 0;
  for (const Param<T>* p : params) {
    if (p->trainable) n += p->value.numel();
  }
  return n;
}

struct AdamConfig {
  double lr = 0.0002;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One Adam update over every trainable param; increments t first (so the
// first call uses t = 1 bias corrections).
template <typename T>
void adam_update(const ParamRefs<T>& params, std::uint64_t& t, const AdamConfig& cfg) {
  ++t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  const T inv_bc1 = static_cast<T>(1.0 / bc1);
  const T inv_bc2 = static_cast<T>(1.0 / bc2);
  for (Param<T>* p : params) {
    if (!p->trainable) continue;
    kernels::adam_step(p->value.data(), p->grad.data(), p->adam_m.data(), p->adam_v.data(),
                       p->value.numel(), static_cast<T>(cfg.lr), static_cast<T>(cfg.beta1),
                       static_cast<T>(cfg.beta2), static_cast<T>(cfg.eps), inv_bc1, inv_bc2);
  }
}

template <typename T>
void normal_fill(Tensor<T>& t, Xoshiro256& rng, double stddev) {
  for (std::size_t i = 0; i < t.numel(); ++i) {
    t[i] = static_cast<T>(rng.normal() * stddev);
  }
}

// Strided convolution, NCHW, square kernel, zero padding. Backed by
// im2col + GEMM; batch items run in parallel, weight-gradient contributions
// are reduced in batch order so results do not depend on the thread count.
template <typename T>
class Conv2d {
 public:
  Conv2d(const std::string& name, int in_ch, int out_ch, int k, int stride, int pad);
  void init(Xoshiro256& rng, double stddev);
  void collect(ParamRefs<T>& out);

  Tensor<T> forward(const Tensor<T>& x);
  // dy matches the forward output. Returns dx when need_dx.
  Tensor<T> backward(const Tensor<T>& dy, bool need_dx, bool accum_param_grads);
  void release_cache() { x_ = Tensor<T>(); }

  Param<T> weight;  // [out, in, k, k]
  Param<T> bias;    // [out]

  int out_height(int h) const { return (h + 2 * pad_ - k_) / stride_ + 1; }

 private:
  int in_ch_, out_ch_, k_, stride_, pad_;
  Tensor<T> x_;
};

// Transposed (fractionally strided) convolution. Weight layout [in, out, k, k].
// out side = (in side - 1) * stride - 2*pad + k + output_padding.
template <typename T>
class ConvTranspose2d {
 public:
  ConvTranspose2d(const std::string& name, int in_ch, int out_ch, int k, int stride, int pad,
                  int output_pad);
  void init(Xoshiro256& rng, double stddev);
  void collect(ParamRefs<T>& out);

  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& dy, bool need_dx, bool accum_param_grads);
  void release_cache() { x_ = Tensor<T>(); }

  Param<T> weight;  // [in, out, k, k]
  Param<T> bias;    // [out]

  int out_height(int h) const { return (h - 1) * stride_ - 2 * pad_ + k_ + output_pad_; }

 private:
  int in_ch_, out_ch_, k_, stride_, pad_, output_pad_;
  Tensor<T> x_;
};

// Per-channel batch normalization over (B, H, W). Train mode normalizes with
// biased batch statistics and refreshes running estimates; eval mode uses the
// running estimates and caches nothing.
template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d(const std::string& name, int channels, double momentum = 0.1, double eps = 1e-5);
  void init();
  void collect(ParamRefs<T>& out);

  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& dy, bool accum_param_grads);
  void release_cache() { x_hat_ = Tensor<T>(); }

  Param<T> gamma, beta;
  Param<T> running_mean, running_var;  // trainable=false buffers

 private:
  int channels_;
  double momentum_, eps_;
  Tensor<T> x_hat_;
  std::vector<T> invstd_;
  std::size_t per_channel_n_ = 0;
};

// slope 0 is plain ReLU.
template <typename T>
class LeakyReLU {
 public:
  explicit LeakyReLU(T slope) : slope_(slope) {}
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& dy) const;
  void release_cache() { y_ = Tensor<T>(); }

 private:
  T slope_;
  Tensor<T> y_;
};

template <typename T>
class Tanh {
 public:
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& dy) const;
  void release_cache() { y_ = Tensor<T>(); }

 private:
  Tensor<T> y_;
};

template <typename T>
class Linear {
 public:
  Linear(const std::string& name, int in_features, int out_features);
  void init(Xoshiro256& rng, double stddev);
  void collect(ParamRefs<T>& out);

  Tensor<T> forward(const Tensor<T>& x);  // [B, in] -> [B, out]
  Tensor<T> backward(const Tensor<T>& dy, bool need_dx, bool accum_param_grads);
  void release_cache() { x_ = Tensor<T>(); }

  Param<T> weight;  // [out, in]
  Param<T> bias;    // [out]

 private:
  int in_features_, out_features_;
  Tensor<T> x_;
};

// [B, C, H, W] -> [B, C] spatial mean.
template <typename T>
class GlobalAvgPool {
 public:
  Tensor<T> forward(const Tensor<T>& x);
  Tensor<T> backward(const Tensor<T>& dy) const;

 private:
  int h_ = 0, w_ = 0;
};

// Concatenate along the channel axis; both inputs [B, *, H, W].
template <typename T>
Tensor<T> channel_concat(const Tensor<T>& a, const Tensor<T>& b);
// Split dx of a concat back into the two channel blocks.
template <typename T>
void channel_split(const Tensor<T>& d, int a_channels, Tensor<T>& da, Tensor<T>& db);

}  // namespace crossview::nn
