#include "crossview/nn.hpp"

#include <cassert>

#include "crossview/threadpool.hpp"

namespace crossview::nn {

namespace {

// Patch matrix layouts for conv-as-GEMM. Geometry: a stride-s, pad-p, k x k
// convolution from an (H, W) image to an (OH, OW) grid of patches. The same
// mapping serves the transposed convolution with image and patch-grid roles
// swapped.
//
// im2col: cols[(c*k + ky)*k + kx][oy*OW + ox] = x[c][oy*s + ky - p][ox*s + kx - p]
// im2row: the transpose of the above, rows indexed by patch.
// col2im: scatter-add of cols back into the image, fixed loop order.

template <typename T>
void im2col(const T* x, int channels, int h, int w, int k, int stride, int pad,
            int oh, int ow, T* cols) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t patches = static_cast<std::size_t>(oh) * ow;
  std::size_t row = 0;
  for (int c = 0; c < channels; ++c) {
    const T* xc = x + c * plane;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++row) {
        T* dst = cols + row * patches;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) {
            for (int ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = T(0);
            continue;
          }
          const T* src = xc + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride + kx - pad;
            dst[oy * ow + ox] = (ix < 0 || ix >= w) ? T(0) : src[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void im2row(const T* x, int channels, int h, int w, int k, int stride, int pad,
            int oh, int ow, T* rows) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t kcols = static_cast<std::size_t>(channels) * k * k;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      T* dst = rows + (static_cast<std::size_t>(oy) * ow + ox) * kcols;
      std::size_t col = 0;
      for (int c = 0; c < channels; ++c) {
        const T* xc = x + c * plane;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * stride + ky - pad;
          for (int kx = 0; kx < k; ++kx, ++col) {
            const int ix = ox * stride + kx - pad;
            dst[col] = (iy < 0 || iy >= h || ix < 0 || ix >= w)
                           ? T(0)
                           : xc[static_cast<std::size_t>(iy) * w + ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, int channels, int h, int w, int k, int stride, int pad,
                int oh, int ow, T* x) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t patches = static_cast<std::size_t>(oh) * ow;
  std::size_t row = 0;
  for (int c = 0; c < channels; ++c) {
    T* xc = x + c * plane;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++row) {
        const T* src = cols + row * patches;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          T* dstrow = xc + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride + kx - pad;
            if (ix >= 0 && ix < w) dstrow[ix] += src[oy * ow + ox];
          }
        }
      }
    }
  }
}

// Reduce per-batch-item contributions into an accumulator in batch order,
// independent of how the contributions were computed across threads.
template <typename T>
void ordered_reduce(const std::vector<Tensor<T>>& contribs, Tensor<T>& acc) {
  for (const Tensor<T>& c : contribs) {
    kernels::add(c.data(), acc.data(), acc.numel());
  }
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(const std::string& name, int in_ch, int out_ch, int k, int stride, int pad)
    : in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(pad) {
  weight.setup(name + ".weight", {out_ch, in_ch, k, k});
  bias.setup(name + ".bias", {out_ch});
}

template <typename T>
void Conv2d<T>::init(Xoshiro256& rng, double stddev) {
  normal_fill(weight.value, rng, stddev);
  bias.value.set_zero();
}

template <typename T>
void Conv2d<T>::collect(ParamRefs<T>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) {
  assert(x.rank() == 4 && x.dim(1) == in_ch_);
  const int batch = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int oh = out_height(h), ow = out_height(w);
  const int kcol = in_ch_ * k_ * k_;
  const std::size_t patches = static_cast<std::size_t>(oh) * ow;
  x_ = x;
  Tensor<T> y({batch, out_ch_, oh, ow});
  parallel_for(batch, [&](std::int64_t b0, std::int64_t b1) {
    std::vector<T> cols(static_cast<std::size_t>(kcol) * patches);
    for (std::int64_t b = b0; b < b1; ++b) {
      im2col(x.slice(static_cast<int>(b)), in_ch_, h, w, k_, stride_, pad_, oh, ow, cols.data());
      T* out = y.slice(static_cast<int>(b));
      for (int c = 0; c < out_ch_; ++c) {
        const T bv = bias.value[c];
        T* row = out + c * patches;
        for (std::size_t p = 0; p < patches; ++p) row[p] = bv;
      }
      kernels::gemm(out_ch_, static_cast<int>(patches), kcol, weight.value.data(), kcol,
                    cols.data(), static_cast<int>(patches), out, static_cast<int>(patches),
                    /*accumulate=*/true);
    }
  });
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& dy, bool need_dx, bool accum_param_grads) {
  const int batch = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
  const int oh = dy.dim(2), ow = dy.dim(3);
  const int kcol = in_ch_ * k_ * k_;
  const std::size_t patches = static_cast<std::size_t>(oh) * ow;

  if (accum_param_grads) {
    std::vector<Tensor<T>> w_contrib(batch), b_contrib(batch);
    parallel_for(batch, [&](std::int64_t b0, std::int64_t b1) {
      std::vector<T> rows(patches * static_cast<std::size_t>(kcol));
      for (std::int64_t b = b0; b < b1; ++b) {
        im2row(x_.slice(static_cast<int>(b)), in_ch_, h, w, k_, stride_, pad_, oh, ow,
               rows.data());
        Tensor<T>& wc = w_contrib[b];
        wc = Tensor<T>({out_ch_, kcol});
        const T* g = dy.slice(static_cast<int>(b));
        kernels::gemm(out_ch_, kcol, static_cast<int>(patches), g, static_cast<int>(patches),
                      rows.data(), kcol, wc.data(), kcol, /*accumulate=*/false);
        Tensor<T>& bc = b_contrib[b];
        bc = Tensor<T>({out_ch_});
        for (int c = 0; c < out_ch_; ++c) {
          T s = T(0);
          const T* row = g + c * patches;
          for (std::size_t p = 0; p < patches; ++p) s += row[p];
          bc[c] = s;
        }
      }
    });
    ordered_reduce(w_contrib, weight.grad);
    ordered_reduce(b_contrib, bias.grad);
  }

  Tensor<T> dx;
  if (need_dx) {
    // W^T as [kcol, out_ch] for the input-gradient GEMM.
    Tensor<T> wt({kcol, out_ch_});
    for (int c = 0; c < out_ch_; ++c) {
      for (int r = 0; r < kcol; ++r) {
        wt.at(r, c) = weight.value[static_cast<std::size_t>(c) * kcol + r];
      }
    }
    dx = Tensor<T>({batch, in_ch_, h, w});
    parallel_for(batch, [&](std::int64_t b0, std::int64_t b1) {
      std::vector<T> colsg(static_cast<std::size_t>(kcol) * patches);
      for (std::int64_t b = b0; b < b1; ++b) {
        kernels::gemm(kcol, static_cast<int>(patches), out_ch_, wt.data(), out_ch_,
                      dy.slice(static_cast<int>(b)), static_cast<int>(patches), colsg.data(),
                      static_cast<int>(patches), /*accumulate=*/false);
        col2im_add(colsg.data(), in_ch_, h, w, k_, stride_, pad_, oh, ow,
                   dx.slice(static_cast<int>(b)));
      }
    });
  }
  return dx;
}

// ------------------------------------------------------- ConvTranspose2d

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(const std::string& name, int in_ch, int out_ch, int k,
                                    int stride, int pad, int output_pad)
    : in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(pad), output_pad_(output_pad) {
  weight.setup(name + ".weight", {in_ch, out_ch, k, k});
  bias.setup(name + ".bias", {out_ch});
}

template <typename T>
void ConvTranspose2d<T>::init(Xoshiro256& rng, double stddev) {
  normal_fill(weight.value, rng, stddev);
  bias.value.set_zero();
}

template <typename T>
void ConvTranspose2d<T>::collect(ParamRefs<T>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::forward(const Tensor<T>& x) {
  assert(x.rank() == 4 && x.dim(1) == in_ch_);
  const int batch = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int out_h = out_height(h), out_w = out_height(w);
  const int kcol = out_ch_ * k_ * k_;
  const std::size_t patches = static_cast<std::size_t>(h) * w;
  x_ = x;

  // Weight transposed to [out*k*k, in] so cols = W^T * x, then scattered.
  Tensor<T> wt({kcol, in_ch_});
  for (int ci = 0; ci < in_ch_; ++ci) {
    const T* src = weight.value.data() + static_cast<std::size_t>(ci) * kcol;
    for (int r = 0; r < kcol; ++r) wt.at(r, ci) = src[r];
  }

  Tensor<T> y({batch, out_ch_, out_h, out_w});
  const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
  parallel_for(batch, [&](std::int64_t b0, std::int64_t b1) {
    std::vector<T> cols(static_cast<std::size_t>(kcol) * patches);
    for (std::int64_t b = b0; b < b1; ++b) {
      kernels::gemm(kcol, static_cast<int>(patches), in_ch_, wt.data(), in_ch_,
                    x.slice(static_cast<int>(b)), static_cast<int>(patches), cols.data(),
                    static_cast<int>(patches), /*accumulate=*/false);
      T* out = y.slice(static_cast<int>(b));
      for (int c = 0; c < out_ch_; ++c) {
        const T bv = bias.value[c];
        T* row = out + c * out_plane;
        for (std::size_t p = 0; p < out_plane; ++p) row[p] = bv;
      }
      col2im_add(cols.data(), out_ch_, out_h, out_w, k_, stride_, pad_, h, w, out);
    }
  });
  return y;
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::backward(const Tensor<T>& dy, bool need_dx, bool accum_param_grads) {
  const int batch = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
  const int out_h = dy.dim(2), out_w = dy.dim(3);
  const int kcol = out_ch_ * k_ * k_;
  const std::size_t patches = static_cast<std::size_t>(h) * w;
  const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;

  if (accum_param_grads) {
    std::vector<Tensor<T>> w_contrib(batch), b_contrib(batch);
    parallel_for(batch, [&](std::int64_t b0, std::int64_t b1) {
      std::vector<T> rows(patches * static_cast<std::size_t>(kcol));
      for (std::int64_t b = b0; b < b1; ++b) {
        im2row(dy.slice(static_cast<int>(b)), out_ch_, out_h, out_w, k_, stride_, pad_, h, w,
               rows.data());
        Tensor<T>& wc = w_contrib[b];
        wc = Tensor<T>({in_ch_, kcol});
        kernels::gemm(in_ch_, kcol, static_cast<int>(patches), x_.slice(static_cast<int>(b)),
                      static_cast<int>(patches), rows.data(), kcol, wc.data(), kcol,
                      /*accumulate=*/false);
        Tensor<T>& bc = b_contrib[b];
        bc = Tensor<T>({out_ch_});
        const T* g = dy.slice(static_cast<int>(b));
        for (int c = 0; c < out_ch_; ++c) {
          T s = T(0);
          const T* row = g + c * out_plane;
          for (std::size_t p = 0; p < out_plane; ++p) s += row[p];
          bc[c] = s;
        }
      }
    });
    ordered_reduce(w_contrib, weight.grad);
    ordered_reduce(b_contrib, bias.grad);
  }

  Tensor<T> dx;
  if (need_dx) {
    dx = Tensor<T>({batch, in_ch_, h, w});
    parallel_for(batch, [&](std::int64_t b0, std::int64_t b1) {
      std::vector<T> cols(static_cast<std::size_t>(kcol) * patches);
      for (std::int64_t b = b0; b < b1; ++b) {
        im2col(dy.slice(static_cast<int>(b)), out_ch_, out_h, out_w, k_, stride_, pad_, h, w,
               cols.data());
        kernels::gemm(in_ch_, static_cast<int>(patches), kcol, weight.value.data(), kcol,
                      cols.data(), static_cast<int>(patches), dx.slice(static_cast<int>(b)),
                      static_cast<int>(patches), /*accumulate=*/false);
      }
    });
  }
  return dx;
}

// ----------------------------------------------------------- BatchNorm2d

template <typename T>
BatchNorm2d<T>::BatchNorm2d(const std::string& name, int channels, double momentum, double eps)
    : channels_(channels), momentum_(momentum), eps_(eps) {
  gamma.setup(name + ".gamma", {channels});
  beta.setup(name + ".beta", {channels});
  running_mean.setup(name + ".running_mean", {channels}, /*is_trainable=*/false);
  running_var.setup(name + ".running_var", {channels}, /*is_trainable=*/false);
}

template <typename T>
void BatchNorm2d<T>::init() {
  gamma.value.fill(T(1));
  beta.value.set_zero();
  running_mean.value.set_zero();
  running_var.value.fill(T(1));
}

template <typename T>
void BatchNorm2d<T>::collect(ParamRefs<T>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
  out.push_back(&running_mean);
  out.push_back(&running_var);
}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x, Mode mode) {
  assert(x.rank() == 4 && x.dim(1) == channels_);
  const int batch = x.dim(0);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor<T> y(x.shape());

  if (mode == Mode::eval) {
    parallel_for(batch, [&](std::int64_t b0, std::int64_t b1) {
      for (std::int64_t b = b0; b < b1; ++b) {
        const T* xb = x.slice(static_cast<int>(b));
        T* yb = y.slice(static_cast<int>(b));
        for (int c = 0; c < channels_; ++c) {
          const T inv = T(1) / std::sqrt(running_var.value[c] + static_cast<T>(eps_));
          const T g = gamma.value[c], bta = beta.value[c], mu = running_mean.value[c];
          const T* xr = xb + c * plane;
          T* yr = yb + c * plane;
          for (std::size_t p = 0; p < plane; ++p) yr[p] = g * ((xr[p] - mu) * inv) + bta;
        }
      }
    });
    return y;
  }

  const std::size_t n = static_cast<std::size_t>(batch) * plane;
  per_channel_n_ = n;

  // Sums accumulate per batch item (in double), reduced in batch order.
  std::vector<double> sum(static_cast<std::size_t>(batch) * channels_, 0.0);
  std::vector<double> sumsq(static_cast<std::size_t>(batch) * channels_, 0.0);
  parallel_for(batch, [&](std::int64_t b0, std::int64_t b1) {
    for (std::int64_t b = b0; b < b1; ++b) {
      const T* xb = x.slice(static_cast<int>(b));
      for (int c = 0; c < channels_; ++c) {
        const T* xr = xb + c * plane;
        double s = 0.0, sq = 0.0;
        for (std::size_t p = 0; p < plane; ++p) {
          const double v = static_cast<double>(xr[p]);
          s += v;
          sq += v * v;
        }
        sum[static_cast<std::size_t>(b) * channels_ + c] = s;
        sumsq[static_cast<std::size_t>(b) * channels_ + c] = sq;
      }
    }
  });

  invstd_.assign(channels_, T(0));
  std::vector<T> mean(channels_);
  for (int c = 0; c < channels_; ++c) {
    double s = 0.0, sq = 0.0;
    for (int b = 0; b < batch; ++b) {
      s += sum[static_cast<std::size_t>(b) * channels_ + c];
      sq += sumsq[static_cast<std::size_t>(b) * channels_ + c];
    }
    const double mu = s / static_cast<double>(n);
    double var = sq / static_cast<double>(n) - mu * mu;
    if (var < 0.0) var = 0.0;
    mean[c] = static_cast<T>(mu);
    invstd_[c] = static_cast<T>(1.0 / std::sqrt(var + eps_));

    const T mom = static_cast<T>(momentum_);
    running_mean.value[c] = (T(1) - mom) * running_mean.value[c] + mom * static_cast<T>(mu);
    const double unbiased = n > 1 ? var * static_cast<double>(n) / static_cast<double>(n - 1) : var;
    running_var.value[c] = (T(1) - mom) * running_var.value[c] + mom * static_cast<T>(unbiased);
  }

  x_hat_ = Tensor<T>(x.shape());
  parallel_for(batch, [&](std::int64_t b0, std::int64_t b1) {
    for (std::int64_t b = b0; b < b1; ++b) {
      const T* xb = x.slice(static_cast<int>(b));
      T* hb = x_hat_.slice(static_cast<int>(b));
      T* yb = y.slice(static_cast<int>(b));
      for (int c = 0; c < channels_; ++c) {
        const T mu = mean[c], inv = invstd_[c], g = gamma.value[c], bta = beta.value[c];
        const T* xr = xb + c * plane;
        T* hr = hb + c * plane;
        T* yr = yb + c * plane;
        for (std::size_t p = 0; p < plane; ++p) {
          const T xh = (xr[p] - mu) * inv;
          hr[p] = xh;
          yr[p] = g * xh + bta;
        }
      }
    }
  });
  return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& dy, bool accum_param_grads) {
  assert(!x_hat_.empty() && "backward requires a train-mode forward");
  const int batch = dy.dim(0);
  const std::size_t plane = static_cast<std::size_t>(dy.dim(2)) * dy.dim(3);
  const double n = static_cast<double>(per_channel_n_);

  std::vector<double> dsum(static_cast<std::size_t>(batch) * channels_, 0.0);
  std::vector<double> dsum_xhat(static_cast<std::size_t>(batch) * channels_, 0.0);
  parallel_for(batch, [&](std::int64_t b0, std::int64_t b1) {
    for (std::int64_t b = b0; b < b1; ++b) {
      const T* gb = dy.slice(static_cast<int>(b));
      const T* hb = x_hat_.slice(static_cast<int>(b));
      for (int c = 0; c < channels_; ++c) {
        const T* gr = gb + c * plane;
        const T* hr = hb + c * plane;
        double s = 0.0, sh = 0.0;
        for (std::size_t p = 0; p < plane; ++p) {
          s += static_cast<double>(gr[p]);
          sh += static_cast<double>(gr[p]) * static_cast<double>(hr[p]);
        }
        dsum[static_cast<std::size_t>(b) * channels_ + c] = s;
        dsum_xhat[static_cast<std::size_t>(b) * channels_ + c] = sh;
      }
    }
  });

  std::vector<T> dbeta_c(channels_), dgamma_c(channels_);
  for (int c = 0; c < channels_; ++c) {
    double s = 0.0, sh = 0.0;
    for (int b = 0; b < batch; ++b) {
      s += dsum[static_cast<std::size_t>(b) * channels_ + c];
      sh += dsum_xhat[static_cast<std::size_t>(b) * channels_ + c];
    }
    dbeta_c[c] = static_cast<T>(s);
    dgamma_c[c] = static_cast<T>(sh);
    if (accum_param_grads) {
      beta.grad[c] += static_cast<T>(s);
      gamma.grad[c] += static_cast<T>(sh);
    }
  }

  Tensor<T> dx(dy.shape());
  parallel_for(batch, [&](std::int64_t b0, std::int64_t b1) {
    for (std::int64_t b = b0; b < b1; ++b) {
      const T* gb = dy.slice(static_cast<int>(b));
      const T* hb = x_hat_.slice(static_cast<int>(b));
      T* db = dx.slice(static_cast<int>(b));
      for (int c = 0; c < channels_; ++c) {
        const T a = gamma.value[c] * invstd_[c];
        const T mean_dy = static_cast<T>(static_cast<double>(dbeta_c[c]) / n);
        const T mean_dy_xhat = static_cast<T>(static_cast<double>(dgamma_c[c]) / n);
        const T* gr = gb + c * plane;
        const T* hr = hb + c * plane;
        T* dr = db + c * plane;
        for (std::size_t p = 0; p < plane; ++p) {
          dr[p] = a * (gr[p] - mean_dy - hr[p] * mean_dy_xhat);
        }
      }
    }
  });
  return dx;
}

// ------------------------------------------------------------ activations

template <typename T>
Tensor<T> LeakyReLU<T>::forward(const Tensor<T>& x) {
  y_ = Tensor<T>(x.shape());
  kernels::leaky_relu(x.data(), y_.data(), x.numel(), slope_);
  return y_;
}

template <typename T>
Tensor<T> LeakyReLU<T>::backward(const Tensor<T>& dy) const {
  Tensor<T> dx(dy.shape());
  kernels::leaky_relu_grad(y_.data(), dy.data(), dx.data(), dy.numel(), slope_);
  return dx;
}

template <typename T>
Tensor<T> Tanh<T>::forward(const Tensor<T>& x) {
  y_ = Tensor<T>(x.shape());
  kernels::tanh_forward(x.data(), y_.data(), x.numel());
  return y_;
}

template <typename T>
Tensor<T> Tanh<T>::backward(const Tensor<T>& dy) const {
  Tensor<T> dx(dy.shape());
  kernels::tanh_grad(y_.data(), dy.data(), dx.data(), dy.numel());
  return dx;
}

// ----------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(const std::string& name, int in_features, int out_features)
    : in_features_(in_features), out_features_(out_features) {
  weight.setup(name + ".weight", {out_features, in_features});
  bias.setup(name + ".bias", {out_features});
}

template <typename T>
void Linear<T>::init(Xoshiro256& rng, double stddev) {
  normal_fill(weight.value, rng, stddev);
  bias.value.set_zero();
}

template <typename T>
void Linear<T>::collect(ParamRefs<T>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x) {
  assert(x.rank() == 2 && x.dim(1) == in_features_);
  const int batch = x.dim(0);
  x_ = x;
  Tensor<T> wt({in_features_, out_features_});
  for (int o = 0; o < out_features_; ++o) {
    for (int i = 0; i < in_features_; ++i) {
      wt.at(i, o) = weight.value.at(o, i);
    }
  }
  Tensor<T> y({batch, out_features_});
  for (int b = 0; b < batch; ++b) {
    for (int o = 0; o < out_features_; ++o) y.at(b, o) = bias.value[o];
  }
  kernels::gemm(batch, out_features_, in_features_, x.data(), in_features_, wt.data(),
                out_features_, y.data(), out_features_, /*accumulate=*/true);
  return y;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& dy, bool need_dx, bool accum_param_grads) {
  const int batch = dy.dim(0);
  if (accum_param_grads) {
    // dW += dy^T * x; the GEMM k-loop runs over the batch in order.
    Tensor<T> dyt({out_features_, batch});
    for (int b = 0; b < batch; ++b) {
      for (int o = 0; o < out_features_; ++o) dyt.at(o, b) = dy.at(b, o);
    }
    kernels::gemm(out_features_, in_features_, batch, dyt.data(), batch, x_.data(), in_features_,
                  weight.grad.data(), in_features_, /*accumulate=*/true);
    for (int o = 0; o < out_features_; ++o) {
      T s = T(0);
      for (int b = 0; b < batch; ++b) s += dy.at(b, o);
      bias.grad[o] += s;
    }
  }
  Tensor<T> dx;
  if (need_dx) {
    dx = Tensor<T>({batch, in_features_});
    kernels::gemm(batch, in_features_, out_features_, dy.data(), out_features_,
                  weight.value.data(), in_features_, dx.data(), in_features_,
                  /*accumulate=*/false);
  }
  return dx;
}

// -------------------------------------------------------- GlobalAvgPool

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x) {
  assert(x.rank() == 4);
  const int batch = x.dim(0), channels = x.dim(1);
  h_ = x.dim(2);
  w_ = x.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h_) * w_;
  Tensor<T> y({batch, channels});
  for (int b = 0; b < batch; ++b) {
    const T* xb = x.slice(b);
    for (int c = 0; c < channels; ++c) {
      const T* xr = xb + c * plane;
      T s = T(0);
      for (std::size_t p = 0; p < plane; ++p) s += xr[p];
      y.at(b, c) = s / static_cast<T>(plane);
    }
  }
  return y;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& dy) const {
  const int batch = dy.dim(0), channels = dy.dim(1);
  const std::size_t plane = static_cast<std::size_t>(h_) * w_;
  Tensor<T> dx({batch, channels, h_, w_});
  for (int b = 0; b < batch; ++b) {
    T* db = dx.slice(b);
    for (int c = 0; c < channels; ++c) {
      const T v = dy.at(b, c) / static_cast<T>(plane);
      T* dr = db + c * plane;
      for (std::size_t p = 0; p < plane; ++p) dr[p] = v;
    }
  }
  return dx;
}

// ------------------------------------------------------------- concat

template <typename T>
Tensor<T> channel_concat(const Tensor<T>& a, const Tensor<T>& b) {
  assert(a.rank() == 4 && b.rank() == 4 && a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) &&
         a.dim(3) == b.dim(3));
  const int batch = a.dim(0);
  Tensor<T> out({batch, a.dim(1) + b.dim(1), a.dim(2), a.dim(3)});
  const std::size_t a_sz = a.slice_numel(), b_sz = b.slice_numel();
  for (int i = 0; i < batch; ++i) {
    std::copy(a.slice(i), a.slice(i) + a_sz, out.slice(i));
    std::copy(b.slice(i), b.slice(i) + b_sz, out.slice(i) + a_sz);
  }
  return out;
}

template <typename T>
void channel_split(const Tensor<T>& d, int a_channels, Tensor<T>& da, Tensor<T>& db) {
  const int batch = d.dim(0), h = d.dim(2), w = d.dim(3);
  const int b_channels = d.dim(1) - a_channels;
  da = Tensor<T>({batch, a_channels, h, w});
  db = Tensor<T>({batch, b_channels, h, w});
  const std::size_t a_sz = da.slice_numel(), b_sz = db.slice_numel();
  for (int i = 0; i < batch; ++i) {
    std::copy(d.slice(i), d.slice(i) + a_sz, da.slice(i));
    std::copy(d.slice(i) + a_sz, d.slice(i) + a_sz + b_sz, db.slice(i));
  }
}

// explicit instantiations
template struct Param<float>;
template struct Param<double>;
template class Conv2d<float>;
template class Conv2d<double>;
template class ConvTranspose2d<float>;
template class ConvTranspose2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class LeakyReLU<float>;
template class LeakyReLU<double>;
template class Tanh<float>;
template class Tanh<double>;
template class Linear<float>;
template class Linear<double>;
template class GlobalAvgPool<float>;
template class GlobalAvgPool<double>;
template Tensor<float> channel_concat(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> channel_concat(const Tensor<double>&, const Tensor<double>&);
template void channel_split(const Tensor<float>&, int, Tensor<float>&, Tensor<float>&);
template void channel_split(const Tensor<double>&, int, Tensor<double>&, Tensor<double>&);

}  // namespace crossview::nn
