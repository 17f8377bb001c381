#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "eventnet/parallel.hpp"
#include "eventnet/rng.hpp"
#include "eventnet/tensor.hpp"

// The five layer primitives of the detector network, each with an exact
// hand-written backward pass. Everything is templated on the scalar type:
// float is the production path, double backs the finite-difference checks.
//
// Conventions shared by all layers:
//   - tensors are rank-4 (N, C, H, W), stride is always 1, padding is zeros
//   - forward is const and caches nothing unless given a Cache, so trained
//     models can serve concurrent callers
//   - backward overwrites the layer's parameter gradients (no accumulation)
//   - reductions always run in a fixed order; parallel workers own disjoint
//     output slices, so results do not depend on the thread count

namespace eventnet {

enum class Mode { kTrain, kEval };

namespace detail {
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}
}  // namespace detail

template <typename T>
struct Conv2d {
  int in_ch = 0, out_ch = 0, kh = 1, kw = 1, pad_h = 0, pad_w = 0;
  bool has_bias = true;
  TensorT<T> weight;  // [out_ch, in_ch, kh, kw]
  TensorT<T> bias;    // [out_ch]
  TensorT<T> wgrad;
  TensorT<T> bgrad;

  struct Cache {
    TensorT<T> x;
  };

  Conv2d(int in_ch_, int out_ch_, int kh_, int kw_, int pad_h_, int pad_w_, bool with_bias)
      : in_ch(in_ch_),
        out_ch(out_ch_),
        kh(kh_),
        kw(kw_),
        pad_h(pad_h_),
        pad_w(pad_w_),
        has_bias(with_bias),
        weight({out_ch_, in_ch_, kh_, kw_}),
        bias(with_bias ? TensorT<T>({out_ch_}) : TensorT<T>()) {}

  void init(Rng& rng) {
    const double bound = std::sqrt(1.0 / (static_cast<double>(in_ch) * kh * kw));
    for (int64_t i = 0; i < weight.size(); ++i) {
      weight[i] = static_cast<T>(rng.uniform(-bound, bound));
    }
    if (has_bias) bias.zero();
  }

  void forward(const TensorT<T>& x, TensorT<T>& out, Cache* cache) const {
    detail::require(x.rank() == 4 && x.dim(1) == in_ch,
                    "conv2d: input shape " + x.shape_str() + " incompatible with in_ch=" +
                        std::to_string(in_ch));
    const int n_items = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = h - kh + 2 * pad_h + 1;
    const int ow = w - kw + 2 * pad_w + 1;
    detail::require(oh >= 1 && ow >= 1, "conv2d: kernel larger than padded input");
    out = TensorT<T>({n_items, out_ch, oh, ow});
    const T* xd = x.data();
    const T* wd = weight.data();
    T* od = out.data();
    parallel_for(static_cast<int64_t>(n_items) * out_ch, [&](int64_t begin, int64_t end) {
      for (int64_t job = begin; job < end; ++job) {
        const int n = static_cast<int>(job / out_ch);
        const int co = static_cast<int>(job % out_ch);
        T* obase = od + (static_cast<int64_t>(n) * out_ch + co) * oh * ow;
        const T b = has_bias ? bias[co] : T{};
        for (int64_t i = 0; i < static_cast<int64_t>(oh) * ow; ++i) obase[i] = b;
        for (int ci = 0; ci < in_ch; ++ci) {
          const T* xc = xd + (static_cast<int64_t>(n) * in_ch + ci) * h * w;
          const T* wc = wd + ((static_cast<int64_t>(co) * in_ch + ci) * kh) * kw;
          for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
              const T wv = wc[ki * kw + kj];
              const int w0 = pad_w - kj > 0 ? pad_w - kj : 0;
              const int w1 = ow < w + pad_w - kj ? ow : w + pad_w - kj;
              for (int oi = 0; oi < oh; ++oi) {
                const int ii = oi + ki - pad_h;
                if (ii < 0 || ii >= h) continue;
                const T* xrow = xc + static_cast<int64_t>(ii) * w + (w0 + kj - pad_w);
                T* orow = obase + static_cast<int64_t>(oi) * ow + w0;
                const int len = w1 - w0;
                for (int t = 0; t < len; ++t) orow[t] += wv * xrow[t];
              }
            }
          }
        }
      }
    });
    if (cache) cache->x = x;
  }

  // gx may be null when the input gradient is not needed (first layer).
  void backward(const Cache& cache, const TensorT<T>& gout, TensorT<T>* gx) {
    const TensorT<T>& x = cache.x;
    detail::require(!x.empty(), "conv2d: backward without forward cache");
    const int n_items = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = gout.dim(2), ow = gout.dim(3);
    detail::require(gout.dim(0) == n_items && gout.dim(1) == out_ch,
                    "conv2d: grad shape mismatch");
    wgrad = TensorT<T>::zeros_like(weight);
    if (has_bias) bgrad = TensorT<T>::zeros_like(bias);
    const T* xd = x.data();
    const T* gd = gout.data();

    parallel_for(out_ch, [&](int64_t begin, int64_t end) {
      for (int64_t co = begin; co < end; ++co) {
        T* wg = wgrad.data() + co * in_ch * kh * kw;
        double bsum = 0.0;
        for (int n = 0; n < n_items; ++n) {
          const T* gbase = gd + (static_cast<int64_t>(n) * out_ch + co) * oh * ow;
          if (has_bias) {
            for (int64_t i = 0; i < static_cast<int64_t>(oh) * ow; ++i) bsum += gbase[i];
          }
          for (int ci = 0; ci < in_ch; ++ci) {
            const T* xc = xd + (static_cast<int64_t>(n) * in_ch + ci) * h * w;
            for (int ki = 0; ki < kh; ++ki) {
              for (int kj = 0; kj < kw; ++kj) {
                const int w0 = pad_w - kj > 0 ? pad_w - kj : 0;
                const int w1 = ow < w + pad_w - kj ? ow : w + pad_w - kj;
                T acc{};
                for (int oi = 0; oi < oh; ++oi) {
                  const int ii = oi + ki - pad_h;
                  if (ii < 0 || ii >= h) continue;
                  const T* xrow = xc + static_cast<int64_t>(ii) * w + (w0 + kj - pad_w);
                  const T* grow = gbase + static_cast<int64_t>(oi) * ow + w0;
                  const int len = w1 - w0;
                  for (int t = 0; t < len; ++t) acc += grow[t] * xrow[t];
                }
                wg[(static_cast<int64_t>(ci) * kh + ki) * kw + kj] += acc;
              }
            }
          }
        }
        if (has_bias) bgrad[co] = static_cast<T>(bsum);
      }
    });

    if (!gx) return;
    *gx = TensorT<T>({n_items, in_ch, h, w});
    T* gxd = gx->data();
    const T* wd = weight.data();
    parallel_for(static_cast<int64_t>(n_items) * in_ch, [&](int64_t begin, int64_t end) {
      for (int64_t job = begin; job < end; ++job) {
        const int n = static_cast<int>(job / in_ch);
        const int ci = static_cast<int>(job % in_ch);
        T* gxc = gxd + (static_cast<int64_t>(n) * in_ch + ci) * h * w;
        for (int co = 0; co < out_ch; ++co) {
          const T* gbase = gd + (static_cast<int64_t>(n) * out_ch + co) * oh * ow;
          const T* wc = wd + ((static_cast<int64_t>(co) * in_ch + ci) * kh) * kw;
          for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
              const T wv = wc[ki * kw + kj];
              const int w0 = pad_w - kj > 0 ? pad_w - kj : 0;
              const int w1 = ow < w + pad_w - kj ? ow : w + pad_w - kj;
              for (int oi = 0; oi < oh; ++oi) {
                const int ii = oi + ki - pad_h;
                if (ii < 0 || ii >= h) continue;
                T* gxrow = gxc + static_cast<int64_t>(ii) * w + (w0 + kj - pad_w);
                const T* grow = gbase + static_cast<int64_t>(oi) * ow + w0;
                const int len = w1 - w0;
                for (int t = 0; t < len; ++t) gxrow[t] += wv * grow[t];
              }
            }
          }
        }
      }
    });
  }
};

template <typename T>
struct BatchNorm2d {
  int channels = 0;
  T eps = static_cast<T>(1e-5);
  T stat_momentum = static_cast<T>(0.1);
  TensorT<T> gamma, beta, ggrad, bgrad;
  TensorT<T> running_mean, running_var;

  struct Cache {
    TensorT<T> xhat;
    std::vector<T> invstd;
  };

  explicit BatchNorm2d(int channels_)
      : channels(channels_),
        gamma({channels_}, T{1}),
        beta({channels_}),
        running_mean({channels_}),
        running_var({channels_}, T{1}) {}

  // Batch statistics over (N, H, W) per channel, biased variance; running
  // stats updated with the same biased estimate.
  void forward_train(const TensorT<T>& x, TensorT<T>& out, Cache& cache) {
    check_input(x);
    const int n_items = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int64_t plane = static_cast<int64_t>(h) * w;
    const int64_t m = static_cast<int64_t>(n_items) * plane;
    out = TensorT<T>(x.shape());
    cache.xhat = TensorT<T>(x.shape());
    cache.invstd.assign(static_cast<size_t>(channels), T{});
    const T* xd = x.data();
    T* od = out.data();
    T* xh = cache.xhat.data();
    parallel_for(channels, [&](int64_t begin, int64_t end) {
      for (int64_t c = begin; c < end; ++c) {
        double sum = 0.0, sumsq = 0.0;
        for (int n = 0; n < n_items; ++n) {
          const T* row = xd + (static_cast<int64_t>(n) * channels + c) * plane;
          for (int64_t i = 0; i < plane; ++i) {
            const double v = static_cast<double>(row[i]);
            sum += v;
            sumsq += v * v;
          }
        }
        const double mean = sum / static_cast<double>(m);
        double var = sumsq / static_cast<double>(m) - mean * mean;
        if (var < 0.0) var = 0.0;
        const double invstd = 1.0 / std::sqrt(var + static_cast<double>(eps));
        cache.invstd[static_cast<size_t>(c)] = static_cast<T>(invstd);
        const T g = gamma[c], b = beta[c];
        for (int n = 0; n < n_items; ++n) {
          const int64_t off = (static_cast<int64_t>(n) * channels + c) * plane;
          for (int64_t i = 0; i < plane; ++i) {
            const T xhat = static_cast<T>((static_cast<double>(xd[off + i]) - mean) * invstd);
            xh[off + i] = xhat;
            od[off + i] = g * xhat + b;
          }
        }
        running_mean[c] =
            (T{1} - stat_momentum) * running_mean[c] + stat_momentum * static_cast<T>(mean);
        running_var[c] =
            (T{1} - stat_momentum) * running_var[c] + stat_momentum * static_cast<T>(var);
      }
    });
  }

  void forward_eval(const TensorT<T>& x, TensorT<T>& out) const {
    check_input(x);
    const int n_items = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int64_t plane = static_cast<int64_t>(h) * w;
    out = TensorT<T>(x.shape());
    const T* xd = x.data();
    T* od = out.data();
    parallel_for(channels, [&](int64_t begin, int64_t end) {
      for (int64_t c = begin; c < end; ++c) {
        const double invstd =
            1.0 / std::sqrt(static_cast<double>(running_var[c]) + static_cast<double>(eps));
        const double mean = static_cast<double>(running_mean[c]);
        const T g = gamma[c], b = beta[c];
        for (int n = 0; n < n_items; ++n) {
          const int64_t off = (static_cast<int64_t>(n) * channels + c) * plane;
          for (int64_t i = 0; i < plane; ++i) {
            od[off + i] =
                g * static_cast<T>((static_cast<double>(xd[off + i]) - mean) * invstd) + b;
          }
        }
      }
    });
  }

  void backward(const Cache& cache, const TensorT<T>& gout, TensorT<T>* gx) {
    const TensorT<T>& xhat = cache.xhat;
    detail::require(!xhat.empty(), "batchnorm: backward without train-mode cache");
    detail::require(gout.same_shape(xhat), "batchnorm: grad shape mismatch");
    const int n_items = xhat.dim(0), h = xhat.dim(2), w = xhat.dim(3);
    const int64_t plane = static_cast<int64_t>(h) * w;
    const int64_t m = static_cast<int64_t>(n_items) * plane;
    ggrad = TensorT<T>::zeros_like(gamma);
    bgrad = TensorT<T>::zeros_like(beta);
    if (gx) *gx = TensorT<T>(xhat.shape());
    const T* xh = xhat.data();
    const T* gd = gout.data();
    parallel_for(channels, [&](int64_t begin, int64_t end) {
      for (int64_t c = begin; c < end; ++c) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (int n = 0; n < n_items; ++n) {
          const int64_t off = (static_cast<int64_t>(n) * channels + c) * plane;
          for (int64_t i = 0; i < plane; ++i) {
            sum_g += static_cast<double>(gd[off + i]);
            sum_gx += static_cast<double>(gd[off + i]) * static_cast<double>(xh[off + i]);
          }
        }
        bgrad[c] = static_cast<T>(sum_g);
        ggrad[c] = static_cast<T>(sum_gx);
        if (!gx) continue;
        T* gxd = gx->data();
        const double g = static_cast<double>(gamma[c]);
        const double invstd = static_cast<double>(cache.invstd[static_cast<size_t>(c)]);
        const double scale = g * invstd / static_cast<double>(m);
        for (int n = 0; n < n_items; ++n) {
          const int64_t off = (static_cast<int64_t>(n) * channels + c) * plane;
          for (int64_t i = 0; i < plane; ++i) {
            const double term = static_cast<double>(m) * static_cast<double>(gd[off + i]) -
                                sum_g - static_cast<double>(xh[off + i]) * sum_gx;
            gxd[off + i] = static_cast<T>(scale * term);
          }
        }
      }
    });
  }

private:
  void check_input(const TensorT<T>& x) const {
    detail::require(x.rank() == 4 && x.dim(1) == channels,
                    "batchnorm: input shape " + x.shape_str() + " incompatible with channels=" +
                        std::to_string(channels));
  }
};

template <typename T>
struct ReLU {
  struct Cache {
    TensorT<T> x;
  };

  void forward(const TensorT<T>& x, TensorT<T>& out, Cache* cache) const {
    out = TensorT<T>(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) out[i] = x[i] > T{} ? x[i] : T{};
    if (cache) cache->x = x;
  }

  void backward(const Cache& cache, const TensorT<T>& gout, TensorT<T>& gx) const {
    detail::require(gout.same_shape(cache.x), "relu: grad shape mismatch");
    gx = TensorT<T>(gout.shape());
    for (int64_t i = 0; i < gout.size(); ++i) gx[i] = cache.x[i] > T{} ? gout[i] : T{};
  }
};

// Temporal max pooling, kernel (1, 2), stride 2. Ties route the gradient to
// the earlier position.
template <typename T>
struct MaxPool1x2 {
  struct Cache {
    std::vector<uint8_t> argmax;  // 0 or 1 per output element
    std::vector<int> in_shape;
  };

  void forward(const TensorT<T>& x, TensorT<T>& out, Cache* cache) const {
    detail::require(x.rank() == 4, "maxpool: rank-4 input required");
    const int w = x.dim(3);
    detail::require(w % 2 == 0, "maxpool: temporal dimension must be even, got " +
                                    std::to_string(w));
    const int ow = w / 2;
    const int64_t rows = x.size() / w;
    out = TensorT<T>({x.dim(0), x.dim(1), x.dim(2), ow});
    if (cache) {
      cache->argmax.assign(static_cast<size_t>(out.size()), 0);
      cache->in_shape = x.shape();
    }
    const T* xd = x.data();
    T* od = out.data();
    parallel_for(rows, [&](int64_t begin, int64_t end) {
      for (int64_t r = begin; r < end; ++r) {
        const T* xrow = xd + r * w;
        T* orow = od + r * ow;
        for (int t = 0; t < ow; ++t) {
          const T a = xrow[2 * t], b = xrow[2 * t + 1];
          const bool second = b > a;
          orow[t] = second ? b : a;
          if (cache) cache->argmax[static_cast<size_t>(r * ow + t)] = second ? 1 : 0;
        }
      }
    });
  }

  void backward(const Cache& cache, const TensorT<T>& gout, TensorT<T>& gx) const {
    detail::require(!cache.in_shape.empty(), "maxpool: backward without forward cache");
    gx = TensorT<T>(cache.in_shape);
    const int w = cache.in_shape[3];
    const int ow = w / 2;
    const int64_t rows = gx.size() / w;
    detail::require(gout.size() == rows * ow, "maxpool: grad shape mismatch");
    const T* gd = gout.data();
    T* gxd = gx.data();
    for (int64_t r = 0; r < rows; ++r) {
      for (int t = 0; t < ow; ++t) {
        gxd[r * w + 2 * t + cache.argmax[static_cast<size_t>(r * ow + t)]] = gd[r * ow + t];
      }
    }
  }
};

// Softmax along the channel dimension within each consecutive block of
// group_size channels; applied independently per (n, h, w) position.
template <typename T>
struct GroupedSoftmax {
  int group_size = 1;

  struct Cache {
    TensorT<T> y;
  };

  explicit GroupedSoftmax(int group_size_) : group_size(group_size_) {}

  void forward(const TensorT<T>& x, TensorT<T>& out, Cache* cache) const {
    detail::require(x.rank() == 4, "grouped_softmax: rank-4 input required");
    const int c = x.dim(1);
    detail::require(c % group_size == 0,
                    "grouped_softmax: channels " + std::to_string(c) +
                        " not divisible by group size " + std::to_string(group_size));
    const int n_items = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int groups = c / group_size;
    const int64_t plane = static_cast<int64_t>(h) * w;
    out = TensorT<T>(x.shape());
    const T* xd = x.data();
    T* od = out.data();
    for (int n = 0; n < n_items; ++n) {
      for (int g = 0; g < groups; ++g) {
        const int64_t base = (static_cast<int64_t>(n) * c + static_cast<int64_t>(g) * group_size) * plane;
        for (int64_t p = 0; p < plane; ++p) {
          T mx = xd[base + p];
          for (int k = 1; k < group_size; ++k) {
            const T v = xd[base + k * plane + p];
            if (v > mx) mx = v;
          }
          double denom = 0.0;
          for (int k = 0; k < group_size; ++k) {
            denom += std::exp(static_cast<double>(xd[base + k * plane + p] - mx));
          }
          for (int k = 0; k < group_size; ++k) {
            od[base + k * plane + p] = static_cast<T>(
                std::exp(static_cast<double>(xd[base + k * plane + p] - mx)) / denom);
          }
        }
      }
    }
    if (cache) cache->y = out;
  }

  void backward(const Cache& cache, const TensorT<T>& gout, TensorT<T>& gx) const {
    const TensorT<T>& y = cache.y;
    detail::require(!y.empty(), "grouped_softmax: backward without forward cache");
    detail::require(gout.same_shape(y), "grouped_softmax: grad shape mismatch");
    const int n_items = y.dim(0), c = y.dim(1), h = y.dim(2), w = y.dim(3);
    const int groups = c / group_size;
    const int64_t plane = static_cast<int64_t>(h) * w;
    gx = TensorT<T>(y.shape());
    const T* yd = y.data();
    const T* gd = gout.data();
    T* gxd = gx.data();
    for (int n = 0; n < n_items; ++n) {
      for (int g = 0; g < groups; ++g) {
        const int64_t base = (static_cast<int64_t>(n) * c + static_cast<int64_t>(g) * group_size) * plane;
        for (int64_t p = 0; p < plane; ++p) {
          double dot = 0.0;
          for (int k = 0; k < group_size; ++k) {
            dot += static_cast<double>(gd[base + k * plane + p]) *
                   static_cast<double>(yd[base + k * plane + p]);
          }
          for (int k = 0; k < group_size; ++k) {
            gxd[base + k * plane + p] = static_cast<T>(
                static_cast<double>(yd[base + k * plane + p]) *
                (static_cast<double>(gd[base + k * plane + p]) - dot));
          }
        }
      }
    }
  }
};

}  // namespace eventnet
