#ifndef WEEDPILOT_NN_LAYERS_HPP
#define WEEDPILOT_NN_LAYERS_HPP

#include <cmath>
#include <optional>

#include "weedpilot/nn/tensor.hpp"
#include "weedpilot/rng.hpp"

namespace weedpilot::nn {

// ---------------------------------------------------------------------------
// Convolution geometry ("same" padding, TensorFlow convention: the extra
// pixel of odd padding goes to the bottom/right). Stride 2 halves spatial
// dims: out = ceil(in / stride).
// ---------------------------------------------------------------------------
struct ConvGeom {
  int in_c = 0, in_h = 0, in_w = 0;
  int out_c = 0, k = 1, stride = 1;
  int out_h = 0, out_w = 0;
  int pad_top = 0, pad_left = 0;
};

inline ConvGeom conv_geometry(int c, int h, int w, int oc, int k, int stride) {
  ConvGeom g{c, h, w, oc, k, stride};
  g.out_h = (h + stride - 1) / stride;
  g.out_w = (w + stride - 1) / stride;
  int pad_h = std::max(0, (g.out_h - 1) * stride + k - h);
  int pad_w = std::max(0, (g.out_w - 1) * stride + k - w);
  g.pad_top = pad_h / 2;
  g.pad_left = pad_w / 2;
  return g;
}

namespace detail {

template <typename S>
using ColMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

// Patch matrix for one sample: (C*K*K) x (OH*OW), zero-padded borders.
template <typename S>
void im2col(const Tensor<S>& x, int n, const ConvGeom& g, ColMat<S>& cols) {
  const int P = g.out_h * g.out_w;
  cols.resize(g.in_c * g.k * g.k, P);
  for (int oh = 0; oh < g.out_h; ++oh)
    for (int ow = 0; ow < g.out_w; ++ow) {
      S* col = cols.data() + static_cast<std::size_t>(oh * g.out_w + ow) * cols.rows();
      int idx = 0;
      for (int c = 0; c < g.in_c; ++c)
        for (int kh = 0; kh < g.k; ++kh) {
          int ih = oh * g.stride - g.pad_top + kh;
          for (int kw = 0; kw < g.k; ++kw, ++idx) {
            int iw = ow * g.stride - g.pad_left + kw;
            col[idx] = (ih >= 0 && ih < g.in_h && iw >= 0 && iw < g.in_w)
                           ? x.at4(n, c, ih, iw)
                           : S(0);
          }
        }
    }
}

template <typename S>
void col2im_add(const ColMat<S>& cols, int n, const ConvGeom& g, Tensor<S>& dx) {
  for (int oh = 0; oh < g.out_h; ++oh)
    for (int ow = 0; ow < g.out_w; ++ow) {
      const S* col = cols.data() + static_cast<std::size_t>(oh * g.out_w + ow) * cols.rows();
      int idx = 0;
      for (int c = 0; c < g.in_c; ++c)
        for (int kh = 0; kh < g.k; ++kh) {
          int ih = oh * g.stride - g.pad_top + kh;
          for (int kw = 0; kw < g.k; ++kw, ++idx) {
            int iw = ow * g.stride - g.pad_left + kw;
            if (ih >= 0 && ih < g.in_h && iw >= 0 && iw < g.in_w) dx.at4(n, c, ih, iw) += col[idx];
          }
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Conv2D, weights (OC, C, K, K), optional bias (OC). Same padding.
// ---------------------------------------------------------------------------
template <typename S>
Tensor<S> conv2d_forward(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>* bias,
                         int stride) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.rank != 4 || ws.rank != 4) throw Error("conv2d: expected NCHW input and OIHW weights");
  if (ws.d[1] != xs.d[1])
    throw Error("conv2d: channel mismatch, input " + xs.str() + " vs weights " + ws.str());
  const ConvGeom g = conv_geometry(xs.d[1], xs.d[2], xs.d[3], ws.d[0], ws.d[2], stride);
  const int N = xs.d[0], P = g.out_h * g.out_w, ckk = g.in_c * g.k * g.k;

  Tensor<S> y(Shape::of(N, g.out_c, g.out_h, g.out_w));
  typename Tensor<S>::ConstMatMap wm(w.data(), g.out_c, ckk);

#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) {
    detail::ColMat<S> cols;
    detail::im2col(x, n, g, cols);
    typename Tensor<S>::MatMap yn(y.data() + static_cast<std::size_t>(n) * g.out_c * P, g.out_c, P);
    yn.noalias() = wm * cols;
    if (bias)
      for (int oc = 0; oc < g.out_c; ++oc) yn.row(oc).array() += (*bias)[oc];
  }
  return y;
}

template <typename S>
struct LinearGrads {
  Tensor<S> dx, dw, db;
};

template <typename S>
LinearGrads<S> conv2d_backward(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& dy,
                               int stride, bool has_bias) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  const ConvGeom g = conv_geometry(xs.d[1], xs.d[2], xs.d[3], ws.d[0], ws.d[2], stride);
  const int N = xs.d[0], P = g.out_h * g.out_w, ckk = g.in_c * g.k * g.k;

  LinearGrads<S> out;
  out.dx = Tensor<S>(xs);
  out.dw = Tensor<S>(ws);
  if (has_bias) out.db = Tensor<S>(Shape::of(g.out_c));
  typename Tensor<S>::ConstMatMap wm(w.data(), g.out_c, ckk);

  // Per-sample weight-gradient partials, reduced serially in sample order so
  // the result does not depend on the worker count.
  std::vector<detail::ColMat<S>> dw_parts(N);

#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) {
    detail::ColMat<S> cols;
    detail::im2col(x, n, g, cols);
    typename Tensor<S>::ConstMatMap dyn(dy.data() + static_cast<std::size_t>(n) * g.out_c * P,
                                        g.out_c, P);
    dw_parts[n] = dyn * cols.transpose();  // OC x CKK
    detail::ColMat<S> dcols = wm.transpose() * dyn;  // CKK x P
    detail::col2im_add(dcols, n, g, out.dx);
  }

  typename Tensor<S>::MatMap dwm(out.dw.data(), g.out_c, ckk);
  for (int n = 0; n < N; ++n) dwm += dw_parts[n];
  if (has_bias) {
    for (int n = 0; n < N; ++n) {
      typename Tensor<S>::ConstMatMap dyn(dy.data() + static_cast<std::size_t>(n) * g.out_c * P,
                                          g.out_c, P);
      for (int oc = 0; oc < g.out_c; ++oc) out.db[oc] += dyn.row(oc).sum();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// DepthwiseConv2D, weights (C, K, K), channel multiplier 1.
// ---------------------------------------------------------------------------
template <typename S>
Tensor<S> depthwise_forward(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>* bias,
                            int stride) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.rank != 4 || ws.rank != 3) throw Error("depthwise: expected NCHW input, CKK weights");
  if (ws.d[0] != xs.d[1])
    throw Error("depthwise: channel mismatch, input " + xs.str() + " vs weights " + ws.str());
  const int C = xs.d[1], k = ws.d[1];
  const ConvGeom g = conv_geometry(C, xs.d[2], xs.d[3], C, k, stride);
  const int N = xs.d[0];

  Tensor<S> y(Shape::of(N, C, g.out_h, g.out_w));
#pragma omp parallel for schedule(static) collapse(2)
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const S* wc = w.data() + static_cast<std::size_t>(c) * k * k;
      const S b = bias ? (*bias)[c] : S(0);
      for (int oh = 0; oh < g.out_h; ++oh)
        for (int ow = 0; ow < g.out_w; ++ow) {
          S acc = b;
          for (int kh = 0; kh < k; ++kh) {
            int ih = oh * stride - g.pad_top + kh;
            if (ih < 0 || ih >= g.in_h) continue;
            for (int kw = 0; kw < k; ++kw) {
              int iw = ow * stride - g.pad_left + kw;
              if (iw < 0 || iw >= g.in_w) continue;
              acc += x.at4(n, c, ih, iw) * wc[kh * k + kw];
            }
          }
          y.at4(n, c, oh, ow) = acc;
        }
    }
  return y;
}

template <typename S>
LinearGrads<S> depthwise_backward(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& dy,
                                  int stride, bool has_bias) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  const int C = xs.d[1], k = ws.d[1], N = xs.d[0];
  const ConvGeom g = conv_geometry(C, xs.d[2], xs.d[3], C, k, stride);

  LinearGrads<S> out;
  out.dx = Tensor<S>(xs);
  out.dw = Tensor<S>(ws);
  if (has_bias) out.db = Tensor<S>(Shape::of(C));

  std::vector<Tensor<S>> dw_parts(N, Tensor<S>(ws));
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const S* wc = w.data() + static_cast<std::size_t>(c) * k * k;
      S* dwc = dw_parts[n].data() + static_cast<std::size_t>(c) * k * k;
      for (int oh = 0; oh < g.out_h; ++oh)
        for (int ow = 0; ow < g.out_w; ++ow) {
          const S grad = dy.at4(n, c, oh, ow);
          for (int kh = 0; kh < k; ++kh) {
            int ih = oh * stride - g.pad_top + kh;
            if (ih < 0 || ih >= g.in_h) continue;
            for (int kw = 0; kw < k; ++kw) {
              int iw = ow * stride - g.pad_left + kw;
              if (iw < 0 || iw >= g.in_w) continue;
              dwc[kh * k + kw] += x.at4(n, c, ih, iw) * grad;
              out.dx.at4(n, c, ih, iw) += wc[kh * k + kw] * grad;
            }
          }
        }
    }
  }
  for (int n = 0; n < N; ++n) out.dw.array() += dw_parts[n].array();
  if (has_bias)
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        S acc = S(0);
        for (int oh = 0; oh < g.out_h; ++oh)
          for (int ow = 0; ow < g.out_w; ++ow) acc += dy.at4(n, c, oh, ow);
        out.db[c] += acc;
      }
  return out;
}

// ---------------------------------------------------------------------------
// BatchNorm over (N,H,W) per channel. Biased batch variance; running stats
// updated with momentum in train mode.
// ---------------------------------------------------------------------------
template <typename S>
struct BnCache {
  Tensor<S> mean, inv_std;  // per channel, train-mode batch statistics
};

template <typename S>
Tensor<S> batchnorm_forward(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                            Tensor<S>& run_mean, Tensor<S>& run_var, double eps, double momentum,
                            bool train, BnCache<S>* cache) {
  const Shape& xs = x.shape();
  if (xs.rank != 4) throw Error("batchnorm: expected NCHW input");
  const int N = xs.d[0], C = xs.d[1], H = xs.d[2], W = xs.d[3];
  if (gamma.size() != C) throw Error("batchnorm: channel mismatch " + xs.str());
  const long long m = static_cast<long long>(N) * H * W;

  Tensor<S> mean(Shape::of(C)), inv_std(Shape::of(C));
  if (train) {
    for (int c = 0; c < C; ++c) {
      double sum = 0, sq = 0;
      for (int n = 0; n < N; ++n) {
        const S* p = x.data() + ((static_cast<std::size_t>(n) * C + c) * H) * W;
        for (long long i = 0; i < static_cast<long long>(H) * W; ++i) {
          double v = static_cast<double>(p[i]);
          sum += v;
          sq += v * v;
        }
      }
      double mu = sum / m;
      double var = std::max(0.0, sq / m - mu * mu);
      mean[c] = static_cast<S>(mu);
      inv_std[c] = static_cast<S>(1.0 / std::sqrt(var + eps));
      run_mean[c] = static_cast<S>(momentum * run_mean[c] + (1.0 - momentum) * mu);
      run_var[c] = static_cast<S>(momentum * run_var[c] + (1.0 - momentum) * var);
    }
  } else {
    for (int c = 0; c < C; ++c) {
      mean[c] = run_mean[c];
      inv_std[c] = static_cast<S>(1.0 / std::sqrt(static_cast<double>(run_var[c]) + eps));
    }
  }

  Tensor<S> y(xs);
#pragma omp parallel for schedule(static) collapse(2)
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const S a = gamma[c] * inv_std[c];
      const S b = beta[c] - mean[c] * a;
      const S* px = x.data() + ((static_cast<std::size_t>(n) * C + c) * H) * W;
      S* py = y.data() + ((static_cast<std::size_t>(n) * C + c) * H) * W;
      for (long long i = 0; i < static_cast<long long>(H) * W; ++i) py[i] = a * px[i] + b;
    }
  if (cache) {
    cache->mean = std::move(mean);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename S>
struct BnGrads {
  Tensor<S> dx, dgamma, dbeta;
};

template <typename S>
BnGrads<S> batchnorm_backward(const Tensor<S>& x, const Tensor<S>& gamma, const BnCache<S>& cache,
                              const Tensor<S>& dy) {
  const Shape& xs = x.shape();
  const int N = xs.d[0], C = xs.d[1], H = xs.d[2], W = xs.d[3];
  const long long m = static_cast<long long>(N) * H * W;

  BnGrads<S> out{Tensor<S>(xs), Tensor<S>(Shape::of(C)), Tensor<S>(Shape::of(C))};
#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    const S mu = cache.mean[c], istd = cache.inv_std[c];
    double sum_dy = 0, sum_dy_xhat = 0;
    for (int n = 0; n < N; ++n) {
      const S* px = x.data() + ((static_cast<std::size_t>(n) * C + c) * H) * W;
      const S* pd = dy.data() + ((static_cast<std::size_t>(n) * C + c) * H) * W;
      for (long long i = 0; i < static_cast<long long>(H) * W; ++i) {
        double xhat = (px[i] - mu) * istd;
        sum_dy += pd[i];
        sum_dy_xhat += pd[i] * xhat;
      }
    }
    out.dbeta[c] = static_cast<S>(sum_dy);
    out.dgamma[c] = static_cast<S>(sum_dy_xhat);
    const S k1 = static_cast<S>(sum_dy / m), k2 = static_cast<S>(sum_dy_xhat / m);
    const S scale = gamma[c] * istd;
    for (int n = 0; n < N; ++n) {
      const S* px = x.data() + ((static_cast<std::size_t>(n) * C + c) * H) * W;
      const S* pd = dy.data() + ((static_cast<std::size_t>(n) * C + c) * H) * W;
      S* pdx = out.dx.data() + ((static_cast<std::size_t>(n) * C + c) * H) * W;
      for (long long i = 0; i < static_cast<long long>(H) * W; ++i) {
        S xhat = (px[i] - mu) * istd;
        pdx[i] = scale * (pd[i] - k1 - xhat * k2);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// ReLU6 / GlobalAvgPool / Dense / Sigmoid
// ---------------------------------------------------------------------------
template <typename S>
Tensor<S> relu6_forward(const Tensor<S>& x) {
  Tensor<S> y(x.shape());
  y.array() = x.array().min(S(6)).max(S(0));
  return y;
}

template <typename S>
Tensor<S> relu6_backward(const Tensor<S>& x, const Tensor<S>& dy) {
  Tensor<S> dx(x.shape());
  const long long n = x.size();
  for (long long i = 0; i < n; ++i) dx[i] = (x[i] > S(0) && x[i] < S(6)) ? dy[i] : S(0);
  return dx;
}

template <typename S>
Tensor<S> gap_forward(const Tensor<S>& x) {
  const Shape& xs = x.shape();
  if (xs.rank != 4) throw Error("gap: expected NCHW input");
  const int N = xs.d[0], C = xs.d[1];
  const long long hw = static_cast<long long>(xs.d[2]) * xs.d[3];
  Tensor<S> y(Shape::of(N, C));
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const S* p = x.data() + (static_cast<std::size_t>(n) * C + c) * hw;
      double acc = 0;
      for (long long i = 0; i < hw; ++i) acc += p[i];
      y[static_cast<std::size_t>(n) * C + c] = static_cast<S>(acc / hw);
    }
  return y;
}

template <typename S>
Tensor<S> gap_backward(const Shape& x_shape, const Tensor<S>& dy) {
  const int N = x_shape.d[0], C = x_shape.d[1];
  const long long hw = static_cast<long long>(x_shape.d[2]) * x_shape.d[3];
  Tensor<S> dx(x_shape);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const S g = dy[static_cast<std::size_t>(n) * C + c] / static_cast<S>(hw);
      S* p = dx.data() + (static_cast<std::size_t>(n) * C + c) * hw;
      for (long long i = 0; i < hw; ++i) p[i] = g;
    }
  return dx;
}

template <typename S>
Tensor<S> dense_forward(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.rank != 2 || ws.rank != 2) throw Error("dense: expected (N,F) input and (F,U) weights");
  if (xs.d[1] != ws.d[0])
    throw Error("dense: feature mismatch, input " + xs.str() + " vs weights " + ws.str());
  const int N = xs.d[0], F = xs.d[1], U = ws.d[1];
  Tensor<S> y(Shape::of(N, U));
  y.mat(N, U).noalias() = x.mat(N, F) * w.mat(F, U);
  for (int n = 0; n < N; ++n)
    for (int u = 0; u < U; ++u) y[static_cast<std::size_t>(n) * U + u] += b[u];
  return y;
}

template <typename S>
LinearGrads<S> dense_backward(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& dy) {
  const int N = x.shape().d[0], F = x.shape().d[1], U = w.shape().d[1];
  LinearGrads<S> out{Tensor<S>(x.shape()), Tensor<S>(w.shape()), Tensor<S>(Shape::of(U))};
  out.dx.mat(N, F).noalias() = dy.mat(N, U) * w.mat(F, U).transpose();
  out.dw.mat(F, U).noalias() = x.mat(N, F).transpose() * dy.mat(N, U);
  for (int n = 0; n < N; ++n)
    for (int u = 0; u < U; ++u) out.db[u] += dy[static_cast<std::size_t>(n) * U + u];
  return out;
}

template <typename S>
Tensor<S> sigmoid_forward(const Tensor<S>& x) {
  Tensor<S> y(x.shape());
  const long long n = x.size();
  for (long long i = 0; i < n; ++i) {
    S v = x[i];
    if (v >= S(0)) {
      y[i] = S(1) / (S(1) + std::exp(-v));
    } else {
      S e = std::exp(v);
      y[i] = e / (S(1) + e);
    }
  }
  return y;
}

template <typename S>
Tensor<S> sigmoid_backward(const Tensor<S>& y, const Tensor<S>& dy) {
  Tensor<S> dx(y.shape());
  dx.array() = dy.array() * y.array() * (S(1) - y.array());
  return dx;
}

// ---------------------------------------------------------------------------
// Initializers
// ---------------------------------------------------------------------------
template <typename S>
void he_normal_init(Tensor<S>& w, long long fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  const long long n = w.size();
  for (long long i = 0; i < n; ++i) w[i] = static_cast<S>(rng.normal(0.0, stddev));
}

template <typename S>
void glorot_uniform_init(Tensor<S>& w, long long fan_in, long long fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  const long long n = w.size();
  for (long long i = 0; i < n; ++i) w[i] = static_cast<S>(rng.uniform(-limit, limit));
}

}  // namespace weedpilot::nn

#endif
