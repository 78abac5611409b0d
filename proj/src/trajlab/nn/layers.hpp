#pragma once

// Forward and backward passes for the layer kinds the predictor is built
// from. Every op is a pure function of its arguments; backward passes take
// the forward inputs (or a cache) and the upstream gradient and return exact
// analytic gradients.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>
#include <vector>

#include "trajlab/error.hpp"
#include "trajlab/nn/tensor.hpp"
#include "trajlab/rng.hpp"

namespace trajlab::nn {

template <typename T>
struct LayerGrad {
  std::vector<BasicTensor<T>> param_grads;
  BasicTensor<T> input_grad;
};

// Four independent partial sums; the summation order is fixed so results are
// reproducible bit for bit.
template <typename T>
inline T dot(const T* a, const T* b, std::size_t n) {
  T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

template <typename T>
inline void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride) {
  return (in - k) / stride + 1;
}

// ---------------------------------------------------------------- conv2d

inline void check_conv_shapes(const Shape& in, const Shape& w, const Shape& b,
                              std::size_t stride) {
  require_rank(in, 3, "conv2d input");
  require_rank(w, 4, "conv2d weights");
  require_rank(b, 1, "conv2d bias");
  if (stride == 0) fail(ErrorKind::Shape, "conv2d: stride must be positive");
  if (w[1] != in[0])
    fail(ErrorKind::Shape, "conv2d: weights C_in axis " + std::to_string(w[1]) +
                               " != input C axis " + std::to_string(in[0]));
  if (b[0] != w[0])
    fail(ErrorKind::Shape, "conv2d: bias axis " + std::to_string(b[0]) +
                               " != weights C_out axis " + std::to_string(w[0]));
  if (w[2] > in[1])
    fail(ErrorKind::Shape, "conv2d: kernel height axis " + std::to_string(w[2]) +
                               " exceeds input H axis " + std::to_string(in[1]));
  if (w[3] > in[2])
    fail(ErrorKind::Shape, "conv2d: kernel width axis " + std::to_string(w[3]) +
                               " exceeds input W axis " + std::to_string(in[2]));
}

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                              const BasicTensor<T>& bias, std::size_t stride) {
  check_conv_shapes(input.dims(), weights.dims(), bias.dims(), stride);
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
  const std::size_t oh = conv_out_extent(h, kh, stride), ow = conv_out_extent(w, kw, stride);

  BasicTensor<T> out({cout, oh, ow});
  const T* in = input.data();
  const T* wt = weights.data();
  T* o = out.data();
  for (std::size_t co = 0; co < cout; ++co) {
    T* oc = o + co * oh * ow;
    std::fill(oc, oc + oh * ow, bias[co]);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* ic = in + ci * h * w;
      const T* wk = wt + (co * cin + ci) * kh * kw;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const T wv = wk[ky * kw + kx];
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const T* row = ic + (oy * stride + ky) * w + kx;
            T* orow = oc + oy * ow;
            for (std::size_t ox = 0; ox < ow; ++ox) orow[ox] += wv * row[ox * stride];
          }
        }
      }
    }
  }
  return out;
}

// param_grads = {d_weights, d_bias}. With need_input_grad false the input
// gradient is left zero (first layer of a network).
template <typename T>
LayerGrad<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             std::size_t stride, const BasicTensor<T>& grad_out,
                             bool need_input_grad = true) {
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
  const std::size_t oh = conv_out_extent(h, kh, stride), ow = conv_out_extent(w, kw, stride);
  require_same(grad_out.dims(), Shape{cout, oh, ow}, "conv2d backward upstream");

  LayerGrad<T> g{{BasicTensor<T>(weights.dims()), BasicTensor<T>({cout})},
                 BasicTensor<T>(input.dims())};
  T* dw = g.param_grads[0].data();
  T* db = g.param_grads[1].data();
  T* dx = g.input_grad.data();
  const T* in = input.data();
  const T* wt = weights.data();
  const T* go = grad_out.data();

  for (std::size_t co = 0; co < cout; ++co) {
    const T* gc = go + co * oh * ow;
    T acc = 0;
    for (std::size_t i = 0; i < oh * ow; ++i) acc += gc[i];
    db[co] = acc;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* ic = in + ci * h * w;
      T* dic = dx + ci * h * w;
      const T* wk = wt + (co * cin + ci) * kh * kw;
      T* dwk = dw + (co * cin + ci) * kh * kw;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const T wv = wk[ky * kw + kx];
          T s = 0;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const T* row = ic + (oy * stride + ky) * w + kx;
            T* drow = dic + (oy * stride + ky) * w + kx;
            const T* grow = gc + oy * ow;
            for (std::size_t ox = 0; ox < ow; ++ox) s += grow[ox] * row[ox * stride];
            if (need_input_grad)
              for (std::size_t ox = 0; ox < ow; ++ox) drow[ox * stride] += wv * grow[ox];
          }
          dwk[ky * kw + kx] = s;
        }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------- maxpool

template <typename T>
struct PoolResult {
  BasicTensor<T> output;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};

// 2x2 window, stride 2. Ties go to the first element in row-major order.
template <typename T>
PoolResult<T> maxpool2d_forward(const BasicTensor<T>& input) {
  require_rank(input.dims(), 3, "maxpool2d input");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h % 2 != 0 || w % 2 != 0)
    fail(ErrorKind::Shape, "maxpool2d: H and W must be even, got " + shape_str(input.dims()));
  const std::size_t oh = h / 2, ow = w / 2;
  PoolResult<T> r{BasicTensor<T>({c, oh, ow}), std::vector<std::uint32_t>(c * oh * ow)};
  const T* in = input.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (ch * h + 2 * oy) * w + 2 * ox;
        const std::size_t cand[3] = {best + 1, best + w, best + w + 1};
        for (std::size_t k : cand)
          if (in[k] > in[best]) best = k;
        const std::size_t o = (ch * oh + oy) * ow + ox;
        r.output[o] = in[best];
        r.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

template <typename T>
BasicTensor<T> maxpool2d_backward(const Shape& input_dims,
                                  const std::vector<std::uint32_t>& argmax,
                                  const BasicTensor<T>& grad_out) {
  if (grad_out.size() != argmax.size())
    fail(ErrorKind::Shape, "maxpool2d backward: upstream size mismatch");
  BasicTensor<T> dx(input_dims);
  for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += grad_out[i];
  return dx;
}

// ---------------------------------------------------------------- dense

inline void check_dense_shapes(const Shape& in, const Shape& w, const Shape& b) {
  require_rank(in, 1, "dense input");
  require_rank(w, 2, "dense weights");
  require_rank(b, 1, "dense bias");
  if (w[1] != in[0])
    fail(ErrorKind::Shape, "dense: weights N_in axis " + std::to_string(w[1]) +
                               " != input axis " + std::to_string(in[0]));
  if (b[0] != w[0])
    fail(ErrorKind::Shape, "dense: bias axis " + std::to_string(b[0]) +
                               " != weights N_out axis " + std::to_string(w[0]));
}

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                             const BasicTensor<T>& bias) {
  check_dense_shapes(input.dims(), weights.dims(), bias.dims());
  const std::size_t nout = weights.dim(0), nin = weights.dim(1);
  BasicTensor<T> out({nout});
  for (std::size_t r = 0; r < nout; ++r)
    out[r] = dot(weights.data() + r * nin, input.data(), nin) + bias[r];
  return out;
}

// param_grads = {d_weights, d_bias}
template <typename T>
LayerGrad<T> dense_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                            const BasicTensor<T>& grad_out) {
  const std::size_t nout = weights.dim(0), nin = weights.dim(1);
  require_same(grad_out.dims(), Shape{nout}, "dense backward upstream");
  LayerGrad<T> g{{BasicTensor<T>(weights.dims()), grad_out}, BasicTensor<T>({nin})};
  T* dw = g.param_grads[0].data();
  T* dx = g.input_grad.data();
  for (std::size_t r = 0; r < nout; ++r) {
    const T gr = grad_out[r];
    T* dwr = dw + r * nin;
    for (std::size_t c = 0; c < nin; ++c) dwr[c] = gr * input[c];
    axpy(gr, weights.data() + r * nin, dx, nin);
  }
  return g;
}

// ---------------------------------------------------------------- activation

enum class Activation { Relu, Sigmoid, Tanh };

template <typename T>
inline T sigmoid(T z) {
  // Branching keeps exp() from overflowing for large |z|.
  if (z >= 0) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

template <typename T>
inline T activate(Activation kind, T z) {
  switch (kind) {
    case Activation::Relu: return z > T(0) ? z : T(0);
    case Activation::Sigmoid: return sigmoid(z);
    case Activation::Tanh: return std::tanh(z);
  }
  return z;
}

template <typename T>
BasicTensor<T> activation_forward(Activation kind, const BasicTensor<T>& input) {
  BasicTensor<T> out(input.dims());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = activate(kind, input[i]);
  return out;
}

// Needs both the pre-activation (relu) and the output (sigmoid, tanh).
template <typename T>
BasicTensor<T> activation_backward(Activation kind, const BasicTensor<T>& input,
                                   const BasicTensor<T>& output,
                                   const BasicTensor<T>& grad_out) {
  require_same(input.dims(), grad_out.dims(), "activation backward");
  BasicTensor<T> dx(input.dims());
  for (std::size_t i = 0; i < input.size(); ++i) {
    T d = 0;
    switch (kind) {
      case Activation::Relu: d = input[i] > T(0) ? T(1) : T(0); break;
      case Activation::Sigmoid: d = output[i] * (T(1) - output[i]); break;
      case Activation::Tanh: d = T(1) - output[i] * output[i]; break;
    }
    dx[i] = d * grad_out[i];
  }
  return dx;
}

// ---------------------------------------------------------------- lstm cell

// Gate rows are stacked in the order input, forget, cell (g), output; each
// block has hidden-size rows.
template <typename T>
struct LstmParams {
  BasicTensor<T> w_x;   // [4H, N_x]
  BasicTensor<T> w_h;   // [4H, H]
  BasicTensor<T> bias;  // [4H]

  std::size_t hidden() const { return w_h.dim(1); }
  std::size_t input_size() const { return w_x.dim(1); }
};

template <typename T>
struct LstmCache {
  BasicTensor<T> x, h_prev, c_prev;
  BasicTensor<T> gates;  // post-activation i,f,g,o stacked [4H]
  BasicTensor<T> c, tanh_c;
};

template <typename T>
struct LstmStep {
  BasicTensor<T> h, c;
  LstmCache<T> cache;
};

template <typename T>
void check_lstm_shapes(const LstmParams<T>& p, const Shape& x, const Shape& h,
                       const Shape& c) {
  require_rank(p.w_x.dims(), 2, "lstm w_x");
  require_rank(p.w_h.dims(), 2, "lstm w_h");
  require_rank(p.bias.dims(), 1, "lstm bias");
  const std::size_t hid = p.w_h.dim(1);
  if (p.w_h.dim(0) != 4 * hid || p.w_x.dim(0) != 4 * hid || p.bias.dim(0) != 4 * hid)
    fail(ErrorKind::Shape, "lstm: gate axis must be 4*H for H=" + std::to_string(hid));
  require_same(x, Shape{p.w_x.dim(1)}, "lstm x vs w_x N_x axis");
  require_same(h, Shape{hid}, "lstm h_prev vs H axis");
  require_same(c, Shape{hid}, "lstm c_prev vs H axis");
}

template <typename T>
LstmStep<T> lstm_cell_forward(const BasicTensor<T>& x, const BasicTensor<T>& h_prev,
                              const BasicTensor<T>& c_prev, const LstmParams<T>& p) {
  check_lstm_shapes(p, x.dims(), h_prev.dims(), c_prev.dims());
  const std::size_t hid = p.hidden(), nx = p.input_size();
  BasicTensor<T> gates({4 * hid});
  for (std::size_t r = 0; r < 4 * hid; ++r) {
    const T z = dot(p.w_x.data() + r * nx, x.data(), nx) +
                dot(p.w_h.data() + r * hid, h_prev.data(), hid) + p.bias[r];
    gates[r] = (r >= 2 * hid && r < 3 * hid) ? std::tanh(z) : sigmoid(z);
  }
  BasicTensor<T> c({hid}), tc({hid}), h({hid});
  for (std::size_t j = 0; j < hid; ++j) {
    const T i = gates[j], f = gates[hid + j], g = gates[2 * hid + j], o = gates[3 * hid + j];
    c[j] = f * c_prev[j] + i * g;
    tc[j] = std::tanh(c[j]);
    h[j] = o * tc[j];
  }
  return {h, c, LstmCache<T>{x, h_prev, c_prev, std::move(gates), c, std::move(tc)}};
}

template <typename T>
struct LstmGrad {
  BasicTensor<T> d_w_x, d_w_h, d_bias;
  BasicTensor<T> dx, dh_prev, dc_prev;
};

// dh, dc are the total upstream gradients w.r.t. this step's h and c
// (including what flows back from later time steps).
template <typename T>
LstmGrad<T> lstm_cell_backward(const LstmCache<T>& k, const LstmParams<T>& p,
                               const BasicTensor<T>& dh, const BasicTensor<T>& dc) {
  const std::size_t hid = p.hidden(), nx = p.input_size();
  require_same(dh.dims(), Shape{hid}, "lstm backward dh");
  require_same(dc.dims(), Shape{hid}, "lstm backward dc");
  BasicTensor<T> dz({4 * hid});
  LstmGrad<T> g{BasicTensor<T>(p.w_x.dims()), BasicTensor<T>(p.w_h.dims()),
                BasicTensor<T>(p.bias.dims()), BasicTensor<T>({nx}),
                BasicTensor<T>({hid}), BasicTensor<T>({hid})};
  for (std::size_t j = 0; j < hid; ++j) {
    const T i = k.gates[j], f = k.gates[hid + j], gg = k.gates[2 * hid + j],
            o = k.gates[3 * hid + j];
    const T tc = k.tanh_c[j];
    const T dct = dc[j] + dh[j] * o * (T(1) - tc * tc);
    dz[j] = dct * gg * i * (T(1) - i);
    dz[hid + j] = dct * k.c_prev[j] * f * (T(1) - f);
    dz[2 * hid + j] = dct * i * (T(1) - gg * gg);
    dz[3 * hid + j] = dh[j] * tc * o * (T(1) - o);
    g.dc_prev[j] = dct * f;
  }
  for (std::size_t r = 0; r < 4 * hid; ++r) {
    const T d = dz[r];
    g.d_bias[r] = d;
    T* wx = g.d_w_x.data() + r * nx;
    for (std::size_t c = 0; c < nx; ++c) wx[c] = d * k.x[c];
    T* wh = g.d_w_h.data() + r * hid;
    for (std::size_t c = 0; c < hid; ++c) wh[c] = d * k.h_prev[c];
    axpy(d, p.w_x.data() + r * nx, g.dx.data(), nx);
    axpy(d, p.w_h.data() + r * hid, g.dh_prev.data(), hid);
  }
  return g;
}

// ---------------------------------------------------------------- dropout

template <typename T>
struct DropoutResult {
  BasicTensor<T> output;
  std::vector<T> scale;  // per-element multiplier (0 or 1/(1-rate)); empty when identity
};

// Inverted dropout; identity at inference and when rate == 0.
template <typename T>
DropoutResult<T> dropout_forward(const BasicTensor<T>& input, double rate,
                                 std::uint64_t seed, bool training) {
  if (!(rate >= 0.0 && rate < 1.0))
    fail(ErrorKind::Parameter, "dropout: rate must be in [0,1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return {input, {}};
  Rng rng(seed);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  DropoutResult<T> r{BasicTensor<T>(input.dims()), std::vector<T>(input.size())};
  for (std::size_t i = 0; i < input.size(); ++i) {
    r.scale[i] = rng.uniform() < rate ? T(0) : keep_scale;
    r.output[i] = input[i] * r.scale[i];
  }
  return r;
}

template <typename T>
BasicTensor<T> dropout_backward(const std::vector<T>& scale, const BasicTensor<T>& grad_out) {
  if (scale.empty()) return grad_out;
  BasicTensor<T> dx(grad_out.dims());
  for (std::size_t i = 0; i < grad_out.size(); ++i) dx[i] = grad_out[i] * scale[i];
  return dx;
}

// ---------------------------------------------------------------- mse

// Loss accumulates in at least 64-bit.
template <typename T>
struct LossResult {
  std::common_type_t<T, double> loss;
  BasicTensor<T> grad;
};

template <typename T>
LossResult<T> mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  require_same(pred.dims(), target.dims(), "mse_loss");
  const std::size_t n = pred.size();
  using Acc = std::common_type_t<T, double>;
  LossResult<T> r{Acc(0), BasicTensor<T>(pred.dims())};
  Acc acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Acc d = static_cast<Acc>(pred[i]) - static_cast<Acc>(target[i]);
    acc += d * d;
    r.grad[i] = static_cast<T>(Acc(2) * d / static_cast<Acc>(n));
  }
  r.loss = acc / static_cast<Acc>(n);
  return r;
}

}  // namespace trajlab::nn
