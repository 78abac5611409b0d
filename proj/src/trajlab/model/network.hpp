#pragma once

// CNN encoder shared across frames, stacked LSTM over the frame features, and
// a dense head. Templated on the scalar type: float for training, double for
// gradient checks.
//
// Parameter names, in storage order:
//   conv<i>.weight [F,C,k,k]   conv<i>.bias [F]          i = 1..len(conv_stack)
//   cnn_fc1.weight/bias        cnn_fc2.weight/bias
//   lstm<l>.w_x [4H,N_x]  lstm<l>.w_h [4H,H]  lstm<l>.bias [4H]   l = 1..lstm_cells
//                              gate blocks ordered input, forget, cell, output
//   lstm_fc1.weight/bias       lstm_fc2.weight/bias      head.weight/bias

#include <cstdint>
#include <string>
#include <vector>

#include "trajlab/error.hpp"
#include "trajlab/model/config.hpp"
#include "trajlab/nn/layers.hpp"
#include "trajlab/nn/tensor.hpp"
#include "trajlab/rng.hpp"

namespace trajlab::model {

struct ParamSpec {
  std::string name;
  nn::Shape dims;
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  bool is_bias = false;
};

// Index of each layer's first tensor within the parameter list.
struct Layout {
  std::vector<std::size_t> conv;  // weight; bias at +1
  std::size_t cnn_fc1 = 0, cnn_fc2 = 0;
  std::vector<std::size_t> lstm;  // w_x; w_h at +1; bias at +2
  std::size_t lstm_fc1 = 0, lstm_fc2 = 0, head = 0;
};

std::vector<ParamSpec> param_specs(const ModelConfig& c);
Layout param_layout(const ModelConfig& c);
std::size_t parameter_count(const ModelConfig& c);

template <typename T>
struct ModelParams {
  std::vector<std::string> names;
  std::vector<nn::BasicTensor<T>> tensors;

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    fail(ErrorKind::Parameter, "no parameter named '" + name + "'");
  }
  const nn::BasicTensor<T>& operator[](const std::string& name) const {
    return tensors[index_of(name)];
  }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
  }
  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out{names, {}};
    for (const auto& t : tensors) out.tensors.push_back(t.template cast<U>());
    return out;
  }
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

using Params = ModelParams<float>;

// Glorot-uniform weights from per-tensor streams of the seed; zero biases
// except the LSTM forget-gate block, which starts at 1.
Params init_model(const ModelConfig& c, std::uint64_t seed);

// Throws Checkpoint-independent Shape errors when params do not fit config.
template <typename T>
void check_params(const ModelParams<T>& p, const ModelConfig& c) {
  const auto specs = param_specs(c);
  if (p.tensors.size() != specs.size() || p.names.size() != specs.size())
    fail(ErrorKind::Shape, "parameter list has " + std::to_string(p.tensors.size()) +
                               " tensors, config needs " + std::to_string(specs.size()));
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (p.names[i] != specs[i].name)
      fail(ErrorKind::Shape, "parameter " + std::to_string(i) + " is '" + p.names[i] +
                                 "', expected '" + specs[i].name + "'");
    nn::require_same(p.tensors[i].dims(), specs[i].dims, specs[i].name.c_str());
  }
}

struct ForwardOptions {
  bool training = false;
  std::uint64_t dropout_seed = 0;
};

// Seeds of the individual dropout sites within one sample.
inline std::uint64_t dropout_site_seed(std::uint64_t sample_seed, std::uint64_t site,
                                       std::uint64_t a, std::uint64_t b) {
  return derive_seed(sample_seed, site, a, b);
}

template <typename T>
struct FrameCache {
  std::vector<nn::BasicTensor<T>> conv_in;  // input of conv i (empty for i = 0: the frame)
  std::vector<nn::BasicTensor<T>> conv_z;
  std::vector<std::uint32_t> pool_argmax;
  nn::BasicTensor<T> flat, fc1_z, fc1_drop, fc2_z;
  std::vector<T> fc1_scale;
};

template <typename T>
struct SampleCache {
  std::vector<const nn::BasicTensor<T>*> frames;
  std::vector<FrameCache<T>> frame;
  std::vector<std::vector<nn::LstmCache<T>>> lstm;    // [layer][t]
  std::vector<std::vector<std::vector<T>>> lstm_in_scale;  // [layer][t], layers >= 1
  std::vector<T> top_scale, fc3_scale;
  nn::BasicTensor<T> top, fc3_z, fc3_drop, fc4_z, fc4_a;
};

template <typename T>
struct ForwardResult {
  nn::BasicTensor<T> output;  // [2*n_out], normalized ego-frame coordinates
  SampleCache<T> cache;
};

namespace detail {

template <typename T>
nn::BasicTensor<T> relu(const nn::BasicTensor<T>& z) {
  return nn::activation_forward(nn::Activation::Relu, z);
}

template <typename T>
nn::BasicTensor<T> relu_backward(const nn::BasicTensor<T>& z, const nn::BasicTensor<T>& g) {
  nn::require_same(z.dims(), g.dims(), "relu backward");
  nn::BasicTensor<T> dx(z.dims());
  for (std::size_t i = 0; i < z.size(); ++i) dx[i] = z[i] > T(0) ? g[i] : T(0);
  return dx;
}

template <typename T>
void accumulate(nn::BasicTensor<T>& acc, const nn::BasicTensor<T>& g) {
  nn::axpy(T(1), g.data(), acc.data(), acc.size());
}

}  // namespace detail

template <typename T>
ForwardResult<T> forward(const ModelParams<T>& p, const ModelConfig& c,
                         const std::vector<const nn::BasicTensor<T>*>& frames,
                         const ForwardOptions& opt = {}) {
  using nn::BasicTensor;
  if (frames.size() != static_cast<std::size_t>(c.n_in))
    fail(ErrorKind::Shape, "forward: expected " + std::to_string(c.n_in) + " frames, got " +
                               std::to_string(frames.size()));
  const nn::Shape in_dims = c.input_dims();
  for (const auto* f : frames) nn::require_same(f->dims(), in_dims, "forward frame vs config input");
  const Layout L = param_layout(c);
  const auto& P = p.tensors;
  const double flat_rate = opt.training ? c.flat_dropout : 0.0;
  const double lstm_rate = opt.training ? c.lstm_dropout : 0.0;

  ForwardResult<T> r;
  SampleCache<T>& k = r.cache;
  k.frames = frames;
  const std::size_t n_in = frames.size();
  std::vector<BasicTensor<T>> features;
  for (std::size_t t = 0; t < n_in; ++t) {
    FrameCache<T> fc;
    BasicTensor<T> a;
    for (std::size_t i = 0; i < L.conv.size(); ++i) {
      const BasicTensor<T>& x = i == 0 ? *frames[t] : a;
      BasicTensor<T> z = nn::conv2d_forward(x, P[L.conv[i]], P[L.conv[i] + 1],
                                            static_cast<std::size_t>(c.conv_stack[i].stride));
      if (i > 0) fc.conv_in.push_back(std::move(a));
      a = detail::relu(z);
      fc.conv_z.push_back(std::move(z));
    }
    fc.conv_in.push_back(a);  // input of the pool
    auto pool = nn::maxpool2d_forward(a);
    fc.pool_argmax = std::move(pool.argmax);
    fc.flat = pool.output.reshaped({pool.output.size()});
    fc.fc1_z = nn::dense_forward(fc.flat, P[L.cnn_fc1], P[L.cnn_fc1 + 1]);
    auto d1 = nn::dropout_forward(detail::relu(fc.fc1_z), flat_rate,
                                  dropout_site_seed(opt.dropout_seed, 1, t, 0), opt.training);
    fc.fc1_drop = std::move(d1.output);
    fc.fc1_scale = std::move(d1.scale);
    fc.fc2_z = nn::dense_forward(fc.fc1_drop, P[L.cnn_fc2], P[L.cnn_fc2 + 1]);
    features.push_back(detail::relu(fc.fc2_z));
    k.frame.push_back(std::move(fc));
  }

  const std::size_t n_layers = L.lstm.size();
  const auto hid = static_cast<std::size_t>(c.hidden_units);
  k.lstm.resize(n_layers);
  k.lstm_in_scale.resize(n_layers);
  std::vector<BasicTensor<T>> seq = std::move(features);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const nn::LstmParams<T> lp{P[L.lstm[l]], P[L.lstm[l] + 1], P[L.lstm[l] + 2]};
    BasicTensor<T> h({hid}), cell({hid});
    for (std::size_t t = 0; t < n_in; ++t) {
      BasicTensor<T> x = std::move(seq[t]);
      if (l > 0) {
        auto d = nn::dropout_forward(x, lstm_rate, dropout_site_seed(opt.dropout_seed, 2, l, t),
                                     opt.training);
        x = std::move(d.output);
        k.lstm_in_scale[l].push_back(std::move(d.scale));
      } else {
        k.lstm_in_scale[l].emplace_back();
      }
      auto step = nn::lstm_cell_forward(x, h, cell, lp);
      h = step.h;
      cell = std::move(step.c);
      seq[t] = std::move(step.h);
      k.lstm[l].push_back(std::move(step.cache));
    }
  }

  auto dt = nn::dropout_forward(seq.back(), lstm_rate, dropout_site_seed(opt.dropout_seed, 3, 0, 0),
                                opt.training);
  k.top = std::move(dt.output);
  k.top_scale = std::move(dt.scale);
  k.fc3_z = nn::dense_forward(k.top, P[L.lstm_fc1], P[L.lstm_fc1 + 1]);
  auto d3 = nn::dropout_forward(detail::relu(k.fc3_z), flat_rate,
                                dropout_site_seed(opt.dropout_seed, 4, 0, 0), opt.training);
  k.fc3_drop = std::move(d3.output);
  k.fc3_scale = std::move(d3.scale);
  k.fc4_z = nn::dense_forward(k.fc3_drop, P[L.lstm_fc2], P[L.lstm_fc2 + 1]);
  k.fc4_a = detail::relu(k.fc4_z);
  r.output = nn::dense_forward(k.fc4_a, P[L.head], P[L.head + 1]);
  return r;
}

// Gradients of sum(grad_out * output) w.r.t. every parameter, aligned with
// p.tensors.
template <typename T>
std::vector<nn::BasicTensor<T>> backward(const ModelParams<T>& p, const ModelConfig& c,
                                         const SampleCache<T>& k,
                                         const nn::BasicTensor<T>& grad_out) {
  using nn::BasicTensor;
  const Layout L = param_layout(c);
  const auto& P = p.tensors;
  std::vector<BasicTensor<T>> G;
  G.reserve(P.size());
  for (const auto& t : P) G.emplace_back(t.dims());
  auto put = [&G](std::size_t at, nn::LayerGrad<T>& g) {
    for (std::size_t i = 0; i < g.param_grads.size(); ++i)
      detail::accumulate(G[at + i], g.param_grads[i]);
  };

  auto g_head = nn::dense_backward(k.fc4_a, P[L.head], grad_out);
  put(L.head, g_head);
  auto g4 = nn::dense_backward(k.fc3_drop, P[L.lstm_fc2],
                               detail::relu_backward(k.fc4_z, g_head.input_grad));
  put(L.lstm_fc2, g4);
  auto dz3 = detail::relu_backward(k.fc3_z, nn::dropout_backward(k.fc3_scale, g4.input_grad));
  auto g3 = nn::dense_backward(k.top, P[L.lstm_fc1], dz3);
  put(L.lstm_fc1, g3);
  const BasicTensor<T> d_top = nn::dropout_backward(k.top_scale, g3.input_grad);

  const std::size_t n_in = k.frames.size();
  const std::size_t n_layers = L.lstm.size();
  const auto hid = static_cast<std::size_t>(c.hidden_units);
  std::vector<BasicTensor<T>> dh_above(n_in, BasicTensor<T>({hid}));
  dh_above.back() = d_top;
  std::vector<BasicTensor<T>> d_features(n_in);
  for (std::size_t l = n_layers; l-- > 0;) {
    const nn::LstmParams<T> lp{P[L.lstm[l]], P[L.lstm[l] + 1], P[L.lstm[l] + 2]};
    BasicTensor<T> dh_next({hid}), dc_next({hid});
    std::vector<BasicTensor<T>> dx(n_in);
    for (std::size_t t = n_in; t-- > 0;) {
      BasicTensor<T> dh = dh_above[t];
      detail::accumulate(dh, dh_next);
      auto g = nn::lstm_cell_backward(k.lstm[l][t], lp, dh, dc_next);
      detail::accumulate(G[L.lstm[l]], g.d_w_x);
      detail::accumulate(G[L.lstm[l] + 1], g.d_w_h);
      detail::accumulate(G[L.lstm[l] + 2], g.d_bias);
      dh_next = std::move(g.dh_prev);
      dc_next = std::move(g.dc_prev);
      dx[t] = std::move(g.dx);
    }
    for (std::size_t t = 0; t < n_in; ++t) {
      if (l > 0)
        dh_above[t] = nn::dropout_backward(k.lstm_in_scale[l][t], dx[t]);
      else
        d_features[t] = std::move(dx[t]);
    }
  }

  for (std::size_t t = 0; t < n_in; ++t) {
    const FrameCache<T>& fc = k.frame[t];
    auto g2 = nn::dense_backward(fc.fc1_drop, P[L.cnn_fc2],
                                 detail::relu_backward(fc.fc2_z, d_features[t]));
    put(L.cnn_fc2, g2);
    auto dz1 = detail::relu_backward(fc.fc1_z, nn::dropout_backward(fc.fc1_scale, g2.input_grad));
    auto g1 = nn::dense_backward(fc.flat, P[L.cnn_fc1], dz1);
    put(L.cnn_fc1, g1);
    const BasicTensor<T>& pool_in = fc.conv_in.back();
    BasicTensor<T> da = nn::maxpool2d_backward(pool_in.dims(), fc.pool_argmax, g1.input_grad);
    for (std::size_t i = L.conv.size(); i-- > 0;) {
      const BasicTensor<T>& x = i == 0 ? *k.frames[t] : fc.conv_in[i - 1];
      auto gc = nn::conv2d_backward(x, P[L.conv[i]],
                                    static_cast<std::size_t>(c.conv_stack[i].stride),
                                    detail::relu_backward(fc.conv_z[i], da), i > 0);
      put(L.conv[i], gc);
      da = std::move(gc.input_grad);
    }
  }
  return G;
}

// Active pieces of the piecewise-linear parts: relu masks and pool argmax.
template <typename T>
std::vector<std::uint32_t> kink_signature(const SampleCache<T>& k) {
  std::vector<std::uint32_t> s;
  auto mask = [&s](const nn::BasicTensor<T>& z) {
    for (std::size_t i = 0; i < z.size(); ++i) s.push_back(z[i] > T(0) ? 1u : 0u);
  };
  for (const auto& fc : k.frame) {
    for (const auto& z : fc.conv_z) mask(z);
    s.insert(s.end(), fc.pool_argmax.begin(), fc.pool_argmax.end());
    mask(fc.fc1_z);
    mask(fc.fc2_z);
  }
  mask(k.fc3_z);
  mask(k.fc4_z);
  return s;
}

}  // namespace trajlab::model
