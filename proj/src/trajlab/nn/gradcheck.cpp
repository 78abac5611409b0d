#include "trajlab/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "trajlab/error.hpp"
#include "trajlab/nn/layers.hpp"
#include "trajlab/rng.hpp"

namespace trajlab::nn {

GradCheckResult check_gradients(const GradCheckProblem& problem, double h) {
  GradCheckResult res;
  const std::vector<TensorD> analytic = problem.analytic(problem.vars);
  if (analytic.size() != problem.vars.size())
    fail(ErrorKind::Shape, "gradcheck: analytic gradient count mismatch");
  std::vector<std::uint32_t> base_sig;
  if (problem.signature) base_sig = problem.signature(problem.vars);

  std::vector<TensorD> work = problem.vars;
  for (std::size_t k = 0; k < work.size(); ++k) {
    require_same(analytic[k].dims(), work[k].dims(), "gradcheck analytic vs variable");
    for (std::size_t i = 0; i < work[k].size(); ++i) {
      const std::string label = problem.names[k] + "[" + std::to_string(i) + "]";
      const double orig = work[k][i];
      const double up = orig + h, down = orig - h;
      work[k][i] = up;
      const long double fp = problem.objective(work);
      const bool kink_p = problem.signature && problem.signature(work) != base_sig;
      work[k][i] = down;
      const long double fm = problem.objective(work);
      const bool kink_m = problem.signature && problem.signature(work) != base_sig;
      work[k][i] = orig;

      const double a = analytic[k][i];
      // the realized step, not 2h, so rounding of orig +- h does not bias n
      const double n = static_cast<double>((fp - fm) / static_cast<long double>(up - down));
      if (!std::isfinite(a) || !std::isfinite(n))
        fail(ErrorKind::Numeric, "gradcheck: non-finite gradient at " + label);
      if (kink_p || kink_m) {
        ++res.skipped;
        continue;
      }
      const double denom = std::max({std::abs(a), std::abs(n), 1e-8});
      const double rel = std::abs(a - n) / denom;
      ++res.checked;
      if (res.checked == 1 || rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst = label;
      }
    }
  }
  return res;
}

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::ConvRelu: return "conv2d+relu";
    case LayerKind::Maxpool: return "maxpool2d";
    case LayerKind::Relu: return "relu";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::Tanh: return "tanh";
    case LayerKind::LstmCell: return "lstm_cell";
    case LayerKind::Dropout: return "dropout(0)";
    case LayerKind::DropoutMask: return "dropout(0.5,mask)";
    case LayerKind::Mse: return "mse_loss";
  }
  return "?";
}

std::vector<LayerKind> all_layer_kinds() {
  return {LayerKind::Dense,   LayerKind::Conv2d,   LayerKind::ConvRelu,
          LayerKind::Maxpool, LayerKind::Relu,     LayerKind::Sigmoid,
          LayerKind::Tanh,    LayerKind::LstmCell, LayerKind::Dropout,
          LayerKind::DropoutMask, LayerKind::Mse};
}

namespace {

TensorD random_tensor(Rng& rng, Shape dims, double scale = 1.0) {
  TensorD t(std::move(dims));
  for (auto& v : t.values()) v = rng.uniform(-scale, scale);
  return t;
}

template <typename T>
std::vector<BasicTensor<T>> cast_all(const std::vector<TensorD>& vs) {
  std::vector<BasicTensor<T>> out;
  out.reserve(vs.size());
  for (const auto& v : vs) out.push_back(v.template cast<T>());
  return out;
}

template <typename T>
std::vector<TensorD> to_double(const std::vector<BasicTensor<T>>& vs) {
  std::vector<TensorD> out;
  out.reserve(vs.size());
  for (const auto& v : vs) out.push_back(v.template cast<double>());
  return out;
}

// Wraps a generic gradient function so it runs in the requested precision.
template <typename F>
std::function<std::vector<TensorD>(const std::vector<TensorD>&)> in_precision(F f,
                                                                          Precision p) {
  if (p == Precision::F64)
    return [f](const std::vector<TensorD>& v) { return f(v); };
  return [f](const std::vector<TensorD>& v) { return to_double(f(cast_all<float>(v))); };
}

using TensorX = BasicTensor<long double>;

// Reference objectives take extended-precision copies of the variables.
template <typename F>
std::function<long double(const std::vector<TensorD>&)> extended(F f) {
  return [f](const std::vector<TensorD>& v) { return f(cast_all<long double>(v)); };
}

long double weighted_sum(const TensorD& r, const TensorX& out) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < out.size(); ++i) s += static_cast<long double>(r[i]) * out[i];
  return s;
}

GradCheckProblem dense_problem(Rng& rng, Precision p) {
  const auto nin = static_cast<std::size_t>(rng.uniform_int(1, 8));
  const auto nout = static_cast<std::size_t>(rng.uniform_int(1, 8));
  GradCheckProblem pb;
  pb.names = {"weights", "bias", "input"};
  pb.vars = {random_tensor(rng, {nout, nin}), random_tensor(rng, {nout}),
             random_tensor(rng, {nin})};
  const TensorD r = random_tensor(rng, {nout});
  pb.objective = extended([r](const std::vector<TensorX>& v) {
    return weighted_sum(r, dense_forward(v[2], v[0], v[1]));
  });
  pb.analytic = in_precision(
      [r](const auto& v) {
        using TT = typename std::decay_t<decltype(v[0])>::value_type;
        auto g = dense_backward(v[2], v[0], r.template cast<TT>());
        return std::vector{g.param_grads[0], g.param_grads[1], g.input_grad};
      },
      p);
  return pb;
}

struct ConvDims {
  std::size_t cin, cout, k, stride, h, w;
};

ConvDims random_conv_dims(Rng& rng) {
  ConvDims d{};
  d.cin = static_cast<std::size_t>(rng.uniform_int(1, 3));
  d.cout = static_cast<std::size_t>(rng.uniform_int(1, 3));
  d.k = static_cast<std::size_t>(rng.uniform_int(1, 3));
  d.stride = static_cast<std::size_t>(rng.uniform_int(1, 2));
  d.h = d.k + static_cast<std::size_t>(rng.uniform_int(0, 5));
  d.w = d.k + static_cast<std::size_t>(rng.uniform_int(0, 5));
  return d;
}

GradCheckProblem conv_problem(Rng& rng, Precision p, bool with_relu) {
  GradCheckProblem pb;
  pb.names = {"weights", "bias", "input"};
  ConvDims d{};
  for (int attempt = 0;; ++attempt) {
    if (attempt > 1000) fail(ErrorKind::Numeric, "gradcheck: could not sample kink-free conv");
    d = random_conv_dims(rng);
    pb.vars = {random_tensor(rng, {d.cout, d.cin, d.k, d.k}), random_tensor(rng, {d.cout}),
               random_tensor(rng, {d.cin, d.h, d.w})};
    if (!with_relu) break;
    // keep relu away from its kink
    const TensorD z = conv2d_forward(pb.vars[2], pb.vars[0], pb.vars[1], d.stride);
    if (std::all_of(z.values().begin(), z.values().end(),
                    [](double v) { return std::abs(v) >= 1e-3; }))
      break;
  }
  const std::size_t stride = d.stride;
  const TensorD r = random_tensor(rng, {d.cout, conv_out_extent(d.h, d.k, stride),
                                        conv_out_extent(d.w, d.k, stride)});
  pb.objective = extended([r, stride, with_relu](const std::vector<TensorX>& v) {
    TensorX z = conv2d_forward(v[2], v[0], v[1], stride);
    if (with_relu) z = activation_forward(Activation::Relu, z);
    return weighted_sum(r, z);
  });
  pb.analytic = in_precision(
      [r, stride, with_relu](const auto& v) {
        using TT = typename std::decay_t<decltype(v[0])>::value_type;
        auto up = r.template cast<TT>();
        if (with_relu) {
          const auto z = conv2d_forward(v[2], v[0], v[1], stride);
          up = activation_backward(Activation::Relu, z, activation_forward(Activation::Relu, z),
                                   up);
        }
        auto g = conv2d_backward(v[2], v[0], stride, up);
        return std::vector{g.param_grads[0], g.param_grads[1], g.input_grad};
      },
      p);
  if (with_relu) {
    pb.signature = [stride](const std::vector<TensorD>& v) {
      const TensorD z = conv2d_forward(v[2], v[0], v[1], stride);
      std::vector<std::uint32_t> sig(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) sig[i] = z[i] > 0.0;
      return sig;
    };
  }
  return pb;
}

GradCheckProblem maxpool_problem(Rng& rng, Precision p) {
  const auto c = static_cast<std::size_t>(rng.uniform_int(1, 3));
  const auto h = 2 * static_cast<std::size_t>(rng.uniform_int(1, 3));
  const auto w = 2 * static_cast<std::size_t>(rng.uniform_int(1, 3));
  GradCheckProblem pb;
  pb.names = {"input"};
  pb.vars = {random_tensor(rng, {c, h, w})};
  const TensorD r = random_tensor(rng, {c, h / 2, w / 2});
  pb.objective = extended([r](const std::vector<TensorX>& v) {
    return weighted_sum(r, maxpool2d_forward(v[0]).output);
  });
  pb.analytic = in_precision(
      [r](const auto& v) {
        using TT = typename std::decay_t<decltype(v[0])>::value_type;
        const auto fwd = maxpool2d_forward(v[0]);
        return std::vector{maxpool2d_backward(v[0].dims(), fwd.argmax, r.template cast<TT>())};
      },
      p);
  pb.signature = [](const std::vector<TensorD>& v) { return maxpool2d_forward(v[0]).argmax; };
  return pb;
}

GradCheckProblem activation_problem(Rng& rng, Precision p, Activation kind) {
  const auto n = static_cast<std::size_t>(rng.uniform_int(1, 16));
  GradCheckProblem pb;
  pb.names = {"input"};
  TensorD x = random_tensor(rng, {n}, 2.0);
  if (kind == Activation::Relu) {
    for (auto& v : x.values())
      while (std::abs(v) < 1e-3) v = rng.uniform(-2.0, 2.0);
  }
  pb.vars = {x};
  const TensorD r = random_tensor(rng, {n});
  pb.objective = extended([r, kind](const std::vector<TensorX>& v) {
    return weighted_sum(r, activation_forward(kind, v[0]));
  });
  pb.analytic = in_precision(
      [r, kind](const auto& v) {
        using TT = typename std::decay_t<decltype(v[0])>::value_type;
        const auto y = activation_forward(kind, v[0]);
        return std::vector{activation_backward(kind, v[0], y, r.template cast<TT>())};
      },
      p);
  return pb;
}

GradCheckProblem lstm_problem(Rng& rng, Precision p) {
  const auto nx = static_cast<std::size_t>(rng.uniform_int(1, 6));
  const auto hid = static_cast<std::size_t>(rng.uniform_int(1, 5));
  GradCheckProblem pb;
  pb.names = {"w_x", "w_h", "bias", "x", "h_prev", "c_prev"};
  pb.vars = {random_tensor(rng, {4 * hid, nx}), random_tensor(rng, {4 * hid, hid}),
             random_tensor(rng, {4 * hid}),     random_tensor(rng, {nx}),
             random_tensor(rng, {hid}),         random_tensor(rng, {hid})};
  const TensorD rh = random_tensor(rng, {hid});
  const TensorD rc = random_tensor(rng, {hid});
  pb.objective = extended([rh, rc](const std::vector<TensorX>& v) {
    const LstmParams<long double> prm{v[0], v[1], v[2]};
    const auto s = lstm_cell_forward(v[3], v[4], v[5], prm);
    return weighted_sum(rh, s.h) + weighted_sum(rc, s.c);
  });
  pb.analytic = in_precision(
      [rh, rc](const auto& v) {
        using TT = typename std::decay_t<decltype(v[0])>::value_type;
        const LstmParams<TT> prm{v[0], v[1], v[2]};
        const auto s = lstm_cell_forward(v[3], v[4], v[5], prm);
        auto g = lstm_cell_backward(s.cache, prm, rh.template cast<TT>(), rc.template cast<TT>());
        return std::vector{g.d_w_x, g.d_w_h, g.d_bias, g.dx, g.dh_prev, g.dc_prev};
      },
      p);
  return pb;
}

GradCheckProblem dropout_problem(Rng& rng, Precision p, double rate) {
  const auto n = static_cast<std::size_t>(rng.uniform_int(1, 16));
  const std::uint64_t mask_seed = rng.next_u64();
  GradCheckProblem pb;
  pb.names = {"input"};
  pb.vars = {random_tensor(rng, {n})};
  const TensorD r = random_tensor(rng, {n});
  pb.objective = extended([r, rate, mask_seed](const std::vector<TensorX>& v) {
    return weighted_sum(r, dropout_forward(v[0], rate, mask_seed, true).output);
  });
  pb.analytic = in_precision(
      [r, rate, mask_seed](const auto& v) {
        using TT = typename std::decay_t<decltype(v[0])>::value_type;
        const auto fwd = dropout_forward(v[0], rate, mask_seed, true);
        return std::vector{dropout_backward(fwd.scale, r.template cast<TT>())};
      },
      p);
  return pb;
}

GradCheckProblem mse_problem(Rng& rng, Precision p) {
  const auto n = static_cast<std::size_t>(rng.uniform_int(1, 12));
  GradCheckProblem pb;
  pb.names = {"pred", "target"};
  pb.vars = {random_tensor(rng, {n}), random_tensor(rng, {n})};
  pb.objective = extended([](const std::vector<TensorX>& v) { return mse_loss(v[0], v[1]).loss; });
  pb.analytic = in_precision(
      [](const auto& v) {
        auto r = mse_loss(v[0], v[1]);
        auto neg = r.grad;
        for (auto& x : neg.values()) x = -x;
        return std::vector{r.grad, neg};
      },
      p);
  return pb;
}

}  // namespace

GradCheckProblem make_layer_problem(LayerKind kind, std::uint64_t seed, Precision precision) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(kind), 0x6772616463ULL));
  switch (kind) {
    case LayerKind::Dense: return dense_problem(rng, precision);
    case LayerKind::Conv2d: return conv_problem(rng, precision, false);
    case LayerKind::ConvRelu: return conv_problem(rng, precision, true);
    case LayerKind::Maxpool: return maxpool_problem(rng, precision);
    case LayerKind::Relu: return activation_problem(rng, precision, Activation::Relu);
    case LayerKind::Sigmoid: return activation_problem(rng, precision, Activation::Sigmoid);
    case LayerKind::Tanh: return activation_problem(rng, precision, Activation::Tanh);
    case LayerKind::LstmCell: return lstm_problem(rng, precision);
    case LayerKind::Dropout: return dropout_problem(rng, precision, 0.0);
    case LayerKind::DropoutMask: return dropout_problem(rng, precision, 0.5);
    case LayerKind::Mse: return mse_problem(rng, precision);
  }
  fail(ErrorKind::Parameter, "gradcheck: unknown layer kind");
}

double finite_difference_check(LayerKind kind, std::uint64_t seed, Precision precision) {
  return check_gradients(make_layer_problem(kind, seed, precision)).max_rel_error;
}

}  // namespace trajlab::nn
