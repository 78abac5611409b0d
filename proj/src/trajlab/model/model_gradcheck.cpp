#include "trajlab/model/model_gradcheck.hpp"

#include <memory>

#include "trajlab/model/config.hpp"
#include "trajlab/model/network.hpp"
#include "trajlab/rng.hpp"

namespace trajlab::model {

namespace {

struct Fixture {
  ModelConfig config = toy_config();
  std::vector<nn::TensorD> frames;
  nn::TensorD target;
  std::uint64_t dropout_seed = 0;
  std::vector<std::string> names;
};

template <typename T>
ModelParams<T> as_params(const Fixture& fx, const std::vector<nn::TensorD>& v) {
  ModelParams<T> p;
  p.names = fx.names;
  for (const auto& t : v) p.tensors.push_back(t.cast<T>());
  return p;
}

template <typename T>
ForwardResult<T> run(const Fixture& fx, const ModelParams<T>& p,
                     std::vector<nn::BasicTensor<T>>& frame_store) {
  std::vector<const nn::BasicTensor<T>*> ptrs;
  for (const auto& f : frame_store) ptrs.push_back(&f);
  return forward(p, fx.config, ptrs, {true, fx.dropout_seed});
}

template <typename T>
std::vector<nn::TensorD> analytic_grads(const Fixture& fx, const std::vector<nn::TensorD>& v) {
  const auto p = as_params<T>(fx, v);
  std::vector<nn::BasicTensor<T>> frames;
  for (const auto& f : fx.frames) frames.push_back(f.cast<T>());
  auto fw = run(fx, p, frames);
  const auto loss = nn::mse_loss(fw.output, fx.target.cast<T>());
  auto g = backward(p, fx.config, fw.cache, loss.grad);
  std::vector<nn::TensorD> out;
  for (const auto& t : g) out.push_back(t.template cast<double>());
  return out;
}

}  // namespace

nn::GradCheckProblem make_model_problem(std::uint64_t seed, nn::Precision precision) {
  auto fx = std::make_shared<Fixture>();
  const ModelConfig& c = fx->config;
  Rng rng(derive_seed(seed, 0x746f79ULL));
  const Params init = init_model(c, derive_seed(seed, 1));
  nn::GradCheckProblem pb;
  pb.names = init.names;
  fx->names = init.names;
  // parameters exactly as training starts from them
  for (const auto& t : init.tensors) pb.vars.push_back(t.cast<double>());
  for (int k = 0; k < c.n_in; ++k) {
    nn::TensorD f(c.input_dims());
    for (auto& x : f.values()) x = rng.uniform();
    fx->frames.push_back(std::move(f));
  }
  fx->target = nn::TensorD({static_cast<std::size_t>(c.output_size())});
  for (auto& x : fx->target.values()) x = rng.uniform(-0.5, 0.5);
  fx->dropout_seed = derive_seed(seed, 2);

  pb.objective = [fx](const std::vector<nn::TensorD>& v) {
    const auto p = as_params<long double>(*fx, v);
    std::vector<nn::BasicTensor<long double>> frames;
    for (const auto& f : fx->frames) frames.push_back(f.cast<long double>());
    return nn::mse_loss(run(*fx, p, frames).output, fx->target.cast<long double>()).loss;
  };
  if (precision == nn::Precision::F64)
    pb.analytic = [fx](const std::vector<nn::TensorD>& v) { return analytic_grads<double>(*fx, v); };
  else
    pb.analytic = [fx](const std::vector<nn::TensorD>& v) { return analytic_grads<float>(*fx, v); };
  pb.signature = [fx](const std::vector<nn::TensorD>& v) {
    const auto p = as_params<double>(*fx, v);
    auto frames = fx->frames;
    return kink_signature(run(*fx, p, frames).cache);
  };
  return pb;
}

double model_gradient_check(std::uint64_t seed, nn::Precision precision) {
  return nn::check_gradients(make_model_problem(seed, precision)).max_rel_error;
}

}  // namespace trajlab::model
