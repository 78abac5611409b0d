#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "trajlab/nn/tensor.hpp"

namespace trajlab::nn {

enum class Precision { F64, F32 };

// A scalar objective over named variables (parameters and inputs) together
// with its analytic gradient. `objective` is the central-difference reference
// and runs in extended precision so its rounding noise stays far below the
// smallest gradients being checked; `analytic` runs the layer in 64-bit or
// 32-bit.
struct GradCheckProblem {
  std::vector<std::string> names;
  std::vector<TensorD> vars;
  std::function<long double(const std::vector<TensorD>&)> objective;
  std::function<std::vector<TensorD>(const std::vector<TensorD>&)> analytic;
  // Optional: identifies the active piece of a piecewise-smooth function
  // (relu masks, pool argmax). Elements whose perturbation changes it are
  // skipped because the derivative does not exist across the kink.
  std::function<std::vector<std::uint32_t>(const std::vector<TensorD>&)> signature;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "<var>[<flat index>]"
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

// Central differences with step h against the analytic gradient. Relative
// error per element: |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult check_gradients(const GradCheckProblem& problem, double h = 1e-5);

enum class LayerKind {
  Dense,
  Conv2d,
  ConvRelu,
  Maxpool,
  Relu,
  Sigmoid,
  Tanh,
  LstmCell,
  Dropout,      // rate 0: identity
  DropoutMask,  // rate 0.5, training mode, fixed mask
  Mse,
};

const char* layer_kind_name(LayerKind kind);
std::vector<LayerKind> all_layer_kinds();

// Builds a small random instance of the layer from the seed. Objective is
// sum(r * output) for a fixed random r (or the loss itself for Mse).
GradCheckProblem make_layer_problem(LayerKind kind, std::uint64_t seed, Precision precision);

double finite_difference_check(LayerKind kind, std::uint64_t seed,
                               Precision precision = Precision::F64);

}  // namespace trajlab::nn
