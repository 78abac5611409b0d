#pragma once

#include <cstdint>

#include "trajlab/nn/gradcheck.hpp"

namespace trajlab::model {

// Whole-network gradient check on the toy architecture: random parameters,
// random frames and target, training-mode dropout with a fixed mask, MSE
// objective. Variables are every parameter tensor.
nn::GradCheckProblem make_model_problem(std::uint64_t seed, nn::Precision precision);

double model_gradient_check(std::uint64_t seed, nn::Precision precision = nn::Precision::F64);

}  // namespace trajlab::model
