#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "trajlab/nn/tensor.hpp"

namespace trajlab::model {

struct ConvSpec {
  int filters = 0;
  int kernel = 0;
  int stride = 1;
  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

// "paper-sweep" restricts every tunable to the published hyperparameter grid;
// "free" accepts any consistent value.
enum class ConfigMode { Free, PaperSweep };

struct ModelConfig {
  int n_in = 5;
  int n_out = 5;
  int channels = 3;
  int height = 60;
  int width = 80;
  std::vector<ConvSpec> conv_stack{{8, 5, 2}, {16, 3, 2}, {32, 3, 2}};
  int cnn_fc1 = 256;
  int cnn_fc2 = 256;
  int lstm_cells = 4;
  int hidden_units = 125;
  int lstm_fc1 = 128;
  int lstm_fc2 = 64;
  double lstm_dropout = 0.25;
  double flat_dropout = 0.1;
  int batch_size = 50;
  int epochs = 20;
  double lr = 1e-3;
  double beta1 = 0.9;
  std::uint64_t seed = 0;
  ConfigMode mode = ConfigMode::Free;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;

  int output_size() const { return 2 * n_out; }
  nn::Shape input_dims() const;
  // Spatial dims after each conv and after the pool; throws Config on
  // inconsistency.
  std::vector<nn::Shape> feature_dims() const;
  std::size_t flat_features() const;
};

// Throws Config with the offending field named.
void validate(const ModelConfig& c);

const std::vector<std::string>& model_config_keys();

nlohmann::json config_to_json(const ModelConfig& c);
// Missing keys keep their defaults; unknown keys are rejected unless listed in
// `extra_keys` (which the caller handles).
ModelConfig config_from_json(const nlohmann::json& j,
                             const std::vector<std::string>& extra_keys = {});
std::string config_dump(const ModelConfig& c);

// Small architecture used by the end-to-end gradient check.
ModelConfig toy_config();

}  // namespace trajlab::model
