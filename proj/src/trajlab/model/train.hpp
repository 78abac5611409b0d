#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <vector>

#include "trajlab/data/dataset.hpp"
#include "trajlab/model/config.hpp"
#include "trajlab/model/network.hpp"
#include "trajlab/nn/adam.hpp"

namespace trajlab::model {

// RGB bytes to a [3,H,W] tensor scaled into [0,1].
nn::Tensor image_to_tensor(const render::Image& img);

struct Sample {
  int episode_id = 0;
  std::vector<const nn::Tensor*> frames;  // n_in, owned by the SampleBank
  nn::Tensor target;                      // label / kNormScale
  data::SampleSequence sequence;
};

// Decoded frames and the samples that point into them.
class SampleBank {
 public:
  SampleBank() = default;
  SampleBank(const std::vector<data::LoadedEpisode>& episodes, const ModelConfig& c,
             int stride = 1);
  SampleBank(const SampleBank&) = delete;
  SampleBank& operator=(const SampleBank&) = delete;
  SampleBank(SampleBank&&) = default;
  SampleBank& operator=(SampleBank&&) = default;

  const std::vector<Sample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  // For tests: samples built from explicit frame tensors and targets.
  void add(std::vector<nn::Tensor> frames, nn::Tensor target, int episode_id = 0);

 private:
  std::deque<nn::Tensor> images_;  // deque keeps addresses stable
  std::vector<Sample> samples_;
};

// Inference-mode prediction, normalized units.
nn::Tensor predict(const Params& p, const ModelConfig& c, const Sample& s);

// Mean inference-mode MSE over the samples (normalized units).
double mean_mse(const Params& p, const ModelConfig& c, const std::vector<const Sample*>& samples,
                int jobs = 1);
double mean_mse(const Params& p, const ModelConfig& c, const SampleBank& bank, int jobs = 1);

// Samples are accumulated in fixed-size chunks and chunk sums added in
// order, so the update is bit-identical for any thread count.
inline constexpr std::size_t kGradChunk = 5;

// One Adam update on the batch; returns the batch MSE (training mode).
// Dropout masks derive from (step_seed, position in batch).
double train_step(Params& p, const ModelConfig& c, const std::vector<const Sample*>& batch,
                  nn::AdamState<float>& adam, std::uint64_t step_seed, int jobs = 1);

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_mse = 0.0;
  double val_mse = 0.0;
  double wall_s = 0.0;
};

struct TrainHistory {
  std::uint64_t seed = 0;
  ModelConfig config;
  std::vector<EpochStats> epochs;
  int best_epoch = 0;
  double best_val_mse = 0.0;
};

nlohmann::json history_to_json(const TrainHistory& h);

struct TrainResult {
  Params params;  // from the best-validation epoch
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochStats&)>;

TrainResult train_on(const SampleBank& train, const SampleBank& val, const ModelConfig& c,
                     int jobs = 1, const EpochCallback& on_epoch = {});

// Loads the train and val splits of a generated dataset and trains.
TrainResult train_loop(const std::filesystem::path& dataset_dir, const ModelConfig& c,
                       int jobs = 1, const EpochCallback& on_epoch = {});

// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first
// failure by index.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace trajlab::model
