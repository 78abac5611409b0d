#include "trajlab/model/train.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "trajlab/error.hpp"
#include "trajlab/rng.hpp"

namespace trajlab::model {

nn::Tensor image_to_tensor(const render::Image& img) {
  const auto h = static_cast<std::size_t>(img.height), w = static_cast<std::size_t>(img.width);
  nn::Tensor t({3, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < 3; ++ch)
        t.at(ch, y, x) = static_cast<float>(img.pixels[(y * w + x) * 3 + ch]) / 255.0f;
  return t;
}

SampleBank::SampleBank(const std::vector<data::LoadedEpisode>& episodes, const ModelConfig& c,
                       int stride) {
  const nn::Shape dims = c.input_dims();
  for (const auto& ep : episodes) {
    const std::size_t base = images_.size();
    for (const auto& img : ep.images) {
      images_.push_back(image_to_tensor(img));
      nn::require_same(images_.back().dims(), dims, "dataset frame vs model input");
    }
    auto seqs = data::build_sequences(ep.records, c.n_in, c.n_out, stride, ep.entry.id);
    for (auto& s : seqs) {
      Sample smp;
      smp.episode_id = ep.entry.id;
      // inputs are consecutive, so the first input's offset locates the rest
      const auto first = static_cast<std::size_t>(s.inputs.front().frame - ep.records.front().frame);
      for (int k = 0; k < c.n_in; ++k)
        smp.frames.push_back(&images_[base + first + static_cast<std::size_t>(k)]);
      std::vector<float> t(s.label.size());
      for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<float>(s.label[i] / data::SampleSequence::kNormScale);
      const std::size_t n = t.size();
      smp.target = nn::Tensor({n}, std::move(t));
      smp.sequence = std::move(s);
      samples_.push_back(std::move(smp));
    }
  }
}

void SampleBank::add(std::vector<nn::Tensor> frames, nn::Tensor target, int episode_id) {
  Sample s;
  s.episode_id = episode_id;
  for (auto& f : frames) {
    images_.push_back(std::move(f));
    s.frames.push_back(&images_.back());
  }
  s.target = std::move(target);
  samples_.push_back(std::move(s));
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

nn::Tensor predict(const Params& p, const ModelConfig& c, const Sample& s) {
  return forward(p, c, s.frames, {false, 0}).output;
}

double mean_mse(const Params& p, const ModelConfig& c, const std::vector<const Sample*>& samples,
                int jobs) {
  if (samples.empty()) fail(ErrorKind::Config, "cannot compute MSE over an empty sample set");
  std::vector<double> losses(samples.size());
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    losses[i] = nn::mse_loss(predict(p, c, *samples[i]), samples[i]->target).loss;
  });
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(samples.size());
}

double mean_mse(const Params& p, const ModelConfig& c, const SampleBank& bank, int jobs) {
  std::vector<const Sample*> all;
  for (const auto& s : bank.samples()) all.push_back(&s);
  return mean_mse(p, c, all, jobs);
}

namespace {

void require_finite(const Params& p, const std::vector<nn::Tensor>& tensors, const char* what) {
  for (std::size_t i = 0; i < tensors.size(); ++i)
    if (!tensors[i].all_finite())
      fail(ErrorKind::Numeric, std::string(what) + " '" + p.names[i] + "' is not finite");
}

}  // namespace

double train_step(Params& p, const ModelConfig& c, const std::vector<const Sample*>& batch,
                  nn::AdamState<float>& adam, std::uint64_t step_seed, int jobs) {
  if (batch.empty()) fail(ErrorKind::Parameter, "train_step: empty batch");
  const std::size_t n_chunks = (batch.size() + kGradChunk - 1) / kGradChunk;
  const float inv_b = 1.0f / static_cast<float>(batch.size());
  std::vector<std::vector<nn::Tensor>> chunk_grads(n_chunks);
  std::vector<double> chunk_loss(n_chunks, 0.0);

  parallel_for(n_chunks, jobs, [&](std::size_t ch) {
    std::vector<nn::Tensor> acc;
    for (const auto& t : p.tensors) acc.emplace_back(t.dims());
    const std::size_t end = std::min(batch.size(), (ch + 1) * kGradChunk);
    for (std::size_t j = ch * kGradChunk; j < end; ++j) {
      const Sample& s = *batch[j];
      auto fw = forward(p, c, s.frames, {true, derive_seed(step_seed, j)});
      auto loss = nn::mse_loss(fw.output, s.target);
      if (!std::isfinite(loss.loss))
        fail(ErrorKind::Numeric, "non-finite loss; first non-finite tensor: " +
                                     std::string(fw.output.all_finite() ? "target" : "output"));
      chunk_loss[ch] += loss.loss;
      for (auto& g : loss.grad.values()) g *= inv_b;
      auto grads = backward(p, c, fw.cache, loss.grad);
      for (std::size_t i = 0; i < acc.size(); ++i)
        nn::axpy(1.0f, grads[i].data(), acc[i].data(), acc[i].size());
    }
    chunk_grads[ch] = std::move(acc);
  });

  std::vector<nn::Tensor> grads = std::move(chunk_grads[0]);
  double loss = chunk_loss[0];
  for (std::size_t ch = 1; ch < n_chunks; ++ch) {
    for (std::size_t i = 0; i < grads.size(); ++i)
      nn::axpy(1.0f, chunk_grads[ch][i].data(), grads[i].data(), grads[i].size());
    loss += chunk_loss[ch];
  }
  require_finite(p, grads, "gradient of");
  nn::adam_step(std::span<nn::Tensor>(p.tensors), std::span<const nn::Tensor>(grads), adam);
  require_finite(p, p.tensors, "updated parameter");
  return loss / static_cast<double>(batch.size());
}

// Wall times are left out so the file is reproducible.
nlohmann::json history_to_json(const TrainHistory& h) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : h.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"train_mse", e.train_mse},
                      {"val_mse", e.val_mse}});
  return {{"seed", h.seed},
          {"config", config_to_json(h.config)},
          {"epochs", epochs},
          {"best_epoch", h.best_epoch},
          {"best_val_mse", h.best_val_mse}};
}

TrainResult train_on(const SampleBank& train, const SampleBank& val, const ModelConfig& c,
                     int jobs, const EpochCallback& on_epoch) {
  validate(c);
  if (train.empty()) fail(ErrorKind::Config, "training split has no samples");
  if (val.empty()) fail(ErrorKind::Config, "validation split has no samples");

  TrainResult r;
  r.history.seed = c.seed;
  r.history.config = c;
  Params p = init_model(c, c.seed);
  nn::AdamState<float> adam(std::span<const nn::Tensor>(p.tensors), c.lr, c.beta1);
  std::vector<const Sample*> val_set;
  for (const auto& s : val.samples()) val_set.push_back(&s);

  std::vector<std::size_t> order(train.size());
  std::uint64_t step = 0;
  for (int epoch = 1; epoch <= c.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(c.seed, 0x73687566ULL, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1],
                order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);

    double loss_sum = 0.0;
    const auto bs = static_cast<std::size_t>(c.batch_size);
    for (std::size_t b = 0; b < order.size(); b += bs) {
      std::vector<const Sample*> batch;
      for (std::size_t j = b; j < std::min(order.size(), b + bs); ++j)
        batch.push_back(&train.samples()[order[j]]);
      const std::uint64_t step_seed =
          derive_seed(c.seed, 0x64726f70ULL, static_cast<std::uint64_t>(epoch), step++);
      loss_sum += train_step(p, c, batch, adam, step_seed, jobs) * static_cast<double>(batch.size());
    }

    EpochStats st;
    st.epoch = epoch;
    st.train_mse = loss_sum / static_cast<double>(order.size());
    st.val_mse = mean_mse(p, c, val_set, jobs);
    st.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.history.epochs.push_back(st);
    if (epoch == 1 || st.val_mse < r.history.best_val_mse) {
      r.history.best_val_mse = st.val_mse;
      r.history.best_epoch = epoch;
      r.params = p;
    }
    if (on_epoch) on_epoch(st);
  }
  return r;
}

TrainResult train_loop(const std::filesystem::path& dataset_dir, const ModelConfig& c, int jobs,
                       const EpochCallback& on_epoch) {
  validate(c);
  const auto manifest = data::load_manifest(dataset_dir);
  if (manifest.camera.width_px != c.width || manifest.camera.height_px != c.height ||
      c.channels != 3)
    fail(ErrorKind::Config, "dataset frames are " + std::to_string(manifest.camera.width_px) + "x" +
                                std::to_string(manifest.camera.height_px) +
                                " RGB but the model expects " + std::to_string(c.width) + "x" +
                                std::to_string(c.height) + "x" + std::to_string(c.channels));
  if (manifest.count(data::Split::Train) == 0)
    fail(ErrorKind::Config, "dataset has an empty train split");
  if (manifest.count(data::Split::Val) == 0)
    fail(ErrorKind::Config, "dataset has an empty val split");
  const SampleBank train(data::load_split(dataset_dir, manifest, data::Split::Train), c);
  const SampleBank val(data::load_split(dataset_dir, manifest, data::Split::Val), c);
  return train_on(train, val, c, jobs, on_epoch);
}

}  // namespace trajlab::model
