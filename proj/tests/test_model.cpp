#include <doctest.h>

#include <cmath>
#include <limits>

#include "support.hpp"
#include "trajlab/error.hpp"
#include "trajlab/model/checkpoint.hpp"
#include "trajlab/model/config.hpp"
#include "trajlab/model/network.hpp"
#include "trajlab/model/train.hpp"
#include "trajlab/rng.hpp"

using namespace trajlab;
using namespace trajlab::model;
using test::TempDir;

namespace {

nn::Tensor random_tensor(const nn::Shape& dims, Rng& rng) {
  nn::Tensor t(dims);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform(0.0, 1.0));
  return t;
}

// n samples with random frames and small random targets.
SampleBank random_bank(const ModelConfig& c, int n, std::uint64_t seed) {
  Rng rng(seed);
  SampleBank bank;
  for (int i = 0; i < n; ++i) {
    std::vector<nn::Tensor> frames;
    for (int t = 0; t < c.n_in; ++t) frames.push_back(random_tensor(c.input_dims(), rng));
    nn::Tensor target({static_cast<std::size_t>(c.output_size())});
    for (std::size_t k = 0; k < target.size(); ++k)
      target[k] = static_cast<float>(rng.uniform(-0.3, 0.3));
    bank.add(std::move(frames), std::move(target), i);
  }
  return bank;
}

std::vector<const Sample*> pointers(const SampleBank& bank) {
  std::vector<const Sample*> out;
  for (const auto& s : bank.samples()) out.push_back(&s);
  return out;
}

}  // namespace

TEST_CASE("parameter counts and checkpoint sizes") {
  const ModelConfig d;
  CHECK(d.flat_features() == 384);
  CHECK(param_specs(d).size() == 28);
  CHECK(parameter_count(d) == 763302);
  CHECK(checkpoint_size(d) == 3054345);

  ModelConfig one = d;
  one.lstm_cells = 1;
  CHECK(parameter_count(one) == 386802);
  CHECK(checkpoint_size(one) == 1548129);

  const ModelConfig toy = toy_config();
  CHECK(toy.flat_features() == 24);
  CHECK(param_specs(toy).size() == 20);
  CHECK(parameter_count(toy) == 966);
  CHECK(checkpoint_size(toy) == 4750);

  const Params p = init_model(d, 3);
  CHECK(p.scalar_count() == parameter_count(d));
  CHECK(encode_checkpoint(d, p).size() == checkpoint_size(d));
}

TEST_CASE("init_model") {
  const ModelConfig c = toy_config();
  CHECK(init_model(c, 7) == init_model(c, 7));
  CHECK_FALSE(init_model(c, 7) == init_model(c, 8));

  const Params p = init_model(c, 7);
  const auto specs = param_specs(c);
  const auto hid = static_cast<std::size_t>(c.hidden_units);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& t = p.tensors[i];
    if (specs[i].is_bias) {
      const bool lstm = specs[i].name.rfind("lstm", 0) == 0 && specs[i].name.find(".bias") != std::string::npos &&
                        specs[i].name.find("fc") == std::string::npos;
      for (std::size_t k = 0; k < t.size(); ++k) {
        const bool forget = lstm && k >= hid && k < 2 * hid;
        CHECK(t[k] == (forget ? 1.0f : 0.0f));
      }
    } else {
      const double limit = std::sqrt(6.0 / static_cast<double>(specs[i].fan_in + specs[i].fan_out));
      for (std::size_t k = 0; k < t.size(); ++k) CHECK(std::abs(t[k]) <= limit);
    }
  }
}

TEST_CASE("forward pass") {
  const ModelConfig c = toy_config();
  const Params p = init_model(c, 1);
  const SampleBank bank = random_bank(c, 4, 11);
  const Sample& s = bank.samples()[0];

  const auto y = predict(p, c, s);
  CHECK(y.size() == static_cast<std::size_t>(c.output_size()));
  CHECK(y.all_finite());
  CHECK(predict(p, c, s) == y);

  SUBCASE("zero head gives zero output") {
    Params z = p;
    const std::size_t w = z.index_of("head.weight");
    z.tensors[w] = nn::Tensor(z.tensors[w].dims());
    const auto out = predict(z, c, s);
    for (std::size_t k = 0; k < out.size(); ++k) CHECK(out[k] == 0.0f);
  }
  SUBCASE("training mode with zero dropout matches inference") {
    ModelConfig nd = c;
    nd.lstm_dropout = nd.flat_dropout = 0.0;
    const auto train = forward(p, nd, s.frames, {true, 99});
    CHECK(train.output == predict(p, nd, s));
  }
  SUBCASE("a sample's output does not depend on its batch neighbours") {
    const auto alone = mean_mse(p, c, std::vector<const Sample*>{&s});
    const auto all = pointers(bank);
    double sum = 0.0;
    for (const Sample* q : all) sum += mean_mse(p, c, std::vector<const Sample*>{q});
    CHECK(mean_mse(p, c, all) == doctest::Approx(sum / all.size()).epsilon(1e-12));
    CHECK(mean_mse(p, c, std::vector<const Sample*>{&s}) == alone);
  }
  SUBCASE("wrong frame count is a shape error") {
    std::vector<const nn::Tensor*> two(s.frames.begin(), s.frames.begin() + 2);
    CHECK_ERROR_KIND(forward(p, c, two), ErrorKind::Shape);
  }
}

TEST_CASE("train_step") {
  const ModelConfig c = toy_config();
  const SampleBank bank = random_bank(c, 6, 5);
  const auto batch = pointers(bank);

  SUBCASE("zero learning rate leaves parameters unchanged") {
    Params p = init_model(c, 2);
    const Params before = p;
    nn::AdamState<float> adam(p.tensors, 0.0, c.beta1);
    const double loss = train_step(p, c, batch, adam, 1);
    CHECK(std::isfinite(loss));
    CHECK(p == before);
  }
  SUBCASE("identical across thread counts") {
    Params a = init_model(c, 2), b = a;
    nn::AdamState<float> sa(a.tensors, c.lr, c.beta1), sb(b.tensors, c.lr, c.beta1);
    for (std::uint64_t k = 0; k < 5; ++k) {
      CHECK(train_step(a, c, batch, sa, k, 1) == train_step(b, c, batch, sb, k, 3));
    }
    CHECK(a == b);
  }
  SUBCASE("non-finite parameters raise a numeric error") {
    Params p = init_model(c, 2);
    p.tensors[0][0] = std::numeric_limits<float>::quiet_NaN();
    nn::AdamState<float> adam(p.tensors, c.lr, c.beta1);
    CHECK_ERROR_KIND(train_step(p, c, batch, adam, 1), ErrorKind::Numeric);
  }
  SUBCASE("empty batch") {
    Params p = init_model(c, 2);
    nn::AdamState<float> adam(p.tensors, c.lr, c.beta1);
    CHECK_ERROR_KIND(train_step(p, c, {}, adam, 1), ErrorKind::Parameter);
  }
}

TEST_CASE("overfits ten samples at default settings") {
  const ModelConfig c;
  const SampleBank bank = random_bank(c, 10, 21);
  const auto all = pointers(bank);
  Params p = init_model(c, 4);
  nn::AdamState<float> adam(p.tensors, c.lr, c.beta1);
  const double initial = mean_mse(p, c, all);
  for (std::uint64_t k = 0; k < 200; ++k) train_step(p, c, all, adam, k);
  const double final = mean_mse(p, c, all);
  MESSAGE("overfit mse ", initial, " -> ", final);
  CHECK(final < 0.1 * initial);
}

TEST_CASE("train_on") {
  ModelConfig c = toy_config();
  c.epochs = 3;
  c.batch_size = 4;
  const SampleBank train = random_bank(c, 12, 31), val = random_bank(c, 4, 32);
  int calls = 0;
  const auto r1 = train_on(train, val, c, 1, [&calls](const EpochStats&) { ++calls; });
  const auto r3 = train_on(train, val, c, 3);
  CHECK(calls == 3);
  CHECK(r1.history.epochs.size() == 3);
  CHECK(r1.params == r3.params);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(r1.history.epochs[e].epoch == static_cast<int>(e) + 1);
    CHECK(r1.history.epochs[e].train_mse == r3.history.epochs[e].train_mse);
    CHECK(r1.history.epochs[e].val_mse == r3.history.epochs[e].val_mse);
  }
  const auto& best = r1.history.epochs[r1.history.best_epoch - 1];
  CHECK(best.val_mse == r1.history.best_val_mse);
  for (const auto& e : r1.history.epochs) CHECK(e.val_mse >= r1.history.best_val_mse);
  CHECK(mean_mse(r1.params, c, val) == doctest::Approx(r1.history.best_val_mse).epsilon(1e-9));
  CHECK(history_to_json(r1.history) == history_to_json(r3.history));

  CHECK_ERROR_KIND(train_on(SampleBank{}, val, c), ErrorKind::Config);
}

TEST_CASE("checkpoint round trip") {
  const ModelConfig c = toy_config();
  const Params p = init_model(c, 9);
  TempDir dir("ckpt");
  save_checkpoint(dir / "m.ckpt", c, p);
  const Checkpoint k = load_checkpoint(dir / "m.ckpt");
  CHECK(k.config == c);
  CHECK(k.params == p);
  CHECK(encode_checkpoint(k.config, k.params) == encode_checkpoint(c, p));

  const auto bytes = encode_checkpoint(c, p);
  SUBCASE("truncated") {
    for (std::size_t n : {std::size_t{0}, std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
      const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<long>(n));
      CHECK_ERROR_KIND(decode_checkpoint(cut), ErrorKind::Checkpoint);
    }
  }
  SUBCASE("bad magic") {
    auto b = bytes;
    b[0] = 'X';
    CHECK_ERROR_KIND(decode_checkpoint(b), ErrorKind::Checkpoint);
  }
  SUBCASE("unknown version") {
    auto b = bytes;
    b[4] = 2;
    CHECK_ERROR_KIND(decode_checkpoint(b), ErrorKind::Checkpoint);
  }
  SUBCASE("trailing bytes") {
    auto b = bytes;
    b.push_back(0);
    CHECK_ERROR_KIND(decode_checkpoint(b), ErrorKind::Checkpoint);
  }
  SUBCASE("tensors that do not fit the config") {
    ModelConfig other = c;
    other.hidden_units = 5;
    CHECK_ERROR_KIND(encode_checkpoint(other, p), ErrorKind::Shape);
  }
  SUBCASE("missing file") {
    CHECK_ERROR_KIND(load_checkpoint(dir / "absent.ckpt"), ErrorKind::Io);
  }
}

TEST_CASE("model config") {
  CHECK_NOTHROW(validate(ModelConfig{}));
  CHECK(config_from_json(config_to_json(ModelConfig{})) == ModelConfig{});
  CHECK(config_from_json(nlohmann::json::object()) == ModelConfig{});

  try {
    config_from_json({{"hiden_units", 10}});
    FAIL("unknown key accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    CHECK(std::string(e.what()).find("hiden_units") != std::string::npos);
  }
  CHECK_NOTHROW(config_from_json({{"data", "x"}}, {"data"}));

  ModelConfig c;
  c.mode = ConfigMode::PaperSweep;
  CHECK_NOTHROW(validate(c));
  c.hidden_units = 130;
  CHECK_ERROR_KIND(validate(c), ErrorKind::Config);
  c.mode = ConfigMode::Free;
  CHECK_NOTHROW(validate(c));

  ModelConfig bad;
  bad.lstm_cells = 0;
  CHECK_ERROR_KIND(validate(bad), ErrorKind::Config);
  bad = ModelConfig{};
  bad.conv_stack = {{8, 61, 1}};
  CHECK_ERROR_KIND(validate(bad), ErrorKind::Config);
}
