#include "trajlab/model/network.hpp"

#include <cmath>

namespace trajlab::model {

std::vector<ParamSpec> param_specs(const ModelConfig& c) {
  validate(c);
  std::vector<ParamSpec> s;
  auto dense = [&s](const std::string& name, std::size_t nin, std::size_t nout) {
    s.push_back({name + ".weight", {nout, nin}, nin, nout, false});
    s.push_back({name + ".bias", {nout}, nin, nout, true});
  };
  std::size_t cin = static_cast<std::size_t>(c.channels);
  for (std::size_t i = 0; i < c.conv_stack.size(); ++i) {
    const auto f = static_cast<std::size_t>(c.conv_stack[i].filters);
    const auto k = static_cast<std::size_t>(c.conv_stack[i].kernel);
    const std::string name = "conv" + std::to_string(i + 1);
    s.push_back({name + ".weight", {f, cin, k, k}, cin * k * k, f * k * k, false});
    s.push_back({name + ".bias", {f}, cin * k * k, f * k * k, true});
    cin = f;
  }
  dense("cnn_fc1", c.flat_features(), static_cast<std::size_t>(c.cnn_fc1));
  dense("cnn_fc2", static_cast<std::size_t>(c.cnn_fc1), static_cast<std::size_t>(c.cnn_fc2));
  const auto hid = static_cast<std::size_t>(c.hidden_units);
  std::size_t nx = static_cast<std::size_t>(c.cnn_fc2);
  for (int l = 0; l < c.lstm_cells; ++l) {
    const std::string name = "lstm" + std::to_string(l + 1);
    s.push_back({name + ".w_x", {4 * hid, nx}, nx, hid, false});
    s.push_back({name + ".w_h", {4 * hid, hid}, hid, hid, false});
    s.push_back({name + ".bias", {4 * hid}, nx, hid, true});
    nx = hid;
  }
  dense("lstm_fc1", hid, static_cast<std::size_t>(c.lstm_fc1));
  dense("lstm_fc2", static_cast<std::size_t>(c.lstm_fc1), static_cast<std::size_t>(c.lstm_fc2));
  dense("head", static_cast<std::size_t>(c.lstm_fc2), static_cast<std::size_t>(c.output_size()));
  return s;
}

Layout param_layout(const ModelConfig& c) {
  Layout L;
  std::size_t at = 0;
  for (std::size_t i = 0; i < c.conv_stack.size(); ++i, at += 2) L.conv.push_back(at);
  L.cnn_fc1 = at;
  L.cnn_fc2 = at + 2;
  at += 4;
  for (int l = 0; l < c.lstm_cells; ++l, at += 3) L.lstm.push_back(at);
  L.lstm_fc1 = at;
  L.lstm_fc2 = at + 2;
  L.head = at + 4;
  return L;
}

std::size_t parameter_count(const ModelConfig& c) {
  std::size_t n = 0;
  for (const auto& s : param_specs(c)) n += nn::shape_numel(s.dims);
  return n;
}

Params init_model(const ModelConfig& c, std::uint64_t seed) {
  const auto specs = param_specs(c);
  Params p;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const ParamSpec& s = specs[i];
    nn::Tensor t(s.dims);
    if (s.is_bias) {
      const bool lstm = s.name.rfind("lstm", 0) == 0 && s.name.rfind("lstm_fc", 0) != 0;
      if (lstm) {
        const std::size_t hid = t.size() / 4;
        for (std::size_t j = hid; j < 2 * hid; ++j) t[j] = 1.0f;
      }
    } else {
      Rng rng(derive_seed(seed, 0x696e6974ULL, i));
      const double bound = std::sqrt(6.0 / static_cast<double>(s.fan_in + s.fan_out));
      for (std::size_t j = 0; j < t.size(); ++j)
        t[j] = static_cast<float>(rng.uniform(-bound, bound));
    }
    p.names.push_back(s.name);
    p.tensors.push_back(std::move(t));
  }
  return p;
}

}  // namespace trajlab::model
