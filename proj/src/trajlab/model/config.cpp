#include "trajlab/model/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "trajlab/error.hpp"
#include "trajlab/nn/layers.hpp"

namespace trajlab::model {

using nlohmann::json;

nn::Shape ModelConfig::input_dims() const {
  return {static_cast<std::size_t>(channels), static_cast<std::size_t>(height),
          static_cast<std::size_t>(width)};
}

namespace {

[[noreturn]] void config_error(const std::string& what) {
  fail(ErrorKind::Config, "model config: " + what);
}

void require_positive(int v, const char* field) {
  if (v < 1) config_error(std::string(field) + " must be positive, got " + std::to_string(v));
}

template <typename V>
bool on_grid(V v, std::initializer_list<V> grid) {
  return std::any_of(grid.begin(), grid.end(), [v](V g) {
    if constexpr (std::is_floating_point_v<V>)
      return std::abs(v - g) < 1e-9;
    else
      return v == g;
  });
}

template <typename V>
void require_grid(V v, std::initializer_list<V> grid, const char* field) {
  if (!on_grid(v, grid)) {
    std::string s;
    for (V g : grid) s += (s.empty() ? "" : ",") + json(g).dump();
    config_error(std::string(field) + " = " + json(v).dump() +
                 " is off the sweep grid {" + s + "} (use mode \"free\")");
  }
}

}  // namespace

std::vector<nn::Shape> ModelConfig::feature_dims() const {
  require_positive(channels, "input.channels");
  require_positive(height, "input.height");
  require_positive(width, "input.width");
  if (conv_stack.empty()) config_error("conv_stack must not be empty");
  std::vector<nn::Shape> out;
  std::size_t c = static_cast<std::size_t>(channels), h = static_cast<std::size_t>(height),
              w = static_cast<std::size_t>(width);
  for (std::size_t i = 0; i < conv_stack.size(); ++i) {
    const ConvSpec& s = conv_stack[i];
    const std::string at = "conv_stack[" + std::to_string(i) + "]";
    require_positive(s.filters, (at + ".filters").c_str());
    require_positive(s.kernel, (at + ".kernel").c_str());
    require_positive(s.stride, (at + ".stride").c_str());
    const auto k = static_cast<std::size_t>(s.kernel);
    if (k > h || k > w)
      config_error(at + " kernel " + std::to_string(k) + " exceeds feature map " +
                   std::to_string(h) + "x" + std::to_string(w));
    h = nn::conv_out_extent(h, k, static_cast<std::size_t>(s.stride));
    w = nn::conv_out_extent(w, k, static_cast<std::size_t>(s.stride));
    c = static_cast<std::size_t>(s.filters);
    out.push_back({c, h, w});
  }
  if (h % 2 != 0 || w % 2 != 0)
    config_error("final conv map " + nn::shape_str(out.back()) +
                 " has odd height or width and cannot be pooled 2x2");
  out.push_back({c, h / 2, w / 2});
  return out;
}

std::size_t ModelConfig::flat_features() const { return nn::shape_numel(feature_dims().back()); }

void validate(const ModelConfig& c) {
  require_positive(c.n_in, "n_in");
  require_positive(c.n_out, "n_out");
  c.feature_dims();
  require_positive(c.cnn_fc1, "cnn_fc1");
  require_positive(c.cnn_fc2, "cnn_fc2");
  require_positive(c.hidden_units, "hidden_units");
  require_positive(c.lstm_fc1, "lstm_fc1");
  require_positive(c.lstm_fc2, "lstm_fc2");
  require_positive(c.batch_size, "batch_size");
  require_positive(c.epochs, "epochs");
  if (c.lstm_cells < 1 || c.lstm_cells > 4)
    config_error("lstm_cells must be in 1..4, got " + std::to_string(c.lstm_cells));
  if (!(c.lstm_dropout >= 0.0 && c.lstm_dropout < 1.0))
    config_error("lstm_dropout must be in [0,1)");
  if (!(c.flat_dropout >= 0.0 && c.flat_dropout < 1.0))
    config_error("flat_dropout must be in [0,1)");
  if (!(c.lr >= 0.0) || !std::isfinite(c.lr)) config_error("lr must be a finite non-negative number");
  if (!(c.beta1 > 0.0 && c.beta1 < 1.0)) config_error("beta1 must be in (0,1)");

  if (c.mode == ConfigMode::PaperSweep) {
    require_grid(c.batch_size, {50, 75, 100}, "batch_size");
    require_grid(c.epochs, {10, 20, 30, 40}, "epochs");
    require_grid(c.beta1, {0.8, 0.85, 0.9}, "beta1");
    require_grid(c.lstm_dropout, {0.25, 0.3, 0.35, 0.4}, "lstm_dropout");
    require_grid(c.hidden_units, {100, 125, 150, 175, 200}, "hidden_units");
    require_grid(c.cnn_fc1, {256, 512, 768, 1024}, "cnn_fc1");
    require_grid(c.cnn_fc2, {256, 512, 768, 1024}, "cnn_fc2");
    require_grid(c.lstm_fc1, {64, 128, 256, 512}, "lstm_fc1");
    require_grid(c.lstm_fc2, {64, 128, 256, 512}, "lstm_fc2");
    require_grid(c.flat_dropout, {0.05, 0.1, 0.15, 0.2, 0.25}, "flat_dropout");
  }
}

const std::vector<std::string>& model_config_keys() {
  static const std::vector<std::string> keys{
      "n_in",     "n_out",        "input",    "conv_stack", "cnn_fc1",      "cnn_fc2",
      "lstm_cells", "hidden_units", "lstm_fc1", "lstm_fc2",   "lstm_dropout", "flat_dropout",
      "batch_size", "epochs",       "lr",       "beta1",      "seed",         "mode"};
  return keys;
}

json config_to_json(const ModelConfig& c) {
  json stack = json::array();
  for (const auto& s : c.conv_stack)
    stack.push_back({{"filters", s.filters}, {"kernel", s.kernel}, {"stride", s.stride}});
  return {{"n_in", c.n_in},
          {"n_out", c.n_out},
          {"input", {{"channels", c.channels}, {"height", c.height}, {"width", c.width}}},
          {"conv_stack", stack},
          {"cnn_fc1", c.cnn_fc1},
          {"cnn_fc2", c.cnn_fc2},
          {"lstm_cells", c.lstm_cells},
          {"hidden_units", c.hidden_units},
          {"lstm_fc1", c.lstm_fc1},
          {"lstm_fc2", c.lstm_fc2},
          {"lstm_dropout", c.lstm_dropout},
          {"flat_dropout", c.flat_dropout},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"lr", c.lr},
          {"beta1", c.beta1},
          {"seed", c.seed},
          {"mode", c.mode == ConfigMode::PaperSweep ? "paper-sweep" : "free"}};
}

namespace {

template <typename V>
void read_field(const json& j, const char* key, V& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if constexpr (std::is_floating_point_v<V>) {
    if (!v.is_number()) config_error(std::string("field '") + key + "' must be a number");
  } else {
    if (!v.is_number_integer())
      config_error(std::string("field '") + key + "' must be an integer");
    if constexpr (std::is_unsigned_v<V>) {
      if (v.is_number_unsigned() == false && v.get<std::int64_t>() < 0)
        config_error(std::string("field '") + key + "' must be non-negative");
    }
  }
  out = v.get<V>();
}

void reject_unknown(const json& obj, const std::set<std::string>& keys, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!keys.count(it.key())) config_error("unknown key '" + it.key() + "' in " + where);
}

}  // namespace

ModelConfig config_from_json(const json& j, const std::vector<std::string>& extra_keys) {
  if (!j.is_object()) config_error("expected an object");
  std::set<std::string> allowed(model_config_keys().begin(), model_config_keys().end());
  allowed.insert(extra_keys.begin(), extra_keys.end());
  reject_unknown(j, allowed, "config");

  ModelConfig c;
  read_field(j, "n_in", c.n_in);
  read_field(j, "n_out", c.n_out);
  if (j.contains("input")) {
    const json& in = j["input"];
    if (!in.is_object()) config_error("input must be an object");
    reject_unknown(in, {"channels", "height", "width"}, "input");
    read_field(in, "channels", c.channels);
    read_field(in, "height", c.height);
    read_field(in, "width", c.width);
  }
  if (j.contains("conv_stack")) {
    const json& st = j["conv_stack"];
    if (!st.is_array()) config_error("conv_stack must be an array");
    c.conv_stack.clear();
    for (const json& e : st) {
      if (!e.is_object()) config_error("conv_stack entries must be objects");
      reject_unknown(e, {"filters", "kernel", "stride"}, "conv_stack entry");
      ConvSpec s{0, 0, 1};
      read_field(e, "filters", s.filters);
      read_field(e, "kernel", s.kernel);
      read_field(e, "stride", s.stride);
      c.conv_stack.push_back(s);
    }
  }
  read_field(j, "cnn_fc1", c.cnn_fc1);
  read_field(j, "cnn_fc2", c.cnn_fc2);
  read_field(j, "lstm_cells", c.lstm_cells);
  read_field(j, "hidden_units", c.hidden_units);
  read_field(j, "lstm_fc1", c.lstm_fc1);
  read_field(j, "lstm_fc2", c.lstm_fc2);
  read_field(j, "lstm_dropout", c.lstm_dropout);
  read_field(j, "flat_dropout", c.flat_dropout);
  read_field(j, "batch_size", c.batch_size);
  read_field(j, "epochs", c.epochs);
  read_field(j, "lr", c.lr);
  read_field(j, "beta1", c.beta1);
  read_field(j, "seed", c.seed);
  if (j.contains("mode")) {
    const json& m = j["mode"];
    if (m == "free")
      c.mode = ConfigMode::Free;
    else if (m == "paper-sweep")
      c.mode = ConfigMode::PaperSweep;
    else
      config_error("mode must be \"free\" or \"paper-sweep\", got " + m.dump());
  }
  validate(c);
  return c;
}

std::string config_dump(const ModelConfig& c) { return config_to_json(c).dump(); }

ModelConfig toy_config() {
  ModelConfig c;
  c.n_in = 3;
  c.n_out = 2;
  c.channels = 4;
  c.height = 15;
  c.width = 20;
  c.conv_stack = {{4, 3, 2}, {4, 4, 1}};
  c.cnn_fc1 = 6;
  c.cnn_fc2 = 5;
  c.lstm_cells = 2;
  c.hidden_units = 4;
  c.lstm_fc1 = 5;
  c.lstm_fc2 = 4;
  c.lstm_dropout = 0.25;
  c.flat_dropout = 0.2;
  c.batch_size = 2;
  c.epochs = 1;
  return c;
}

}  // namespace trajlab::model
