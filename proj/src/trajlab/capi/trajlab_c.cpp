#include "trajlab/trajlab.h"

#include <chrono>
#include <cstring>
#include <new>
#include <set>
#include <string>

#include <json.hpp>

#include "trajlab/data/dataset.hpp"
#include "trajlab/data/ppm.hpp"
#include "trajlab/error.hpp"
#include "trajlab/eval/metrics.hpp"
#include "trajlab/model/checkpoint.hpp"
#include "trajlab/model/model_gradcheck.hpp"
#include "trajlab/model/train.hpp"
#include "trajlab/nn/gradcheck.hpp"

using nlohmann::json;
using namespace trajlab;

struct trajlab_config {
  model::ModelConfig model;
  json run = json::object();
};

struct trajlab_model {
  model::ModelConfig config;
  model::Params params;
};

namespace {

thread_local std::string g_last_error;

const std::vector<std::string>& run_keys() {
  static const std::vector<std::string> k{"data",  "out",        "level", "episodes",
                                          "frames_per_episode", "width", "height",
                                          "jobs",  "split_seed", "cells"};
  return k;
}

trajlab_status status_of(ErrorKind k) {
  switch (k) {
    case ErrorKind::Shape: return TRAJLAB_ERR_SHAPE;
    case ErrorKind::Parameter: return TRAJLAB_ERR_PARAMETER;
    case ErrorKind::Numeric: return TRAJLAB_ERR_NUMERIC;
    case ErrorKind::Format: return TRAJLAB_ERR_FORMAT;
    case ErrorKind::Io: return TRAJLAB_ERR_IO;
    case ErrorKind::Config: return TRAJLAB_ERR_CONFIG;
    case ErrorKind::Checkpoint: return TRAJLAB_ERR_CHECKPOINT;
  }
  return TRAJLAB_ERR_INTERNAL;
}

template <typename F>
trajlab_status guard(F&& f) {
  try {
    g_last_error.clear();
    f();
    return TRAJLAB_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const json::exception& e) {
    g_last_error = e.what();
    return TRAJLAB_ERR_FORMAT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return TRAJLAB_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TRAJLAB_ERR_INTERNAL;
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void put(char** out, const std::string& s) {
  if (out) *out = dup(s);
}

void need(const void* p, const char* what) {
  if (!p) fail(ErrorKind::Parameter, std::string(what) + " is null");
}

bool is_run_key(const std::string& k) {
  for (const auto& r : run_keys())
    if (r == k) return true;
  return false;
}

trajlab_config* config_from(const json& j) {
  if (!j.is_object()) fail(ErrorKind::Config, "configuration must be a JSON object");
  auto cfg = std::make_unique<trajlab_config>();
  cfg->model = model::config_from_json(j, run_keys());
  for (const auto& k : run_keys())
    if (j.contains(k)) cfg->run[k] = j.at(k);
  return cfg.release();
}

json parse_json(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Config, where + ": " + e.what());
  }
}

}  // namespace

extern "C" {

const char* trajlab_version(void) { return "0.1.0"; }

const char* trajlab_last_error(void) { return g_last_error.c_str(); }

const char* trajlab_status_name(trajlab_status s) {
  switch (s) {
    case TRAJLAB_OK: return "ok";
    case TRAJLAB_ERR_SHAPE: return "shape";
    case TRAJLAB_ERR_PARAMETER: return "parameter";
    case TRAJLAB_ERR_NUMERIC: return "numeric";
    case TRAJLAB_ERR_FORMAT: return "format";
    case TRAJLAB_ERR_IO: return "io";
    case TRAJLAB_ERR_CONFIG: return "config";
    case TRAJLAB_ERR_CHECKPOINT: return "checkpoint";
    case TRAJLAB_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

int trajlab_exit_code(trajlab_status s) {
  switch (s) {
    case TRAJLAB_OK: return 0;
    case TRAJLAB_ERR_PARAMETER:
    case TRAJLAB_ERR_CONFIG: return 2;
    case TRAJLAB_ERR_FORMAT:
    case TRAJLAB_ERR_IO:
    case TRAJLAB_ERR_CHECKPOINT: return 3;
    case TRAJLAB_ERR_NUMERIC:
    case TRAJLAB_ERR_SHAPE: return 4;
    case TRAJLAB_ERR_INTERNAL: return 1;
  }
  return 1;
}

void trajlab_string_free(char* s) { std::free(s); }

trajlab_status trajlab_config_new(trajlab_config** out) {
  return guard([&] {
    need(out, "out");
    *out = new trajlab_config();
  });
}

trajlab_status trajlab_config_parse(const char* json_text, trajlab_config** out) {
  return guard([&] {
    need(json_text, "json_text");
    need(out, "out");
    *out = config_from(parse_json(json_text, "configuration"));
  });
}

trajlab_status trajlab_config_load(const char* path, trajlab_config** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    const auto bytes = data::read_file_bytes(path);
    *out = config_from(parse_json(std::string(bytes.begin(), bytes.end()), path));
  });
}

trajlab_status trajlab_config_set(trajlab_config* cfg, const char* key, const char* value_json) {
  return guard([&] {
    need(cfg, "cfg");
    need(key, "key");
    need(value_json, "value_json");
    const json v = parse_json(value_json, std::string("value for ") + key);
    if (is_run_key(key)) {
      cfg->run[key] = v;
      return;
    }
    json j = model::config_to_json(cfg->model);
    if (!j.contains(key)) fail(ErrorKind::Config, std::string("unknown configuration key: ") + key);
    j[key] = v;
    cfg->model = model::config_from_json(j);
  });
}

trajlab_status trajlab_config_get(const trajlab_config* cfg, const char* key, char** value_json) {
  return guard([&] {
    need(cfg, "cfg");
    need(key, "key");
    need(value_json, "value_json");
    if (is_run_key(key)) {
      put(value_json, cfg->run.contains(key) ? cfg->run.at(key).dump() : "null");
      return;
    }
    const json j = model::config_to_json(cfg->model);
    if (!j.contains(key)) fail(ErrorKind::Config, std::string("unknown configuration key: ") + key);
    put(value_json, j.at(key).dump());
  });
}

trajlab_status trajlab_config_to_json(const trajlab_config* cfg, char** json_text) {
  return guard([&] {
    need(cfg, "cfg");
    need(json_text, "json_text");
    json j = model::config_to_json(cfg->model);
    for (auto it = cfg->run.begin(); it != cfg->run.end(); ++it) j[it.key()] = it.value();
    put(json_text, j.dump(2));
  });
}

const char* trajlab_config_run_keys(void) {
  static const std::string s = [] {
    std::string r;
    for (const auto& k : run_keys()) r += (r.empty() ? "" : ",") + k;
    return r;
  }();
  return s.c_str();
}

void trajlab_config_free(trajlab_config* cfg) { delete cfg; }

trajlab_status trajlab_generate(int level, int episodes, int64_t frames_per_episode, uint64_t seed,
                                int width, int height, const char* out_dir, int jobs,
                                char** manifest_json) {
  return guard([&] {
    need(out_dir, "out_dir");
    data::GenerateOptions o;
    o.level = level;
    o.n_episodes = episodes;
    o.frames_per_episode = frames_per_episode;
    o.seed = seed;
    o.camera.width_px = width;
    o.camera.height_px = height;
    o.out_dir = out_dir;
    o.jobs = jobs;
    put(manifest_json, data::manifest_to_json(data::generate_dataset(o)));
  });
}

trajlab_status trajlab_split(const char* data_dir, uint64_t seed, double train, double val,
                             double test, char** manifest_json) {
  return guard([&] {
    need(data_dir, "data_dir");
    auto m = data::split_dataset(data::load_manifest(data_dir), {train, val, test}, seed);
    data::save_manifest(data_dir, m);
    put(manifest_json, data::manifest_to_json(m));
  });
}

trajlab_status trajlab_train(const char* data_dir, const trajlab_config* cfg, int jobs,
                             trajlab_epoch_fn on_epoch, void* user, trajlab_model** out,
                             char** history_json) {
  return guard([&] {
    need(data_dir, "data_dir");
    need(cfg, "cfg");
    need(out, "out");
    model::EpochCallback cb;
    if (on_epoch)
      cb = [&](const model::EpochStats& e) { on_epoch(e.epoch, e.train_mse, e.val_mse, e.wall_s, user); };
    auto r = model::train_loop(data_dir, cfg->model, jobs, cb);
    auto m = std::make_unique<trajlab_model>();
    m->config = cfg->model;
    m->params = std::move(r.params);
    put(history_json, model::history_to_json(r.history).dump(2));
    *out = m.release();
  });
}

trajlab_status trajlab_model_load(const char* path, trajlab_model** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    auto ck = model::load_checkpoint(path);
    *out = new trajlab_model{std::move(ck.config), std::move(ck.params)};
  });
}

trajlab_status trajlab_model_save(const trajlab_model* m, const char* path) {
  return guard([&] {
    need(m, "model");
    need(path, "path");
    model::save_checkpoint(path, m->config, m->params);
  });
}

trajlab_status trajlab_model_config_json(const trajlab_model* m, char** json_text) {
  return guard([&] {
    need(m, "model");
    need(json_text, "json_text");
    put(json_text, model::config_to_json(m->config).dump(2));
  });
}

void trajlab_model_free(trajlab_model* m) { delete m; }

trajlab_status trajlab_evaluate(const trajlab_model* m, const char* data_dir, const char* split,
                                int jobs, const char* report_path, char** table_text) {
  return guard([&] {
    need(m, "model");
    need(data_dir, "data_dir");
    need(report_path, "report_path");
    const std::string name = split ? split : "test";
    if (name != "train" && name != "val" && name != "test")
      fail(ErrorKind::Parameter, "split must be train, val or test, got '" + name + "'");
    const auto s = data::parse_split(name);
    const auto r = eval::evaluate(m->params, m->config, data_dir, s, jobs);
    const auto base = eval::evaluate_stay_put(data_dir, m->config.n_in, m->config.n_out, s);
    json extra = {{"split", data::to_string(s)},
                  {"config", model::config_to_json(m->config)},
                  {"stay_put_baseline",
                   {{"armse", base.report.armse}, {"amape", base.report.amape}, {"aed", base.report.aed}}}};
    eval::write_eval_outputs(report_path, r, extra);
    put(table_text, eval::format_table({r.report, base.report},
                                       "Level " + std::to_string(r.report.tag.level) + " " +
                                           data::to_string(s) + " split"));
  });
}

trajlab_status trajlab_ablate(const char* data_dir, const trajlab_config* cfg, const int* cells,
                              size_t n_cells, int jobs, const char* out_dir, char** table_text) {
  return guard([&] {
    need(data_dir, "data_dir");
    need(cfg, "cfg");
    need(out_dir, "out_dir");
    if (!cells || n_cells == 0) fail(ErrorKind::Parameter, "no cell counts given");
    std::filesystem::create_directories(out_dir);
    const std::vector<int> cs(cells, cells + n_cells);
    const auto r = eval::ablation_run(data_dir, cfg->model, cs, jobs, out_dir);
    const std::filesystem::path dir(out_dir);
    data::write_file_atomic(dir / "ablation.json", r.to_json().dump(2) + "\n");
    data::write_file_atomic(dir / "ablation.txt", r.table);
    put(table_text, r.table);
  });
}

trajlab_status trajlab_predict(const trajlab_model* m, const char* data_dir, int episode,
                               int64_t frame, char** result_json) {
  return guard([&] {
    need(m, "model");
    need(data_dir, "data_dir");
    need(result_json, "result_json");
    const auto man = data::load_manifest(data_dir);
    const data::EpisodeEntry* entry = nullptr;
    for (const auto& e : man.episodes)
      if (e.id == episode) entry = &e;
    if (!entry) fail(ErrorKind::Parameter, "no episode " + std::to_string(episode) + " in dataset");
    const auto& c = m->config;
    if (frame < c.n_in - 1 || frame > entry->n_frames - c.n_out - 1)
      fail(ErrorKind::Parameter, "anchor frame " + std::to_string(frame) + " outside [" +
                                     std::to_string(c.n_in - 1) + ", " +
                                     std::to_string(entry->n_frames - c.n_out - 1) + "]");
    if (man.camera.width_px != c.width || man.camera.height_px != c.height)
      fail(ErrorKind::Config, "model input size does not match the dataset");
    const model::SampleBank bank({data::load_episode(data_dir, man, *entry)}, c);
    for (const auto& s : bank.samples()) {
      if (s.sequence.anchor().frame != frame) continue;
      const auto out = model::predict(m->params, c, s);
      const auto pair = eval::make_pair(
          s.sequence, std::vector<double>(out.values().begin(), out.values().end()));
      put(result_json, eval::trajectory_to_json(pair).dump());
      return;
    }
    fail(ErrorKind::Parameter, "no sequence anchored at frame " + std::to_string(frame));
  });
}

trajlab_status trajlab_gradcheck(int n_seeds, int include_model, char** report_json,
                                 int* all_pass) {
  return guard([&] {
    if (n_seeds < 1) fail(ErrorKind::Parameter, "n_seeds must be >= 1");
    const auto t0 = std::chrono::steady_clock::now();
    json kinds = json::array();
    bool ok = true;
    auto run = [&](const std::string& name, auto&& check) {
      double worst64 = 0.0, worst32 = 0.0;
      for (int s = 0; s < n_seeds; ++s) {
        worst64 = std::max(worst64, check(static_cast<std::uint64_t>(s), nn::Precision::F64));
        worst32 = std::max(worst32, check(static_cast<std::uint64_t>(s), nn::Precision::F32));
      }
      const bool pass = worst64 < 1e-6 && worst32 < 1e-3;
      ok = ok && pass;
      kinds.push_back({{"kind", name}, {"max_rel_f64", worst64}, {"max_rel_f32", worst32}, {"pass", pass}});
    };
    for (auto k : nn::all_layer_kinds())
      run(nn::layer_kind_name(k), [k](std::uint64_t s, nn::Precision p) {
        return nn::finite_difference_check(k, s, p);
      });
    if (include_model) run("toy_model", model::model_gradient_check);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    put(report_json, json{{"seeds", n_seeds},
                          {"tolerance", {{"f64", 1e-6}, {"f32", 1e-3}}},
                          {"kinds", kinds},
                          {"pass", ok},
                          {"wall_s", wall}}
                         .dump(2));
    if (all_pass) *all_pass = ok ? 1 : 0;
  });
}

trajlab_status trajlab_plot(const char* report_path, const char* out_path) {
  return guard([&] {
    need(report_path, "report_path");
    need(out_path, "out_path");
    std::filesystem::path src(report_path);
    if (src.extension() != ".jsonl") {
      const auto bytes = data::read_file_bytes(src);
      json j;
      try {
        j = json::parse(bytes.begin(), bytes.end());
      } catch (const json::parse_error& e) {
        fail(ErrorKind::Format, src.string() + ": " + e.what());
      }
      if (!j.is_object() || !j.contains("trajectories") || !j["trajectories"].is_string())
        fail(ErrorKind::Format, src.string() + ": not an evaluation report");
      src = src.parent_path() / j["trajectories"].get<std::string>();
    }
    data::write_file_atomic(out_path, eval::plot_columns(eval::read_trajectories(src)));
  });
}

}  // extern "C"
