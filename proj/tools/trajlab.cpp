// trajlab command-line front end. Talks to the library only through the C API.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "trajlab/trajlab.h"

namespace {

using nlohmann::json;

struct Failure {
  int code;
  std::string message;
};

void check(trajlab_status s) {
  if (s != TRAJLAB_OK)
    throw Failure{trajlab_exit_code(s),
                  std::string(trajlab_status_name(s)) + ": " + trajlab_last_error()};
}

[[noreturn]] void usage(const std::string& msg) { throw Failure{2, "usage: " + msg}; }

struct Str {
  char* p = nullptr;
  ~Str() { trajlab_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct Config {
  trajlab_config* p = nullptr;
  json file = json::object();  // raw file contents, for presence checks
  ~Config() { trajlab_config_free(p); }

  bool has(const std::string& key) const { return file.contains(key) && !file[key].is_null(); }
  void set(const std::string& key, const json& v) {
    check(trajlab_config_set(p, key.c_str(), v.dump().c_str()));
    file[key] = v;
  }
  template <typename T>
  T get(const std::string& key) const {
    Str s;
    check(trajlab_config_get(p, key.c_str(), &s.p));
    return json::parse(s.str()).get<T>();
  }
};

std::unique_ptr<Config> load_config(const std::string& path) {
  auto c = std::make_unique<Config>();
  if (path.empty()) {
    check(trajlab_config_new(&c->p));
    return c;
  }
  check(trajlab_config_load(path.c_str(), &c->p));
  std::ifstream in(path);
  c->file = json::parse(in, nullptr, false);
  return c;
}

// Flag beats config file beats built-in default.
template <typename T>
void merge(const CLI::Option* flag, T& value, const Config& cfg, const std::string& key) {
  if (flag->count() == 0 && cfg.has(key)) value = cfg.get<T>(key);
}

std::uint64_t resolve_seed(const CLI::Option* flag, std::uint64_t value, const Config& cfg) {
  if (flag->count() > 0) return value;
  if (cfg.has("seed")) return cfg.get<std::uint64_t>("seed");
  if (const char* env = std::getenv("TRAJLAB_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    usage(std::string("TRAJLAB_SEED is not an unsigned integer: ") + env);
  }
  return value;
}

std::vector<int> parse_cells(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      usage("--cells expects comma-separated integers, got '" + text + "'");
    }
  }
  if (out.empty()) usage("--cells is empty");
  return out;
}

std::string require(const CLI::Option* flag, const std::string& value, const Config& cfg,
                    const std::string& key) {
  std::string v = value;
  merge(flag, v, cfg, key);
  if (v.empty()) usage(flag->get_name() + " is required (or set \"" + key + "\" in the config)");
  return v;
}

void print_epoch(int epoch, double train_mse, double val_mse, double wall_s, void* user) {
  const int total = *static_cast<int*>(user);
  std::printf("epoch %d/%d  train_mse %.6f  val_mse %.6f  (%.1f s)\n", epoch, total, train_mse,
              val_mse, wall_s);
  std::fflush(stdout);
}

void write_text(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << text;
    if (!out) throw Failure{3, "io: cannot write " + path};
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Failure{3, "io: cannot write " + path};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trajlab: synthetic driving data, CNN-LSTM trajectory prediction and evaluation"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", trajlab_version());

  const std::string seed_help = "random seed (falls back to the config, then TRAJLAB_SEED)";
  const std::string run_keys = trajlab_config_run_keys();

  // generate
  auto* gen = app.add_subcommand("generate", "simulate episodes and render a dataset");
  int g_level = 1, g_episodes = 10, g_width = 80, g_height = 60, g_jobs = 1;
  std::int64_t g_frames = 100;
  std::uint64_t g_seed = 0;
  std::string g_out, g_config;
  auto* g_level_o = gen->add_option("--level", g_level, "difficulty level (1 or 2)");
  auto* g_eps_o = gen->add_option("--episodes", g_episodes, "number of episodes");
  auto* g_frames_o = gen->add_option("--frames-per-episode", g_frames, "frames per episode");
  auto* g_seed_o = gen->add_option("--seed", g_seed, seed_help);
  auto* g_w_o = gen->add_option("--width", g_width, "image width in pixels");
  auto* g_h_o = gen->add_option("--height", g_height, "image height in pixels");
  auto* g_out_o = gen->add_option("--out", g_out, "output dataset directory");
  auto* g_jobs_o = gen->add_option("--jobs", g_jobs, "worker threads")->check(CLI::PositiveNumber);
  gen->add_option("--config", g_config, "run config file (JSON)");

  // split
  auto* spl = app.add_subcommand("split", "reassign episodes to train/val/test");
  std::string s_data, s_ratios = "0.6,0.2,0.2";
  std::uint64_t s_seed = 0;
  spl->add_option("--data", s_data, "dataset directory")->required();
  auto* s_seed_o = spl->add_option("--seed", s_seed, seed_help);
  spl->add_option("--ratios", s_ratios, "train,val,test fractions");

  // train
  auto* trn = app.add_subcommand("train", "train a model on the train split");
  std::string t_data, t_config, t_out;
  std::uint64_t t_seed = 0;
  int t_jobs = 1, t_epochs = 20;
  auto* t_data_o = trn->add_option("--data", t_data, "dataset directory");
  trn->add_option("--config", t_config, "run config file (JSON); model keys plus " + run_keys);
  trn->add_option("--out", t_out, "checkpoint path")->required();
  auto* t_seed_o = trn->add_option("--seed", t_seed, seed_help);
  auto* t_epochs_o = trn->add_option("--epochs", t_epochs, "training epochs");
  auto* t_jobs_o = trn->add_option("--jobs", t_jobs, "worker threads")->check(CLI::PositiveNumber);

  // eval
  auto* evl = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  std::string e_model, e_data, e_report, e_split = "test";
  int e_jobs = 1;
  evl->add_option("--model", e_model, "checkpoint path")->required();
  evl->add_option("--data", e_data, "dataset directory")->required();
  evl->add_option("--report", e_report, "report path (JSON); table and trajectories are written next to it")
      ->required();
  evl->add_option("--split", e_split, "split to evaluate")
      ->check(CLI::IsMember({"train", "val", "test"}));
  evl->add_option("--jobs", e_jobs, "worker threads")->check(CLI::PositiveNumber);

  // ablate
  auto* abl = app.add_subcommand("ablate", "train and evaluate one model per LSTM depth");
  std::string a_data, a_config, a_cells = "1,2,3,4", a_out;
  std::uint64_t a_seed = 0;
  int a_jobs = 1, a_epochs = 20;
  auto* a_data_o = abl->add_option("--data", a_data, "dataset directory");
  abl->add_option("--config", a_config, "run config file (JSON); model keys plus " + run_keys);
  auto* a_cells_o = abl->add_option("--cells", a_cells, "comma-separated LSTM layer counts");
  auto* a_out_o = abl->add_option("--out", a_out, "output directory");
  auto* a_seed_o = abl->add_option("--seed", a_seed, seed_help);
  auto* a_epochs_o = abl->add_option("--epochs", a_epochs, "training epochs per variant");
  auto* a_jobs_o = abl->add_option("--jobs", a_jobs, "worker threads")->check(CLI::PositiveNumber);

  // predict
  auto* prd = app.add_subcommand("predict", "predict one trajectory from a dataset episode");
  std::string p_model, p_data, p_out;
  int p_episode = 0;
  std::int64_t p_frame = 4;
  prd->add_option("--model", p_model, "checkpoint path")->required();
  prd->add_option("--data", p_data, "dataset directory holding the episode")->required();
  prd->add_option("--episode", p_episode, "episode id")->required();
  prd->add_option("--frame", p_frame, "anchor frame (last input frame)")->required();
  prd->add_option("--out", p_out, "output text file")->required();

  // gradcheck
  auto* gck = app.add_subcommand("gradcheck", "finite-difference check of every layer and the toy model");
  int c_seeds = 20;
  bool c_skip_model = false;
  gck->add_option("--seeds", c_seeds, "seeds per layer kind")->check(CLI::PositiveNumber);
  gck->add_flag("--skip-model", c_skip_model, "skip the end-to-end toy model check");

  // plot
  auto* plt = app.add_subcommand("plot", "export ground truth vs prediction as columnar text");
  std::string l_report, l_out;
  plt->add_option("--report", l_report, "evaluation report (or its .trajectories.jsonl)")->required();
  plt->add_option("--out", l_out, "output text file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "ERROR 2: usage: %s\n", e.what());
    return 2;
  }

  try {
    if (gen->parsed()) {
      auto cfg = load_config(g_config);
      merge(g_level_o, g_level, *cfg, "level");
      merge(g_eps_o, g_episodes, *cfg, "episodes");
      merge(g_frames_o, g_frames, *cfg, "frames_per_episode");
      merge(g_w_o, g_width, *cfg, "width");
      merge(g_h_o, g_height, *cfg, "height");
      merge(g_jobs_o, g_jobs, *cfg, "jobs");
      const std::string out = require(g_out_o, g_out, *cfg, "out");
      const auto seed = resolve_seed(g_seed_o, g_seed, *cfg);
      Str manifest;
      check(trajlab_generate(g_level, g_episodes, g_frames, seed, g_width, g_height, out.c_str(),
                             g_jobs, &manifest.p));
      const auto m = json::parse(manifest.str());
      std::printf("generated %lld frames in %d episodes under %s\n",
                  static_cast<long long>(m["totals"]["frames"].get<std::int64_t>()), g_episodes,
                  out.c_str());
    } else if (spl->parsed()) {
      double r[3] = {0, 0, 0};
      std::stringstream ss(s_ratios);
      std::string item;
      int n = 0;
      while (std::getline(ss, item, ',')) {
        if (n == 3) usage("--ratios needs three values");
        try {
          r[n++] = std::stod(item);
        } catch (const std::exception&) {
          usage("--ratios expects numbers, got '" + s_ratios + "'");
        }
      }
      if (n != 3) usage("--ratios needs three values");
      Config none;
      check(trajlab_config_new(&none.p));
      const auto seed = resolve_seed(s_seed_o, s_seed, none);
      Str manifest;
      check(trajlab_split(s_data.c_str(), seed, r[0], r[1], r[2], &manifest.p));
      const auto m = json::parse(manifest.str());
      int counts[3] = {0, 0, 0};
      for (const auto& e : m["episodes"]) {
        const auto s = e["split"].get<std::string>();
        ++counts[s == "train" ? 0 : s == "val" ? 1 : 2];
      }
      std::printf("split: %d train, %d val, %d test episodes\n", counts[0], counts[1], counts[2]);
    } else if (trn->parsed()) {
      auto cfg = load_config(t_config);
      const std::string data = require(t_data_o, t_data, *cfg, "data");
      merge(t_jobs_o, t_jobs, *cfg, "jobs");
      cfg->set("seed", resolve_seed(t_seed_o, t_seed, *cfg));
      if (t_epochs_o->count() > 0) cfg->set("epochs", t_epochs);
      int epochs = cfg->get<int>("epochs");
      trajlab_model* raw = nullptr;
      Str history;
      check(trajlab_train(data.c_str(), cfg->p, t_jobs, print_epoch, &epochs, &raw, &history.p));
      std::unique_ptr<trajlab_model, void (*)(trajlab_model*)> model(raw, trajlab_model_free);
      check(trajlab_model_save(model.get(), t_out.c_str()));
      write_text(t_out + ".history.json", history.str() + "\n");
      const auto h = json::parse(history.str());
      std::printf("best epoch %d (val_mse %.6f); saved %s\n", h["best_epoch"].get<int>(),
                  h["best_val_mse"].get<double>(), t_out.c_str());
    } else if (evl->parsed()) {
      trajlab_model* raw = nullptr;
      check(trajlab_model_load(e_model.c_str(), &raw));
      std::unique_ptr<trajlab_model, void (*)(trajlab_model*)> model(raw, trajlab_model_free);
      Str table;
      check(trajlab_evaluate(model.get(), e_data.c_str(), e_split.c_str(), e_jobs,
                             e_report.c_str(), &table.p));
      std::fputs(table.str().c_str(), stdout);
    } else if (abl->parsed()) {
      auto cfg = load_config(a_config);
      const std::string data = require(a_data_o, a_data, *cfg, "data");
      const std::string out = require(a_out_o, a_out, *cfg, "out");
      merge(a_jobs_o, a_jobs, *cfg, "jobs");
      std::vector<int> cells;
      if (a_cells_o->count() == 0 && cfg->has("cells"))
        cells = cfg->get<std::vector<int>>("cells");
      else
        cells = parse_cells(a_cells);
      cfg->set("seed", resolve_seed(a_seed_o, a_seed, *cfg));
      if (a_epochs_o->count() > 0) cfg->set("epochs", a_epochs);
      Str table;
      check(trajlab_ablate(data.c_str(), cfg->p, cells.data(), cells.size(), a_jobs, out.c_str(),
                           &table.p));
      std::fputs(table.str().c_str(), stdout);
    } else if (prd->parsed()) {
      trajlab_model* raw = nullptr;
      check(trajlab_model_load(p_model.c_str(), &raw));
      std::unique_ptr<trajlab_model, void (*)(trajlab_model*)> model(raw, trajlab_model_free);
      Str result;
      check(trajlab_predict(model.get(), p_data.c_str(), p_episode, p_frame, &result.p));
      const auto r = json::parse(result.str());
      std::ostringstream os;
      char buf[160];
      std::snprintf(buf, sizeof buf, "# episode %d anchor_frame %lld anchor_x %.6f anchor_y %.6f anchor_yaw %.6f\n",
                    r["episode"].get<int>(), static_cast<long long>(r["anchor_frame"].get<std::int64_t>()),
                    r["anchor"]["x"].get<double>(), r["anchor"]["y"].get<double>(),
                    r["anchor"]["yaw"].get<double>());
      os << buf << "# step pred_x pred_y gt_x gt_y\n";
      for (std::size_t k = 0; k < r["pred"].size(); ++k) {
        std::snprintf(buf, sizeof buf, "%zu %.6f %.6f %.6f %.6f\n", k + 1,
                      r["pred"][k][0].get<double>(), r["pred"][k][1].get<double>(),
                      r["gt"][k][0].get<double>(), r["gt"][k][1].get<double>());
        os << buf;
      }
      write_text(p_out, os.str());
      std::fputs(os.str().c_str(), stdout);
    } else if (gck->parsed()) {
      Str report;
      int pass = 0;
      check(trajlab_gradcheck(c_seeds, c_skip_model ? 0 : 1, &report.p, &pass));
      const auto r = json::parse(report.str());
      std::printf("%-14s %-13s %-13s %s\n", "kind", "max_rel_f64", "max_rel_f32", "status");
      for (const auto& k : r["kinds"])
        std::printf("%-14s %-13.3e %-13.3e %s\n", k["kind"].get<std::string>().c_str(),
                    k["max_rel_f64"].get<double>(), k["max_rel_f32"].get<double>(),
                    k["pass"].get<bool>() ? "ok" : "FAIL");
      std::printf("%d seeds per kind, tolerance 1e-6 (f64) / 1e-3 (f32), %.1f s\n", c_seeds,
                  r["wall_s"].get<double>());
      if (!pass) throw Failure{4, "numeric: gradient check exceeded tolerance"};
    } else if (plt->parsed()) {
      check(trajlab_plot(l_report.c_str(), l_out.c_str()));
      std::printf("wrote %s\n", l_out.c_str());
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "ERROR %d: %s\n", f.code, f.message.c_str());
    return f.code;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "ERROR 3: format: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "ERROR 1: internal: %s\n", e.what());
    return 1;
  }
  return 0;
}
