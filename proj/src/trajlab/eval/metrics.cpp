#include "trajlab/eval/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "trajlab/data/ppm.hpp"
#include "trajlab/error.hpp"
#include "trajlab/model/checkpoint.hpp"
#include "trajlab/model/train.hpp"

namespace trajlab::eval {

using nlohmann::json;

SequenceMetrics sequence_metrics(const std::vector<sim::Vec2>& pred,
                                 const std::vector<sim::Vec2>& gt) {
  if (pred.size() != gt.size())
    fail(ErrorKind::Shape, "sequence_metrics: " + std::to_string(pred.size()) +
                               " predicted points vs " + std::to_string(gt.size()) + " ground truth");
  if (pred.empty()) fail(ErrorKind::Shape, "sequence_metrics: empty horizon");
  const auto n = static_cast<double>(pred.size());
  double sum_d = 0.0, sum_d2 = 0.0, sum_pct = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double dx = pred[i].x - gt[i].x, dy = pred[i].y - gt[i].y;
    const double d2 = dx * dx + dy * dy;
    sum_d += std::sqrt(d2);
    sum_d2 += d2;
    sum_pct += std::abs(dx) / std::max(std::abs(gt[i].x), kMapeEpsilon);
    sum_pct += std::abs(dy) / std::max(std::abs(gt[i].y), kMapeEpsilon);
  }
  return {std::sqrt(sum_d2 / n), sum_pct / (2.0 * n), sum_d / n};
}

double distance_feedback(const std::vector<sim::Pose2D>& poses, const sim::Pose2D& dest) {
  if (poses.empty()) fail(ErrorKind::Parameter, "distance_feedback: empty pose list");
  double s = 0.0;
  for (const auto& p : poses) {
    const double dx = p.x - dest.x, dy = p.y - dest.y;
    s += dx * dx + dy * dy;
  }
  return s;
}

namespace {

double plain_sum(const std::vector<double>& v, const char* what) {
  if (v.empty()) fail(ErrorKind::Parameter, std::string(what) + ": empty list");
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

double lateral_velocity(const std::vector<double>& omegas) {
  return plain_sum(omegas, "lateral_velocity");
}

double longitudinal_velocity(const std::vector<double>& v_fs) {
  return plain_sum(v_fs, "longitudinal_velocity");
}

MetricsReport aggregate(const std::vector<SequenceMetrics>& seqs, const ReportTag& tag) {
  if (seqs.empty()) fail(ErrorKind::Parameter, "aggregate: no sequences");
  MetricsReport r;
  r.tag = tag;
  r.per_sequence = seqs;
  for (const auto& s : seqs) {
    r.armse += s.rmse;
    r.amape += s.mape;
    r.aed += s.ed;
  }
  const auto n = static_cast<double>(seqs.size());
  r.armse /= n;
  r.amape /= n;
  r.aed /= n;
  return r;
}

std::string variant_label(int lstm_cells) {
  static const char* kLabels[] = {"α", "β", "γ", "δ"};
  if (lstm_cells < 1 || lstm_cells > 4) return "cells=" + std::to_string(lstm_cells);
  return kLabels[lstm_cells - 1];
}

const std::vector<ReferenceRow>& reference_rows(int level) {
  static const std::vector<ReferenceRow> kLevel1{{"α", 0.0046, 0.0056, 0.0050},
                                                 {"β", 0.0034, 0.0043, 0.0039},
                                                 {"γ", 0.0028, 0.0038, 0.0032},
                                                 {"δ", 0.0024, 0.0033, 0.0028}};
  static const std::vector<ReferenceRow> kLevel2{{"α", 0.0126, 0.0172, 0.0154},
                                                 {"β", 0.0097, 0.0133, 0.0127},
                                                 {"γ", 0.0082, 0.0119, 0.0107},
                                                 {"δ", 0.0065, 0.0107, 0.0079}};
  static const std::vector<ReferenceRow> kNone;
  return level == 1 ? kLevel1 : level == 2 ? kLevel2 : kNone;
}

namespace {

// Pads by code points so Greek labels line up.
std::string pad(const std::string& s, std::size_t width) {
  std::size_t cps = 0;
  for (unsigned char ch : s)
    if ((ch & 0xC0) != 0x80) ++cps;
  return s + std::string(width > cps ? width - cps : 0, ' ');
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string table_header() {
  return pad("variant", 9) + pad("cells", 7) + pad("ARMSE (m)", 12) + pad("AMAPE (frac)", 14) +
         "AED (m)\n";
}

}  // namespace

std::string format_table(const std::vector<MetricsReport>& rows, const std::string& title) {
  std::string out = title + "\n" + table_header();
  for (const auto& r : rows)
    out += pad(r.tag.label.empty() ? "-" : r.tag.label, 9) +
           pad(r.tag.lstm_cells > 0 ? std::to_string(r.tag.lstm_cells) : "-", 7) +
           pad(num(r.armse), 12) + pad(num(r.amape), 14) + num(r.aed) + "\n";
  return out;
}

std::string format_reference_table(int level) {
  const auto& rows = reference_rows(level);
  if (rows.empty()) return {};
  std::string out = "Reference values, level " + std::to_string(level) +
                    " (original CARLA-based study, display only)\n" + table_header();
  int cells = 1;
  for (const auto& r : rows)
    out += pad(r.label, 9) + pad(std::to_string(cells++), 7) + pad(num(r.armse), 12) +
           pad(num(r.amape), 14) + num(r.aed) + "\n";
  return out;
}

json trajectory_to_json(const TrajectoryPair& t) {
  auto pts = [](const std::vector<sim::Vec2>& v) {
    json a = json::array();
    for (const auto& p : v) a.push_back({p.x, p.y});
    return a;
  };
  return {{"episode", t.episode_id},
          {"anchor_frame", t.anchor_frame},
          {"anchor", {{"x", t.anchor.x}, {"y", t.anchor.y}, {"yaw", t.anchor.yaw}}},
          {"gt", pts(t.gt)},
          {"pred", pts(t.pred)},
          {"rmse", t.metrics.rmse},
          {"mape", t.metrics.mape},
          {"ed", t.metrics.ed},
          {"v_lat", t.v_lat},
          {"v_long", t.v_long},
          {"d1_pred", t.d1_pred}};
}

TrajectoryPair trajectory_from_json(const json& j) {
  try {
    TrajectoryPair t;
    t.episode_id = j.at("episode").get<int>();
    t.anchor_frame = j.at("anchor_frame").get<std::int64_t>();
    const json& a = j.at("anchor");
    t.anchor = {a.at("x").get<double>(), a.at("y").get<double>(), a.at("yaw").get<double>()};
    for (const json& p : j.at("gt")) t.gt.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    for (const json& p : j.at("pred"))
      t.pred.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    t.metrics = {j.at("rmse").get<double>(), j.at("mape").get<double>(), j.at("ed").get<double>()};
    t.v_lat = j.at("v_lat").get<double>();
    t.v_long = j.at("v_long").get<double>();
    t.d1_pred = j.at("d1_pred").get<double>();
    if (t.gt.size() != t.pred.size()) fail(ErrorKind::Format, "gt/pred length mismatch");
    return t;
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("trajectory record: ") + e.what());
  }
}

TrajectoryPair make_pair(const data::SampleSequence& seq, const std::vector<double>& pred_label) {
  const data::Odometry& a = seq.anchor().odom;
  std::vector<double> metres(pred_label.size());
  for (std::size_t i = 0; i < metres.size(); ++i)
    metres[i] = pred_label[i] * data::SampleSequence::kNormScale;
  const auto world = data::label_to_world(a, metres);

  TrajectoryPair t;
  t.episode_id = seq.episode_id;
  t.anchor_frame = seq.anchor().frame;
  t.anchor = data::odometry_pose(a);
  std::vector<double> omegas, speeds;
  std::vector<sim::Pose2D> pred_poses;
  for (std::size_t i = 0; i < seq.future.size(); ++i) {
    const auto& f = seq.future[i];
    t.gt.push_back({f.odom.x, f.odom.y});
    t.pred.push_back({world[2 * i], world[2 * i + 1]});
    pred_poses.push_back({world[2 * i], world[2 * i + 1], 0.0});
    omegas.push_back(f.imu.wz);
    speeds.push_back(f.odom.speed);
  }
  t.metrics = sequence_metrics(t.pred, t.gt);
  t.v_lat = lateral_velocity(omegas);
  t.v_long = longitudinal_velocity(speeds);
  t.d1_pred = distance_feedback(pred_poses, {t.gt.back().x, t.gt.back().y, 0.0});
  return t;
}

namespace {

EvalResult finish(std::vector<TrajectoryPair> pairs, const ReportTag& tag) {
  if (pairs.empty()) fail(ErrorKind::Config, "evaluation split has no sequences");
  std::vector<SequenceMetrics> m;
  for (const auto& p : pairs) m.push_back(p.metrics);
  return {aggregate(m, tag), std::move(pairs)};
}

data::DatasetManifest checked_manifest(const std::filesystem::path& dir,
                                       const model::ModelConfig& c, data::Split split) {
  auto m = data::load_manifest(dir);
  if (m.camera.width_px != c.width || m.camera.height_px != c.height || c.channels != 3)
    fail(ErrorKind::Config, "model expects " + std::to_string(c.width) + "x" +
                                std::to_string(c.height) + "x" + std::to_string(c.channels) +
                                " frames but the dataset has " +
                                std::to_string(m.camera.width_px) + "x" +
                                std::to_string(m.camera.height_px) + " RGB");
  if (m.count(split) == 0)
    fail(ErrorKind::Config, std::string("dataset has an empty ") + data::to_string(split) + " split");
  return m;
}

}  // namespace

EvalResult evaluate(const model::Params& params, const model::ModelConfig& config,
                    const std::filesystem::path& dataset_dir, data::Split split, int jobs) {
  model::check_params(params, config);
  const auto m = checked_manifest(dataset_dir, config, split);
  const model::SampleBank bank(data::load_split(dataset_dir, m, split), config);
  std::vector<TrajectoryPair> pairs(bank.size());
  model::parallel_for(bank.size(), jobs, [&](std::size_t i) {
    const auto& s = bank.samples()[i];
    const nn::Tensor out = model::predict(params, config, s);
    pairs[i] = eval::make_pair(s.sequence, std::vector<double>(out.values().begin(), out.values().end()));
  });
  return finish(std::move(pairs), {m.level, config.lstm_cells, variant_label(config.lstm_cells)});
}

EvalResult evaluate_checkpoint(const std::filesystem::path& checkpoint,
                               const std::filesystem::path& dataset_dir, data::Split split,
                               int jobs) {
  const auto ck = model::load_checkpoint(checkpoint);
  return evaluate(ck.params, ck.config, dataset_dir, split, jobs);
}

EvalResult evaluate_stay_put(const std::filesystem::path& dataset_dir, int n_in, int n_out,
                             data::Split split) {
  const auto m = data::load_manifest(dataset_dir);
  std::vector<TrajectoryPair> pairs;
  for (const auto& e : m.episodes) {
    if (e.split != split) continue;
    const auto records = data::read_records(data::episode_dir(dataset_dir, e.id) / "records.jsonl");
    for (const auto& s : data::build_sequences(records, n_in, n_out, 1, e.id))
      pairs.push_back(eval::make_pair(s, std::vector<double>(2 * static_cast<std::size_t>(n_out), 0.0)));
  }
  return finish(std::move(pairs), {m.level, 0, "stay-put"});
}

json report_to_json(const MetricsReport& r) {
  json per = json::array();
  for (const auto& s : r.per_sequence) per.push_back({{"rmse", s.rmse}, {"mape", s.mape}, {"ed", s.ed}});
  return {{"tag", {{"level", r.tag.level}, {"lstm_cells", r.tag.lstm_cells}, {"label", r.tag.label}}},
          {"armse", r.armse},
          {"amape", r.amape},
          {"aed", r.aed},
          {"units", {{"armse", "m"}, {"amape", "fraction"}, {"aed", "m"}}},
          {"n_sequences", r.per_sequence.size()},
          {"per_sequence", per}};
}

void write_eval_outputs(const std::filesystem::path& out, const EvalResult& r, const json& extra) {
  const std::filesystem::path traj = out.string() + ".trajectories.jsonl";
  const std::filesystem::path table = out.string() + ".table.txt";
  std::string lines;
  for (const auto& t : r.trajectories) lines += trajectory_to_json(t).dump() + "\n";
  data::write_file_atomic(traj, lines);
  data::write_file_atomic(
      table, format_table({r.report}, "Level " + std::to_string(r.report.tag.level) + " evaluation"));
  json j = report_to_json(r.report);
  j["trajectories"] = traj.filename().string();
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  data::write_file_atomic(out, j.dump(2) + "\n");
}

json AblationResult::to_json() const {
  json vs = json::array();
  for (const auto& v : variants) {
    json e = {{"label", variant_label(v.lstm_cells)}, {"lstm_cells", v.lstm_cells}};
    if (v.report) {
      e["armse"] = v.report->armse;
      e["amape"] = v.report->amape;
      e["aed"] = v.report->aed;
      e["n_sequences"] = v.report->per_sequence.size();
      e["train_mse"] = v.train_mse;
      e["val_mse"] = v.val_mse;
    } else {
      e["error"] = v.error;
    }
    vs.push_back(e);
  }
  json ref = json::array();
  for (const auto& r : reference_rows(level))
    ref.push_back({{"label", r.label}, {"armse", r.armse}, {"amape", r.amape}, {"aed", r.aed}});
  return {{"level", level},
          {"units", {{"armse", "m"}, {"amape", "fraction"}, {"aed", "m"}}},
          {"variants", vs},
          {"trend", trend},
          {"reference",
           {{"note", "values reported for the original CARLA-based study; display only"},
            {"rows", ref}}}};
}

AblationResult ablation_run(const std::filesystem::path& dataset_dir,
                            const model::ModelConfig& base, const std::vector<int>& cells, int jobs,
                            const std::filesystem::path& out_dir) {
  AblationResult res;
  res.level = data::load_manifest(dataset_dir).level;
  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create " + out_dir.string() + ": " + ec.message());
  }
  std::vector<MetricsReport> rows;
  for (int c : cells) {
    VariantOutcome v;
    v.lstm_cells = c;
    try {
      model::ModelConfig cfg = base;
      cfg.lstm_cells = c;
      model::validate(cfg);
      auto trained = model::train_loop(dataset_dir, cfg, jobs);
      for (const auto& e : trained.history.epochs) {
        v.train_mse.push_back(e.train_mse);
        v.val_mse.push_back(e.val_mse);
      }
      auto ev = evaluate(trained.params, cfg, dataset_dir, data::Split::Test, jobs);
      if (!out_dir.empty()) {
        const std::string stem = "cells" + std::to_string(c);
        model::save_checkpoint(out_dir / (stem + ".ckpt"), cfg, trained.params);
        write_eval_outputs(out_dir / (stem + ".report.json"), ev);
      }
      v.report = ev.report;
      rows.push_back(ev.report);
    } catch (const Error& e) {
      v.error = std::string(to_string(e.kind())) + ": " + e.what();
    } catch (const std::exception& e) {
      v.error = e.what();
    }
    res.variants.push_back(std::move(v));
  }

  std::vector<std::pair<int, double>> ok;
  for (const auto& v : res.variants)
    if (v.report) ok.emplace_back(v.lstm_cells, v.report->armse);
  std::sort(ok.begin(), ok.end());
  if (ok.size() < 2) {
    res.trend = "ARMSE trend: not enough completed variants to compare";
  } else {
    bool non_increasing = true;
    for (std::size_t i = 1; i < ok.size(); ++i)
      if (ok[i].second > ok[i - 1].second) non_increasing = false;
    res.trend = std::string("ARMSE ") +
                (non_increasing ? "is non-increasing" : "is not monotonically non-increasing") +
                " in cell count (reported, not asserted)";
  }

  res.table = format_table(rows, "Level " + std::to_string(res.level) + " ablation, test split");
  for (const auto& v : res.variants)
    if (!v.report) res.table += pad(variant_label(v.lstm_cells), 9) + "failed: " + v.error + "\n";
  res.table += res.trend + "\n\n" + format_reference_table(res.level);
  return res;
}

std::string plot_columns(const std::vector<TrajectoryPair>& pairs) {
  std::ostringstream os;
  os << "# seq episode anchor_frame step gt_x gt_y pred_x pred_y\n";
  char buf[256];
  for (std::size_t s = 0; s < pairs.size(); ++s) {
    const auto& p = pairs[s];
    for (std::size_t k = 0; k < p.gt.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%zu %d %lld %zu %.6f %.6f %.6f %.6f\n", s, p.episode_id,
                    static_cast<long long>(p.anchor_frame), k + 1, p.gt[k].x, p.gt[k].y,
                    p.pred[k].x, p.pred[k].y);
      os << buf;
    }
  }
  return os.str();
}

std::vector<TrajectoryPair> read_trajectories(const std::filesystem::path& path) {
  const auto bytes = data::read_file_bytes(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::vector<TrajectoryPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    try {
      out.push_back(trajectory_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      fail(ErrorKind::Format, path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      fail(ErrorKind::Format, path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace trajlab::eval
