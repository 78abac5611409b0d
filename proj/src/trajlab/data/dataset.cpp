#include "trajlab/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numbers>
#include <numeric>
#include <set>
#include <thread>

#include <json.hpp>

#include "trajlab/data/ppm.hpp"
#include "trajlab/error.hpp"
#include "trajlab/rng.hpp"
#include "trajlab/sim/scene.hpp"

namespace trajlab::data {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  fail(ErrorKind::Format, "unknown split '" + s + "'");
}

std::size_t DatasetManifest::count(Split s) const {
  return static_cast<std::size_t>(std::count_if(
      episodes.begin(), episodes.end(), [s](const EpisodeEntry& e) { return e.split == s; }));
}

std::string manifest_to_json(const DatasetManifest& m) {
  json eps = json::array();
  for (const auto& e : m.episodes)
    eps.push_back({{"id", e.id}, {"n_frames", e.n_frames}, {"split", to_string(e.split)}});
  json j = {
      {"format_version", m.format_version},
      {"level", m.level},
      {"seed", m.seed},
      {"camera",
       {{"width_px", m.camera.width_px},
        {"height_px", m.camera.height_px},
        {"height_m", m.camera.height_m},
        {"fov_deg", m.camera.fov_deg}}},
      {"episodes", eps},
      {"totals", {{"episodes", m.episodes.size()}, {"frames", m.total_frames}}},
  };
  return j.dump(2) + "\n";
}

namespace {

[[noreturn]] void manifest_error(const std::string& what) {
  fail(ErrorKind::Format, "manifest: " + what);
}

void strict_keys(const json& obj, const std::set<std::string>& keys, const std::string& where) {
  if (!obj.is_object()) manifest_error(where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!keys.count(it.key())) manifest_error("unknown field '" + it.key() + "' in " + where);
  for (const auto& k : keys)
    if (!obj.contains(k)) manifest_error("missing field '" + k + "' in " + where);
}

}  // namespace

DatasetManifest manifest_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    manifest_error(std::string("parse failure: ") + e.what());
  }
  try {
    strict_keys(j, {"format_version", "level", "seed", "camera", "episodes", "totals"}, "manifest");
    strict_keys(j["camera"], {"width_px", "height_px", "height_m", "fov_deg"}, "camera");
    strict_keys(j["totals"], {"episodes", "frames"}, "totals");
    DatasetManifest m;
    m.format_version = j["format_version"].get<int>();
    if (m.format_version != DatasetManifest::kFormatVersion)
      manifest_error("unsupported format_version " + std::to_string(m.format_version));
    m.level = j["level"].get<int>();
    m.seed = j["seed"].get<std::uint64_t>();
    const json& c = j["camera"];
    m.camera = {c["height_m"].get<double>(), c["fov_deg"].get<double>(), c["width_px"].get<int>(),
                c["height_px"].get<int>()};
    if (!j["episodes"].is_array()) manifest_error("episodes must be an array");
    for (const json& e : j["episodes"]) {
      strict_keys(e, {"id", "n_frames", "split"}, "episode");
      m.episodes.push_back({e["id"].get<int>(), e["n_frames"].get<std::int64_t>(),
                            parse_split(e["split"].get<std::string>())});
    }
    m.total_frames = j["totals"]["frames"].get<std::int64_t>();
    if (j["totals"]["episodes"].get<std::size_t>() != m.episodes.size())
      manifest_error("totals.episodes does not match the episode list");
    return m;
  } catch (const json::exception& e) {
    manifest_error(std::string("bad field type: ") + e.what());
  }
}

fs::path episode_dir(const fs::path& root, int id) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "ep_%04d", id);
  return root / "episodes" / buf;
}

std::string frame_image_name(std::int64_t frame) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frames/%06lld.ppm", static_cast<long long>(frame));
  return buf;
}

namespace {

std::vector<FrameRecord> trace_records(const sim::EpisodeTrace& tr) {
  std::vector<FrameRecord> out;
  out.reserve(tr.scenes.size());
  for (std::size_t k = 0; k < tr.scenes.size(); ++k) {
    const auto& imu = tr.imu[k];
    const auto& od = tr.odometry[k];
    FrameRecord r;
    r.frame = tr.scenes[k].frame;
    r.time_s = tr.scenes[k].time;
    r.image = frame_image_name(r.frame);
    r.odom = {od.x, od.y, od.yaw_deg, od.speed};
    r.imu = {imu.accel_long, imu.accel_lat, imu.angular_velocity};
    out.push_back(std::move(r));
  }
  return out;
}

void generate_episode(const GenerateOptions& opt, int id) {
  const fs::path dir = episode_dir(opt.out_dir, id);
  std::error_code ec;
  fs::create_directories(dir / "frames", ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + (dir / "frames").string() + ": " + ec.message());
  const sim::EpisodeTrace tr =
      sim::run_episode(opt.level, opt.seed + static_cast<std::uint64_t>(id), opt.frames_per_episode);
  const auto records = trace_records(tr);
  for (std::size_t k = 0; k < tr.scenes.size(); ++k)
    write_image(dir / records[k].image, render::render(tr.scenes[k], opt.camera));
  write_records(dir / "records.jsonl", records);
}

}  // namespace

DatasetManifest generate_dataset(const GenerateOptions& opt) {
  if (opt.level != 1 && opt.level != 2)
    fail(ErrorKind::Parameter, "level must be 1 or 2, got " + std::to_string(opt.level));
  if (opt.n_episodes < 1) fail(ErrorKind::Parameter, "episode count must be positive");
  if (opt.frames_per_episode < opt.min_frames)
    fail(ErrorKind::Parameter, "frames per episode must be at least " +
                                   std::to_string(opt.min_frames));
  if (opt.camera.width_px <= 0 || opt.camera.height_px <= 0)
    fail(ErrorKind::Parameter, "camera resolution must be positive");

  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + opt.out_dir.string() + ": " + ec.message());
  // A stale manifest must not outlive a failed regeneration.
  fs::remove(opt.out_dir / "manifest.json", ec);

  const int jobs = std::max(1, std::min(opt.jobs, opt.n_episodes));
  if (jobs == 1) {
    for (int id = 0; id < opt.n_episodes; ++id) generate_episode(opt, id);
  } else {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (int id = w; id < opt.n_episodes; id += jobs) generate_episode(opt, id);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  DatasetManifest m;
  m.level = opt.level;
  m.seed = opt.seed;
  m.camera = opt.camera;
  for (int id = 0; id < opt.n_episodes; ++id)
    m.episodes.push_back({id, opt.frames_per_episode, Split::Train});
  m.total_frames = static_cast<std::int64_t>(opt.n_episodes) * opt.frames_per_episode;
  m = split_dataset(std::move(m), {0.6, 0.2, 0.2}, opt.seed);
  save_manifest(opt.out_dir, m);
  return m;
}

DatasetManifest split_dataset(DatasetManifest manifest, std::array<double, 3> ratios,
                              std::uint64_t seed) {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) fail(ErrorKind::Config, "split ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) fail(ErrorKind::Config, "split ratios must sum to 1");
  const std::size_t n = manifest.episodes.size();
  const auto buckets = static_cast<std::size_t>(
      std::count_if(ratios.begin(), ratios.end(), [](double r) { return r > 0.0; }));
  if (n < buckets)
    fail(ErrorKind::Config, "cannot split " + std::to_string(n) + " episodes into " +
                                std::to_string(buckets) + " non-empty splits");

  // largest remainder
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double q = ratios[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(q + 1e-9));
    frac[i] = q - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; assigned < n; k = (k + 1) % 3) {
    if (ratios[order[k]] > 0.0) {
      ++counts[order[k]];
      ++assigned;
    }
  }
  for (std::size_t i = 0; i < 3; ++i) {
    if (ratios[i] > 0.0 && counts[i] == 0) {
      const auto donor = static_cast<std::size_t>(
          std::max_element(counts.begin(), counts.end()) - counts.begin());
      --counts[donor];
      ++counts[i];
    }
  }

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, 0x73706c6974ULL));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(perm[i - 1], perm[j]);
  }
  std::size_t pos = 0;
  const Split kinds[3] = {Split::Train, Split::Val, Split::Test};
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t c = 0; c < counts[b]; ++c) manifest.episodes[perm[pos++]].split = kinds[b];
  return manifest;
}

DatasetManifest load_manifest(const fs::path& root) {
  const fs::path p = root / "manifest.json";
  if (!fs::exists(p)) fail(ErrorKind::Io, "no dataset manifest at " + p.string());
  const auto bytes = read_file_bytes(p);
  return manifest_from_json(std::string(bytes.begin(), bytes.end()));
}

void save_manifest(const fs::path& root, const DatasetManifest& m) {
  write_file_atomic(root / "manifest.json", manifest_to_json(m));
}

sim::Pose2D odometry_pose(const Odometry& o) {
  return {o.x, o.y, o.yaw_deg * std::numbers::pi / 180.0};
}

std::vector<SampleSequence> build_sequences(const std::vector<FrameRecord>& records, int n_in,
                                            int n_out, int stride, int episode_id) {
  if (n_in < 1 || n_out < 1 || stride < 1)
    fail(ErrorKind::Parameter, "build_sequences: n_in, n_out and stride must be positive");
  std::vector<SampleSequence> out;
  const auto len = static_cast<std::int64_t>(records.size());
  for (std::int64_t t = n_in - 1; t <= len - n_out - 1; t += stride) {
    SampleSequence s;
    s.episode_id = episode_id;
    s.inputs.assign(records.begin() + (t - n_in + 1), records.begin() + t + 1);
    s.future.assign(records.begin() + t + 1, records.begin() + t + 1 + n_out);
    const sim::Pose2D anchor = odometry_pose(records[static_cast<std::size_t>(t)].odom);
    for (const FrameRecord& f : s.future) {
      const sim::Vec2 e = sim::world_to_ego(anchor, {f.odom.x, f.odom.y});
      s.label.push_back(e.x);
      s.label.push_back(e.y);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<double> label_to_world(const Odometry& anchor, const std::vector<double>& label) {
  const sim::Pose2D pose = odometry_pose(anchor);
  std::vector<double> out(label.size());
  for (std::size_t i = 0; i + 1 < label.size(); i += 2) {
    const sim::Vec2 w = sim::ego_to_world(pose, {label[i], label[i + 1]});
    out[i] = w.x;
    out[i + 1] = w.y;
  }
  return out;
}

LoadedEpisode load_episode(const fs::path& root, const DatasetManifest& m, const EpisodeEntry& e) {
  LoadedEpisode ep;
  ep.entry = e;
  const fs::path dir = episode_dir(root, e.id);
  ep.records = read_records(dir / "records.jsonl");
  if (static_cast<std::int64_t>(ep.records.size()) != e.n_frames)
    fail(ErrorKind::Format, (dir / "records.jsonl").string() + ": expected " +
                                std::to_string(e.n_frames) + " records, found " +
                                std::to_string(ep.records.size()));
  ep.images.reserve(ep.records.size());
  for (const auto& r : ep.records) {
    render::Image img = read_image(dir / r.image);
    if (img.width != m.camera.width_px || img.height != m.camera.height_px)
      fail(ErrorKind::Format, (dir / r.image).string() + ": resolution " +
                                  std::to_string(img.width) + "x" + std::to_string(img.height) +
                                  " does not match manifest");
    ep.images.push_back(std::move(img));
  }
  return ep;
}

std::vector<LoadedEpisode> load_split(const fs::path& root, const DatasetManifest& m, Split split) {
  std::vector<LoadedEpisode> out;
  for (const auto& e : m.episodes)
    if (e.split == split) out.push_back(load_episode(root, m, e));
  return out;
}

}  // namespace trajlab::data
