#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trajlab/data/records.hpp"
#include "trajlab/render/bev.hpp"

namespace trajlab::data {

enum class Split { Train, Val, Test };

const char* to_string(Split s);
Split parse_split(const std::string& s);

struct EpisodeEntry {
  int id = 0;
  std::int64_t n_frames = 0;
  Split split = Split::Train;
  friend bool operator==(const EpisodeEntry&, const EpisodeEntry&) = default;
};

struct DatasetManifest {
  static constexpr int kFormatVersion = 1;

  int level = 1;
  std::uint64_t seed = 0;
  std::vector<EpisodeEntry> episodes;
  std::int64_t total_frames = 0;
  int format_version = kFormatVersion;
  render::CameraSpec camera;

  std::size_t count(Split s) const;
};

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);

// <out>/episodes/ep_%04d
std::filesystem::path episode_dir(const std::filesystem::path& root, int id);
// frames/%06d.ppm
std::string frame_image_name(std::int64_t frame);

struct GenerateOptions {
  int level = 1;
  std::uint64_t seed = 0;
  int n_episodes = 10;
  std::int64_t frames_per_episode = 100;
  render::CameraSpec camera = render::CameraSpec::desk();
  std::filesystem::path out_dir;
  int jobs = 1;
  // Shortest useful episode: n_in + n_out + 1 at the default horizon.
  std::int64_t min_frames = 11;
};

DatasetManifest generate_dataset(const GenerateOptions& opt);

// Shuffles episodes with the seed and assigns them by cumulative ratio with
// largest-remainder rounding. Every non-zero bucket receives an episode.
DatasetManifest split_dataset(DatasetManifest manifest,
                              std::array<double, 3> ratios = {0.6, 0.2, 0.2},
                              std::uint64_t seed = 0);

DatasetManifest load_manifest(const std::filesystem::path& root);
void save_manifest(const std::filesystem::path& root, const DatasetManifest& m);

struct SampleSequence {
  static constexpr double kNormScale = 30.0;

  int episode_id = 0;
  std::vector<FrameRecord> inputs;  // n_in consecutive frames ending at the anchor
  std::vector<double> label;        // (x0,y0,...) in the anchor ego frame, metres
  std::vector<FrameRecord> future;  // frames t+1..t+n_out, ground truth

  const FrameRecord& anchor() const { return inputs.back(); }
};

std::vector<SampleSequence> build_sequences(const std::vector<FrameRecord>& records,
                                            int n_in = 5, int n_out = 5, int stride = 1,
                                            int episode_id = 0);

// Anchor-frame helpers shared by labels and metrics.
sim::Pose2D odometry_pose(const Odometry& o);
std::vector<double> label_to_world(const Odometry& anchor, const std::vector<double>& label);

// One episode with decoded frames, for training and evaluation.
struct LoadedEpisode {
  EpisodeEntry entry;
  std::vector<FrameRecord> records;
  std::vector<render::Image> images;  // indexed like records
};

LoadedEpisode load_episode(const std::filesystem::path& root, const DatasetManifest& m,
                           const EpisodeEntry& e);
std::vector<LoadedEpisode> load_split(const std::filesystem::path& root, const DatasetManifest& m,
                                      Split split);

}  // namespace trajlab::data
