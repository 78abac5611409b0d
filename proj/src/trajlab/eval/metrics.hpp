#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "trajlab/data/dataset.hpp"
#include "trajlab/model/config.hpp"
#include "trajlab/model/network.hpp"
#include "trajlab/sim/geometry.hpp"

namespace trajlab::eval {

// Floor of the per-coordinate percentage-error denominator, metres.
inline constexpr double kMapeEpsilon = 0.1;

struct SequenceMetrics {
  double rmse = 0.0;  // sqrt of mean squared displacement, m
  double mape = 0.0;  // fraction, not percent
  double ed = 0.0;    // mean displacement, m
};

// pred and gt are world-frame positions of the same horizon.
SequenceMetrics sequence_metrics(const std::vector<sim::Vec2>& pred,
                                 const std::vector<sim::Vec2>& gt);

// Sum of squared distances from each pose to the destination, m^2.
double distance_feedback(const std::vector<sim::Pose2D>& poses, const sim::Pose2D& dest);
// Plain sums over the horizon.
double lateral_velocity(const std::vector<double>& omegas);
double longitudinal_velocity(const std::vector<double>& v_fs);

struct ReportTag {
  int level = 0;
  int lstm_cells = 0;
  std::string label;  // variant row name
};

struct MetricsReport {
  ReportTag tag;
  std::vector<SequenceMetrics> per_sequence;
  double armse = 0.0;
  double amape = 0.0;
  double aed = 0.0;
};

MetricsReport aggregate(const std::vector<SequenceMetrics>& seqs, const ReportTag& tag);

// Greek row label for a cell count 1..4.
std::string variant_label(int lstm_cells);

struct ReferenceRow {
  std::string label;
  double armse, amape, aed;
};
// Values reported for the original CARLA-based study; display only.
const std::vector<ReferenceRow>& reference_rows(int level);

// Aligned plain-text table: one row per report, columns ARMSE/AMAPE/AED.
std::string format_table(const std::vector<MetricsReport>& rows, const std::string& title);
std::string format_reference_table(int level);

struct TrajectoryPair {
  int episode_id = 0;
  std::int64_t anchor_frame = 0;
  sim::Pose2D anchor;
  std::vector<sim::Vec2> gt;
  std::vector<sim::Vec2> pred;
  SequenceMetrics metrics;
  double v_lat = 0.0;       // sum of yaw rates over the horizon, rad/s
  double v_long = 0.0;      // sum of speeds over the horizon, m/s
  double d1_pred = 0.0;     // distance feedback of the predicted points to the gt endpoint
};

nlohmann::json trajectory_to_json(const TrajectoryPair& t);
TrajectoryPair trajectory_from_json(const nlohmann::json& j);

struct EvalResult {
  MetricsReport report;
  std::vector<TrajectoryPair> trajectories;
};

// Pairs one model output (normalized ego-frame label) with its sample.
TrajectoryPair make_pair(const data::SampleSequence& seq, const std::vector<double>& pred_label);

// Runs the model over every sequence of the split in inference mode.
EvalResult evaluate(const model::Params& params, const model::ModelConfig& config,
                    const std::filesystem::path& dataset_dir, data::Split split = data::Split::Test,
                    int jobs = 1);
EvalResult evaluate_checkpoint(const std::filesystem::path& checkpoint,
                               const std::filesystem::path& dataset_dir,
                               data::Split split = data::Split::Test, int jobs = 1);

// "Stay put" baseline: every predicted point is the anchor position.
EvalResult evaluate_stay_put(const std::filesystem::path& dataset_dir, int n_in, int n_out,
                             data::Split split = data::Split::Test);

nlohmann::json report_to_json(const MetricsReport& r);

// Writes <out> (JSON), <out>.table.txt and <out>.trajectories.jsonl.
void write_eval_outputs(const std::filesystem::path& out, const EvalResult& r,
                        const nlohmann::json& extra = nlohmann::json::object());

struct VariantOutcome {
  int lstm_cells = 0;
  std::optional<MetricsReport> report;
  std::string error;  // set when the variant failed
  std::vector<double> train_mse, val_mse;
};

struct AblationResult {
  int level = 0;
  std::vector<VariantOutcome> variants;
  std::string trend;  // qualitative ARMSE trend over cell counts
  std::string table;  // combined table plus reference block
  nlohmann::json to_json() const;
};

// Trains one model per cell count from the same seed and split, evaluates
// each on the test split. A failing variant is recorded, not fatal.
AblationResult ablation_run(const std::filesystem::path& dataset_dir,
                            const model::ModelConfig& base, const std::vector<int>& cells,
                            int jobs = 1, const std::filesystem::path& out_dir = {});

// Columnar text for plotting ground truth against prediction.
std::string plot_columns(const std::vector<TrajectoryPair>& pairs);
std::vector<TrajectoryPair> read_trajectories(const std::filesystem::path& path);

}  // namespace trajlab::eval
