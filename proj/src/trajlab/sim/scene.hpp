#pragma once

#include <cstdint>
#include <vector>

#include "trajlab/sim/geometry.hpp"
#include "trajlab/sim/road.hpp"

namespace trajlab::sim {

// World constants. Speeds in m/s, distances in m.
struct SimConstants {
  static constexpr double kDt = 0.1;
  static constexpr double kMaxSpeed = 8.3334;  // 30 km/h
  static constexpr double kMaxBrake = 3.0;
  static constexpr double kMaxAccel = 2.0;
  static constexpr double kStopMargin = 2.0;
  static constexpr double kDetectWindow = 20.0;
  static constexpr double kDetectBuffer = 1.5;
  static constexpr double kWalkSpeed = 1.4;
  static constexpr double kMaxPedestrianSpeed = 2.0;
  static constexpr double kCrosswalkWidth = 4.0;
  static constexpr double kSidewalkOffset = 3.0;  // pedestrian path beyond the road edge
  static constexpr double kVehicleHalfLength = 2.2;
  static constexpr double kVehicleHalfWidth = 0.9;
  static constexpr double kPedestrianHalf = 0.3;
};

struct EgoState {
  Pose2D pose;
  double v_f = 0.0;    // forward speed
  double omega = 0.0;  // yaw rate, curvature * v_f
  double accel = 0.0;  // realised longitudinal acceleration of the last step
  double path_s = 0.0;
};

enum class AgentKind { Vehicle, Pedestrian };

// Agents follow Frenet routes on the road reference line: either along the
// road at a fixed lateral offset, or across it at a crosswalk.
enum class RouteKind { Along, Crossing };

struct Route {
  RouteKind kind = RouteKind::Along;
  double s = 0.0;
  double d = 0.0;
  int direction = 1;         // Along: +1 with the ego, -1 against it; Crossing: sign of d motion
  double d_end = 0.0;        // Crossing: lateral target
  double trigger_gap = 0.0;  // Crossing: starts when the ego front is this close
  bool active = false;       // Crossing: walking
  bool finished = false;     // Crossing: reached d_end
};

struct Agent {
  AgentKind kind = AgentKind::Vehicle;
  Pose2D pose;
  double speed = 0.0;
  double base_speed = 0.0;
  Route route;
  double half_length = 0.0;
  double half_width = 0.0;

  OrientedBox footprint() const { return {pose, half_length, half_width}; }
};

struct Scene {
  RoadSpec road;
  EgoState ego;
  std::vector<Agent> agents;
  std::int64_t frame = 0;
  double time = 0.0;
  int level = 1;
  bool crossing_scheduled = false;
};

struct ImuRecord {
  std::int64_t frame = 0;
  double time_s = 0.0;
  double accel_long = 0.0;  // m/s^2
  double accel_lat = 0.0;   // m/s^2, v_f * omega
  double angular_velocity = 0.0;
};

struct OdometryRecord {
  double x = 0.0;
  double y = 0.0;
  double yaw_deg = 0.0;
  double speed = 0.0;
};

struct EpisodeTrace {
  std::vector<Scene> scenes;
  std::vector<ImuRecord> imu;
  std::vector<OdometryRecord> odometry;
};

OrientedBox ego_footprint(const EgoState& ego);

// Distance from the ego front bumper to the near edge of a crosswalk, along
// the path. Negative once the bumper has entered it.
double crosswalk_gap(const EgoState& ego, const Crosswalk& cw);

// True if a pedestrian footprint lies inside or within the detection buffer
// of the crosswalk.
bool crosswalk_occupied(const Scene& scene, const Crosswalk& cw);

Scene build_scene(int level, std::uint64_t seed);
double ego_policy(const Scene& scene);
Scene step(const Scene& scene, double dt = SimConstants::kDt);
EpisodeTrace run_episode(int level, std::uint64_t seed, std::int64_t n_frames);
// Runs an already-built scene; used by tests with hand-made worlds.
EpisodeTrace run_scene(Scene initial, std::int64_t n_frames);

// Refreshes agent poses from their Frenet routes.
void place_agents(Scene& scene);

}  // namespace trajlab::sim
