#include "trajlab/sim/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "trajlab/error.hpp"
#include "trajlab/rng.hpp"

namespace trajlab::sim {

using C = SimConstants;

namespace {

struct LevelBounds {
  int vehicles_lo, vehicles_hi;
  int pedestrians_lo, pedestrians_hi;
  double crossing_probability;
};

LevelBounds level_bounds(int level) {
  switch (level) {
    case 1: return {0, 2, 0, 2, 0.3};
    case 2: return {2, 6, 2, 6, 0.6};
    default: fail(ErrorKind::Parameter, "level must be 1 or 2, got " + std::to_string(level));
  }
}

RoadSpec random_road(Rng& rng) {
  RoadSpec road;
  road.lane_width = 3.5;
  const auto n_segments = rng.uniform_int(2, 4);
  const double first_len = rng.uniform(60.0, 80.0);
  append_segment(road, first_len, 0.0);
  road.crosswalks.push_back({rng.uniform(40.0, first_len - 8.0), C::kCrosswalkWidth});
  for (std::int64_t i = 1; i < n_segments; ++i) {
    if (i % 2 == 1) {
      const double radius = rng.uniform(15.0, 45.0);
      const double sweep = rng.uniform(0.35, 1.2);
      const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
      append_segment(road, radius * sweep, sign / radius);
    } else {
      const double len = rng.uniform(30.0, 60.0);
      append_segment(road, len, 0.0);
      if (rng.bernoulli(0.5)) {
        const RoadSegment& seg = road.segments.back();
        road.crosswalks.push_back({seg.start_s + rng.uniform(8.0, len - 8.0), C::kCrosswalkWidth});
      }
    }
  }
  return road;
}

double sidewalk_d(const RoadSpec& road, bool left) {
  return left ? road.left_edge() + C::kSidewalkOffset : road.right_edge() - C::kSidewalkOffset;
}

Agent make_pedestrian() {
  Agent a;
  a.kind = AgentKind::Pedestrian;
  a.half_length = C::kPedestrianHalf;
  a.half_width = C::kPedestrianHalf;
  return a;
}

Agent make_vehicle() {
  Agent a;
  a.kind = AgentKind::Vehicle;
  a.half_length = C::kVehicleHalfLength;
  a.half_width = C::kVehicleHalfWidth;
  return a;
}

// Signed gap from a vehicle-like body at arc length s (half length hl) moving
// in `direction` to the near edge of the crosswalk.
double body_gap(double s, double hl, int direction, const Crosswalk& cw) {
  if (direction >= 0) return (cw.s - 0.5 * cw.width) - (s + hl);
  return (s - hl) - (cw.s + 0.5 * cw.width);
}

}  // namespace

OrientedBox ego_footprint(const EgoState& ego) {
  return {ego.pose, C::kVehicleHalfLength, C::kVehicleHalfWidth};
}

double crosswalk_gap(const EgoState& ego, const Crosswalk& cw) {
  return body_gap(ego.path_s, C::kVehicleHalfLength, 1, cw);
}

bool crosswalk_occupied(const Scene& scene, const Crosswalk& cw) {
  const RoadSpec& road = scene.road;
  std::vector<Frenet> cands;
  for (const Agent& a : scene.agents) {
    if (a.kind != AgentKind::Pedestrian) continue;
    road.project_all(a.pose.position(), cands);
    if (cands.empty()) continue;
    const Frenet f = *std::min_element(cands.begin(), cands.end(), [&](Frenet x, Frenet y) {
      return std::abs(x.s - cw.s) < std::abs(y.s - cw.s);
    });
    const double rel = a.pose.yaw - road.pose_at(f.s).yaw;
    const double cs = std::abs(std::cos(rel)), sn = std::abs(std::sin(rel));
    const double ext_s = cs * a.half_length + sn * a.half_width;
    const double ext_d = sn * a.half_length + cs * a.half_width;
    const double gap_s = std::max(0.0, std::abs(f.s - cw.s) - 0.5 * cw.width - ext_s);
    const double gap_d =
        std::max({0.0, road.right_edge() - (f.d + ext_d), (f.d - ext_d) - road.left_edge()});
    if (std::hypot(gap_s, gap_d) <= C::kDetectBuffer) return true;
  }
  return false;
}

void place_agents(Scene& scene) {
  for (Agent& a : scene.agents) {
    const Route& r = a.route;
    const Pose2D p = scene.road.frenet_to_pose({r.s, r.d});
    double yaw = p.yaw;
    if (r.kind == RouteKind::Along) {
      if (r.direction < 0) yaw += std::numbers::pi;
    } else {
      yaw += r.direction * 0.5 * std::numbers::pi;
    }
    a.pose = {p.x, p.y, normalize_angle(yaw)};
  }
}

Scene build_scene(int level, std::uint64_t seed) {
  const LevelBounds b = level_bounds(level);
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(level), 0x7363656e65ULL));

  Scene sc;
  sc.level = level;
  sc.road = random_road(rng);
  sc.crossing_scheduled = rng.bernoulli(b.crossing_probability);

  const auto n_vehicles = rng.uniform_int(b.vehicles_lo, b.vehicles_hi);
  const int ped_lo = sc.crossing_scheduled ? std::max(1, b.pedestrians_lo) : b.pedestrians_lo;
  const auto n_pedestrians = rng.uniform_int(ped_lo, b.pedestrians_hi);

  for (std::int64_t i = 0; i < n_pedestrians; ++i) {
    Agent a = make_pedestrian();
    const bool left = rng.bernoulli(0.5);
    if (i == 0 && sc.crossing_scheduled) {
      const Crosswalk& cw = sc.road.crosswalks.front();
      a.route.kind = RouteKind::Crossing;
      a.route.s = cw.s + rng.uniform(-1.2, 1.2);
      a.route.d = sidewalk_d(sc.road, left);
      a.route.d_end = sidewalk_d(sc.road, !left);
      a.route.direction = left ? -1 : 1;
      a.route.trigger_gap = rng.uniform(28.0, 36.0);
      a.base_speed = C::kWalkSpeed;
      a.speed = 0.0;
    } else {
      a.route.kind = RouteKind::Along;
      a.route.s = rng.uniform(-10.0, 150.0);
      a.route.d = sidewalk_d(sc.road, left);
      a.route.direction = rng.bernoulli(0.5) ? 1 : -1;
      a.base_speed = rng.uniform(0.5, 1.8);
      a.speed = a.base_speed;
    }
    sc.agents.push_back(a);
  }

  std::vector<double> taken;
  for (std::int64_t i = 0; i < n_vehicles; ++i) {
    Agent a = make_vehicle();
    double s = rng.uniform(25.0, 160.0);
    while (std::any_of(taken.begin(), taken.end(),
                       [s](double t) { return std::abs(t - s) < 8.0; }))
      s += 10.0;
    taken.push_back(s);
    a.route.kind = RouteKind::Along;
    a.route.s = s;
    a.route.d = sc.road.lane_width;
    a.route.direction = -1;
    a.base_speed = rng.uniform(5.0, C::kMaxSpeed);
    a.speed = a.base_speed;
    sc.agents.push_back(a);
  }

  sc.ego.path_s = 0.0;
  sc.ego.pose = sc.road.pose_at(0.0);
  sc.ego.v_f = C::kMaxSpeed;
  sc.ego.omega = sc.road.curvature_at(0.0) * sc.ego.v_f;
  sc.ego.accel = 0.0;
  place_agents(sc);
  return sc;
}

double ego_policy(const Scene& scene) {
  const EgoState& ego = scene.ego;
  const double v = ego.v_f;
  double avail = std::numeric_limits<double>::infinity();
  bool hazard = false;
  for (const Crosswalk& cw : scene.road.crosswalks) {
    const double gap = crosswalk_gap(ego, cw);
    if (gap < 0.0 || gap > C::kDetectWindow) continue;
    if (!crosswalk_occupied(scene, cw)) continue;
    hazard = true;
    avail = std::min(avail, gap - C::kStopMargin);
  }
  if (!hazard) return std::clamp((C::kMaxSpeed - v) / C::kDt, -C::kMaxBrake, C::kMaxAccel);
  if (v <= 0.0) return 0.0;
  if (avail <= 0.0) return -C::kMaxBrake;
  // Final step of a stop: land exactly on zero.
  if (v <= C::kMaxBrake * C::kDt) return -v / C::kDt;
  const double required = v * v / (2.0 * avail);
  return -std::min(required, C::kMaxBrake);
}

Scene step(const Scene& scene, double dt) {
  if (dt != C::kDt) fail(ErrorKind::Parameter, "step: dt must be exactly 0.1 s");
  const double accel_cmd = ego_policy(scene);

  Scene next = scene;
  for (Agent& a : next.agents) {
    Route& r = a.route;
    if (r.kind == RouteKind::Crossing) {
      if (!r.active && !r.finished) {
        Crosswalk cw{r.s, C::kCrosswalkWidth};
        if (crosswalk_gap(scene.ego, cw) <= r.trigger_gap) {
          r.active = true;
          a.speed = a.base_speed;
        }
      }
      if (r.active) {
        const double remaining = r.d_end - r.d;
        const double move = a.speed * dt;
        if (std::abs(remaining) <= move) {
          r.d = r.d_end;
          r.active = false;
          r.finished = true;
          a.speed = 0.0;
        } else {
          r.d += remaining > 0 ? move : -move;
        }
      }
      continue;
    }
    if (a.kind == AgentKind::Vehicle) {
      bool hold = false;
      for (const Crosswalk& cw : scene.road.crosswalks) {
        const double gap = body_gap(r.s, a.half_length, r.direction, cw);
        if (gap >= 0.0 && gap <= 12.0 && crosswalk_occupied(scene, cw)) hold = true;
      }
      a.speed = hold ? 0.0 : a.base_speed;
    }
    r.s += r.direction * a.speed * dt;
  }
  place_agents(next);

  EgoState& ego = next.ego;
  const double v_new = std::clamp(ego.v_f + accel_cmd * dt, 0.0, C::kMaxSpeed);
  ego.accel = (v_new - scene.ego.v_f) / dt;
  ego.v_f = v_new;
  ego.path_s += v_new * dt;
  ego.pose = next.road.pose_at(ego.path_s);
  ego.omega = next.road.curvature_at(ego.path_s) * v_new;

  next.frame = scene.frame + 1;
  next.time = static_cast<double>(next.frame) * dt;
  return next;
}

EpisodeTrace run_scene(Scene initial, std::int64_t n_frames) {
  if (n_frames < 1) fail(ErrorKind::Parameter, "run_episode: n_frames must be positive");
  EpisodeTrace tr;
  tr.scenes.reserve(static_cast<std::size_t>(n_frames));
  Scene cur = std::move(initial);
  for (std::int64_t k = 0; k < n_frames; ++k) {
    if (k > 0) cur = step(cur);
    const EgoState& e = cur.ego;
    tr.imu.push_back({cur.frame, cur.time, e.accel, e.v_f * e.omega, e.omega});
    tr.odometry.push_back({e.pose.x, e.pose.y, e.pose.yaw * 180.0 / std::numbers::pi, e.v_f});
    tr.scenes.push_back(cur);
  }
  return tr;
}

EpisodeTrace run_episode(int level, std::uint64_t seed, std::int64_t n_frames) {
  return run_scene(build_scene(level, seed), n_frames);
}

}  // namespace trajlab::sim
