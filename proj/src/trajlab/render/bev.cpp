#include "trajlab/render/bev.hpp"

#include <cmath>
#include <numbers>

#include "trajlab/error.hpp"

namespace trajlab::render {

using sim::Vec2;

double CameraSpec::footprint_width_m() const {
  // Extended precision keeps tan(45 deg) at exactly 1 after rounding.
  const long double half = 0.5L * fov_deg * std::numbers::pi_v<long double> / 180.0L;
  return 2.0 * height_m * static_cast<double>(std::tan(half));
}

double CameraSpec::footprint_height_m() const {
  return footprint_width_m() * static_cast<double>(height_px) / static_cast<double>(width_px);
}

double CameraSpec::meters_per_pixel() const {
  return footprint_width_m() / static_cast<double>(width_px);
}

Image::Image(int w, int h) : width(w), height(h) {
  if (w <= 0 || h <= 0) fail(ErrorKind::Parameter, "image dimensions must be positive");
  pixels.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, 0);
}

Rgb Image::at(int u, int v) const {
  const std::size_t i = (static_cast<std::size_t>(v) * width + u) * 3;
  return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

void Image::set(int u, int v, Rgb c) {
  const std::size_t i = (static_cast<std::size_t>(v) * width + u) * 3;
  pixels[i] = c[0];
  pixels[i + 1] = c[1];
  pixels[i + 2] = c[2];
}

Pixel world_to_pixel(const sim::Pose2D& ego, Vec2 p, const CameraSpec& cam) {
  const Vec2 e = sim::world_to_ego(ego, p);
  const double mpp = cam.meters_per_pixel();
  return {0.5 * cam.width_px + e.x / mpp, 0.5 * cam.height_px - e.y / mpp};
}

Vec2 pixel_to_world(const sim::Pose2D& ego, Pixel px, const CameraSpec& cam) {
  const double mpp = cam.meters_per_pixel();
  const Vec2 e{(px.u - 0.5 * cam.width_px) * mpp, (0.5 * cam.height_px - px.v) * mpp};
  return sim::ego_to_world(ego, e);
}

namespace {

bool inside_box(const sim::OrientedBox& b, Vec2 p) {
  const Vec2 d = p - b.pose.position();
  return std::abs(sim::dot(d, sim::heading_vec(b.pose.yaw))) <= b.half_length &&
         std::abs(sim::dot(d, sim::left_normal(b.pose.yaw))) <= b.half_width;
}

bool in_band(double d, double lo, double hi) { return d >= lo && d <= hi; }

// Road layer colour at a world point, or nothing when off-road.
const Rgb* road_color(const sim::RoadSpec& road, Vec2 p, std::vector<sim::Frenet>& scratch) {
  road.project_all(p, scratch);
  const double lo = road.right_edge(), hi = road.left_edge();
  const double w = MarkingStyle::kWidth;
  const Rgb* best = nullptr;
  int best_rank = -1;
  for (const sim::Frenet& f : scratch) {
    if (!in_band(f.d, lo, hi)) continue;
    int rank = 0;
    const Rgb* c = &palette::kRoad;
    for (const sim::Crosswalk& cw : road.crosswalks) {
      if (std::abs(f.s - cw.s) <= 0.5 * cw.width &&
          static_cast<long>(std::floor((f.d - lo) / MarkingStyle::kStripe)) % 2 == 0) {
        rank = 2;
        c = &palette::kCrosswalk;
      }
    }
    if (rank < 2) {
      const bool edge = in_band(f.d, lo, lo + w) || in_band(f.d, hi - w, hi);
      const double divider = 0.5 * road.lane_width;  // between ego and oncoming lane
      const double phase = f.s - MarkingStyle::kDashPeriod * std::floor(f.s / MarkingStyle::kDashPeriod);
      const bool dash =
          std::abs(f.d - divider) <= 0.5 * w && phase < MarkingStyle::kDash;
      if (edge || dash) {
        rank = 1;
        c = &palette::kMarking;
      }
    }
    if (rank > best_rank) {
      best_rank = rank;
      best = c;
    }
  }
  return best;
}

}  // namespace

Image render(const sim::Scene& scene, const CameraSpec& cam) {
  if (cam.width_px <= 0 || cam.height_px <= 0)
    fail(ErrorKind::Parameter, "render: zero-sized image");
  Image img(cam.width_px, cam.height_px);
  const sim::Pose2D& ego = scene.ego.pose;

  std::vector<sim::OrientedBox> vehicles, pedestrians;
  for (const sim::Agent& a : scene.agents)
    (a.kind == sim::AgentKind::Vehicle ? vehicles : pedestrians).push_back(a.footprint());
  const sim::OrientedBox ego_box = sim::ego_footprint(scene.ego);

  std::vector<sim::Frenet> scratch;
  for (int v = 0; v < cam.height_px; ++v) {
    for (int u = 0; u < cam.width_px; ++u) {
      const Vec2 p = pixel_to_world(ego, {u + 0.5, v + 0.5}, cam);
      Rgb c = palette::kBackground;
      if (const Rgb* rc = road_color(scene.road, p, scratch)) c = *rc;
      for (const auto& b : vehicles)
        if (inside_box(b, p)) c = palette::kVehicle;
      for (const auto& b : pedestrians)
        if (inside_box(b, p)) c = palette::kPedestrian;
      if (inside_box(ego_box, p)) c = palette::kEgo;
      img.set(u, v, c);
    }
  }
  return img;
}

}  // namespace trajlab::render
