#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "support.hpp"
#include "trajlab/error.hpp"
#include "trajlab/render/bev.hpp"
#include "trajlab/rng.hpp"
#include "trajlab/sim/scene.hpp"

using namespace trajlab;
using namespace trajlab::render;
using sim::Pose2D;
using sim::Vec2;

namespace {

bool in_palette(Rgb c) {
  return std::find(palette::kAll.begin(), palette::kAll.end(), c) != palette::kAll.end();
}

std::set<Rgb> colors(const Image& img) {
  std::set<Rgb> s;
  for (int v = 0; v < img.height; ++v)
    for (int u = 0; u < img.width; ++u) s.insert(img.at(u, v));
  return s;
}

}  // namespace

TEST_CASE("camera footprint") {
  const CameraSpec desk = CameraSpec::desk(), cap = CameraSpec::capture();
  CHECK(desk.footprint_width_m() == 30.0);
  CHECK(cap.footprint_width_m() == 30.0);
  CHECK(cap.footprint_height_m() == doctest::Approx(22.5).epsilon(1e-15));
  CHECK(cap.meters_per_pixel() == doctest::Approx(0.0375).epsilon(1e-15));
  CHECK(desk.meters_per_pixel() == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(Image(80, 60).pixels.size() == 80u * 60u * 3u);
}

TEST_CASE("world_to_pixel examples") {
  const CameraSpec cap = CameraSpec::capture();
  const Pose2D ego{12.0, -3.0, 0.7};
  const Pixel c = world_to_pixel(ego, ego.position(), cap);
  CHECK(c.u == doctest::Approx(400.0));
  CHECK(c.v == doctest::Approx(300.0));

  const Vec2 ahead = ego.position() + 15.0 * sim::heading_vec(ego.yaw);
  const Pixel a = world_to_pixel(ego, ahead, cap);
  CHECK(a.u == doctest::Approx(400.0));
  CHECK(a.v == doctest::Approx(-100.0));

  // turning the ego by +90 degrees turns the image of a fixed point by -90
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const Pose2D e0{rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-3, 3)};
    const Pose2D e1{e0.x, e0.y, sim::normalize_angle(e0.yaw + std::numbers::pi / 2)};
    const Vec2 p{e0.x + rng.uniform(-10, 10), e0.y + rng.uniform(-10, 10)};
    const Pixel p0 = world_to_pixel(e0, p, cap), p1 = world_to_pixel(e1, p, cap);
    const double a0 = p0.u - 400, b0 = p0.v - 300, a1 = p1.u - 400, b1 = p1.v - 300;
    CHECK(std::abs(a1 - (-b0)) * cap.meters_per_pixel() < 1e-9);
    CHECK(std::abs(b1 - a0) * cap.meters_per_pixel() < 1e-9);
  }
}

TEST_CASE("pixel round trip within half a pixel") {
  Rng rng(2);
  for (const CameraSpec cam : {CameraSpec::desk(), CameraSpec::capture()}) {
    const double half = 0.5 * cam.meters_per_pixel();
    for (int i = 0; i < 10000; ++i) {
      const Pose2D ego{rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(-3.14, 3.14)};
      const Vec2 e{rng.uniform(-0.5, 0.5) * cam.footprint_width_m(),
                   rng.uniform(-0.5, 0.5) * cam.footprint_height_m()};
      const Vec2 p = sim::ego_to_world(ego, e);
      const Vec2 q = pixel_to_world(ego, world_to_pixel(ego, p, cam), cam);
      CHECK(sim::norm(q - p) <= half);
    }
  }
}

TEST_CASE("render rejects a zero-sized camera") {
  CameraSpec cam = CameraSpec::desk();
  cam.width_px = 0;
  CHECK_ERROR_KIND(render::render(sim::build_scene(1, 0), cam), ErrorKind::Parameter);
}

TEST_CASE("empty road renders only road colors around the ego") {
  sim::Scene sc;
  sim::append_segment(sc.road, 200.0, 0.0);
  sc.ego.path_s = 50.0;
  sc.ego.pose = sc.road.pose_at(50.0);
  auto cs = colors(render::render(sc, CameraSpec::desk()));
  cs.erase(palette::kEgo);
  CHECK(cs == std::set<Rgb>{palette::kBackground, palette::kRoad, palette::kMarking});
}

TEST_CASE("pedestrian blob area at capture scale") {
  sim::Scene sc;
  sim::append_segment(sc.road, 200.0, 0.0);
  sc.ego.path_s = 50.0;
  sc.ego.pose = sc.road.pose_at(50.0);
  sim::Agent a;
  a.kind = sim::AgentKind::Pedestrian;
  a.half_length = a.half_width = sim::SimConstants::kPedestrianHalf;
  a.route.kind = sim::RouteKind::Crossing;
  a.route.s = 57.3;
  a.route.d = a.route.d_end = -0.37;
  a.route.finished = true;
  sc.agents.push_back(a);
  sim::place_agents(sc);
  const Image img = render::render(sc, CameraSpec::capture());
  int red = 0;
  for (int v = 0; v < img.height; ++v)
    for (int u = 0; u < img.width; ++u) red += img.at(u, v) == palette::kPedestrian;
  CHECK(red >= 256 - 34);
  CHECK(red <= 256 + 34);
}

TEST_CASE("rendered episodes: palette closure, centered ego, determinism") {
  for (int level = 1; level <= 2; ++level) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto tr = sim::run_episode(level, seed, 100);
      for (std::size_t k = 0; k < tr.scenes.size(); k += 3) {
        const CameraSpec cam = CameraSpec::desk();
        const Image img = render::render(tr.scenes[k], cam);
        bool closed = true;
        double su = 0, sv = 0;
        int n = 0;
        for (int v = 0; v < img.height; ++v)
          for (int u = 0; u < img.width; ++u) {
            const Rgb c = img.at(u, v);
            closed &= in_palette(c);
            if (c == palette::kEgo) {
              su += u + 0.5;
              sv += v + 0.5;
              ++n;
            }
          }
        CHECK(closed);
        for (int u : {39, 40})
          for (int v : {29, 30}) CHECK(img.at(u, v) == palette::kEgo);
        REQUIRE(n > 0);
        CHECK(std::abs(su / n - 40.0) <= 1.0);
        CHECK(std::abs(sv / n - 30.0) <= 1.0);
        if (k == 0) CHECK(render::render(tr.scenes[k], cam) == img);
      }
    }
  }
  const Image big = render::render(sim::run_episode(2, 3, 40).scenes.back(), CameraSpec::capture());
  for (const Rgb c : colors(big)) CHECK(in_palette(c));
}
