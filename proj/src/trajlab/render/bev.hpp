#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "trajlab/sim/geometry.hpp"
#include "trajlab/sim/scene.hpp"

namespace trajlab::render {

// Top-down camera locked to the ego heading ("image up" = forward).
struct CameraSpec {
  double height_m = 15.0;
  double fov_deg = 90.0;
  int width_px = 80;
  int height_px = 60;

  // Ground footprint width; the horizontal axis defines the field of view.
  double footprint_width_m() const;
  double footprint_height_m() const;
  double meters_per_pixel() const;

  static CameraSpec capture() { return {15.0, 90.0, 800, 600}; }
  static CameraSpec desk() { return {15.0, 90.0, 80, 60}; }
};

using Rgb = std::array<std::uint8_t, 3>;

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // RGB interleaved, row-major, top-left origin

  Image() = default;
  Image(int w, int h);
  Rgb at(int u, int v) const;
  void set(int u, int v, Rgb c);
  friend bool operator==(const Image&, const Image&) = default;
};

namespace palette {
inline constexpr Rgb kBackground{40, 40, 40};
inline constexpr Rgb kRoad{90, 90, 90};
inline constexpr Rgb kMarking{255, 255, 255};
inline constexpr Rgb kCrosswalk{200, 200, 0};
inline constexpr Rgb kVehicle{0, 0, 255};
inline constexpr Rgb kPedestrian{255, 0, 0};
inline constexpr Rgb kEgo{0, 255, 0};
inline constexpr std::array<Rgb, 7> kAll{kBackground, kRoad,       kMarking, kCrosswalk,
                                         kVehicle,    kPedestrian, kEgo};
}  // namespace palette

// Painted lane markings, metres.
struct MarkingStyle {
  static constexpr double kWidth = 0.4;
  static constexpr double kDash = 3.0;
  static constexpr double kDashPeriod = 6.0;
  static constexpr double kStripe = 0.5;  // crosswalk stripe and gap width
};

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

Pixel world_to_pixel(const sim::Pose2D& ego, sim::Vec2 p, const CameraSpec& cam);
sim::Vec2 pixel_to_world(const sim::Pose2D& ego, Pixel px, const CameraSpec& cam);

Image render(const sim::Scene& scene, const CameraSpec& cam);

}  // namespace trajlab::render
