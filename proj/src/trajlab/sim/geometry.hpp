#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace trajlab::sim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double k, Vec2 a) { return {k * a.x, k * a.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline Vec2 heading_vec(double yaw) { return {std::cos(yaw), std::sin(yaw)}; }
inline Vec2 left_normal(double yaw) { return {-std::sin(yaw), std::cos(yaw)}; }

// Maps into (-pi, pi].
inline double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

struct Pose2D {
  double x = 0.0;    // m
  double y = 0.0;    // m
  double yaw = 0.0;  // rad, (-pi, pi]

  Vec2 position() const { return {x, y}; }
  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

// Ego frame: x to the right, y forward. World -> ego translates by -position
// and rotates by -yaw.
inline Vec2 world_to_ego(const Pose2D& ego, Vec2 p) {
  const Vec2 d = p - ego.position();
  return {-dot(d, left_normal(ego.yaw)), dot(d, heading_vec(ego.yaw))};
}

inline Vec2 ego_to_world(const Pose2D& ego, Vec2 e) {
  return ego.position() + e.y * heading_vec(ego.yaw) + (-e.x) * left_normal(ego.yaw);
}

// Rectangle centered on a pose; half-extents along (heading, left).
struct OrientedBox {
  Pose2D pose;
  double half_length = 0.0;
  double half_width = 0.0;

  std::array<Vec2, 4> corners() const {
    const Vec2 f = heading_vec(pose.yaw), l = left_normal(pose.yaw);
    const Vec2 c = pose.position();
    return {c + half_length * f + half_width * l, c + half_length * f - half_width * l,
            c - half_length * f - half_width * l, c - half_length * f + half_width * l};
  }
};

// Separating-axis test; touching boxes count as overlapping.
inline bool overlaps(const OrientedBox& a, const OrientedBox& b) {
  const auto ca = a.corners(), cb = b.corners();
  const Vec2 axes[4] = {heading_vec(a.pose.yaw), left_normal(a.pose.yaw),
                        heading_vec(b.pose.yaw), left_normal(b.pose.yaw)};
  for (const Vec2& ax : axes) {
    double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
    for (const Vec2& p : ca) {
      const double t = dot(p, ax);
      amin = std::fmin(amin, t);
      amax = std::fmax(amax, t);
    }
    for (const Vec2& p : cb) {
      const double t = dot(p, ax);
      bmin = std::fmin(bmin, t);
      bmax = std::fmax(bmax, t);
    }
    if (amax < bmin || bmax < amin) return false;
  }
  return true;
}

}  // namespace trajlab::sim
