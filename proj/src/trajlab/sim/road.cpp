#include "trajlab/sim/road.hpp"

#include <cmath>
#include <numbers>

#include "trajlab/error.hpp"

namespace trajlab::sim {

namespace {

Pose2D advance(const RoadSegment& seg, double ds) {
  const Pose2D& p = seg.start;
  if (!seg.is_arc()) return {p.x + ds * std::cos(p.yaw), p.y + ds * std::sin(p.yaw), p.yaw};
  const double k = seg.curvature;
  const double yaw = p.yaw + k * ds;
  return {p.x + (std::sin(yaw) - std::sin(p.yaw)) / k,
          p.y - (std::cos(yaw) - std::cos(p.yaw)) / k, normalize_angle(yaw)};
}

}  // namespace

double RoadSpec::length() const {
  return segments.empty() ? 0.0 : segments.back().end_s() - segments.front().start_s;
}

const RoadSegment& RoadSpec::segment_at(double s) const {
  if (segments.empty()) fail(ErrorKind::Parameter, "road has no segments");
  for (const auto& seg : segments)
    if (s < seg.end_s()) return seg;
  return segments.back();
}

Pose2D RoadSpec::pose_at(double s) const {
  if (segments.empty()) fail(ErrorKind::Parameter, "road has no segments");
  const RoadSegment& first = segments.front();
  if (s < first.start_s) {
    RoadSegment tail = first;
    tail.curvature = 0.0;
    return advance(tail, s - first.start_s);
  }
  const RoadSegment& last = segments.back();
  if (s >= last.end_s()) {
    RoadSegment tail{advance(last, last.length), last.end_s(), 0.0, 0.0};
    return advance(tail, s - last.end_s());
  }
  const RoadSegment& seg = segment_at(s);
  return advance(seg, s - seg.start_s);
}

double RoadSpec::curvature_at(double s) const {
  if (segments.empty()) return 0.0;
  if (s < segments.front().start_s || s >= segments.back().end_s()) return 0.0;
  return segment_at(s).curvature;
}

Pose2D RoadSpec::frenet_to_pose(Frenet f) const {
  const Pose2D c = pose_at(f.s);
  const Vec2 p = c.position() + f.d * left_normal(c.yaw);
  return {p.x, p.y, c.yaw};
}

void RoadSpec::project_all(Vec2 p, std::vector<Frenet>& out) const {
  out.clear();
  const std::size_t n = segments.size();
  for (std::size_t i = 0; i < n; ++i) {
    const RoadSegment& seg = segments[i];
    const bool open_start = i == 0;
    const bool open_end = i + 1 == n;
    if (!seg.is_arc()) {
      const Vec2 rel = p - seg.start.position();
      const double t = dot(rel, heading_vec(seg.start.yaw));
      if ((t >= 0.0 || open_start) && (t <= seg.length || open_end))
        out.push_back({seg.start_s + t, dot(rel, left_normal(seg.start.yaw))});
      continue;
    }
    const double k = seg.curvature;
    const Vec2 center = seg.start.position() + (1.0 / k) * left_normal(seg.start.yaw);
    const Vec2 rel = p - center;
    const double r = norm(rel);
    if (r == 0.0) continue;
    const Vec2 r0 = seg.start.position() - center;
    // Angle travelled from the start, measured in the direction of travel.
    double phi = std::atan2(r0.x * rel.y - r0.y * rel.x, dot(r0, rel));
    if (k < 0) phi = -phi;
    if (phi < 0) phi += 2.0 * std::numbers::pi;
    const double t = phi * seg.radius();
    if (t <= seg.length)
      out.push_back({seg.start_s + t, k > 0 ? seg.radius() - r : r - seg.radius()});
    // straight tails when the arc is the first or last segment
    if (open_start || open_end) {
      if (open_start) {
        const Vec2 rs = p - seg.start.position();
        const double ts = dot(rs, heading_vec(seg.start.yaw));
        if (ts < 0.0) out.push_back({seg.start_s + ts, dot(rs, left_normal(seg.start.yaw))});
      }
      if (open_end) {
        const Pose2D e = advance(seg, seg.length);
        const Vec2 re = p - e.position();
        const double te = dot(re, heading_vec(e.yaw));
        if (te > 0.0) out.push_back({seg.end_s() + te, dot(re, left_normal(e.yaw))});
      }
    }
  }
}

void append_segment(RoadSpec& road, double length, double curvature) {
  if (!(length > 0.0)) fail(ErrorKind::Parameter, "road segment length must be positive");
  if (curvature != 0.0 && 1.0 / std::abs(curvature) < 8.0)
    fail(ErrorKind::Parameter, "road arc radius must be at least 8 m");
  RoadSegment seg;
  if (road.segments.empty()) {
    seg.start = {0.0, 0.0, 0.0};
    seg.start_s = 0.0;
  } else {
    const RoadSegment& last = road.segments.back();
    seg.start = advance(last, last.length);
    seg.start_s = last.end_s();
  }
  seg.length = length;
  seg.curvature = curvature;
  road.segments.push_back(seg);
}

}  // namespace trajlab::sim
