#pragma once

#include <optional>
#include <vector>

#include "trajlab/sim/geometry.hpp"

namespace trajlab::sim {

// One piece of the reference line: a straight (curvature 0) or a circular arc.
struct RoadSegment {
  Pose2D start;          // pose at the segment's first point
  double start_s = 0.0;  // arc length at start
  double length = 0.0;
  double curvature = 0.0;  // 1/m, positive turns left

  bool is_arc() const { return curvature != 0.0; }
  double radius() const { return 1.0 / std::abs(curvature); }
  double end_s() const { return start_s + length; }
};

struct Crosswalk {
  double s = 0.0;      // center arc-length position
  double width = 4.0;  // extent along the road
};

// Frenet coordinates relative to the reference line: arc length and signed
// lateral offset (left positive).
struct Frenet {
  double s = 0.0;
  double d = 0.0;
};

// Road geometry. The reference line is the ego lane center; the oncoming lane
// lies one lane width to the left. Queries beyond either end extrapolate the
// terminal tangent, so the road is usable for any episode length.
struct RoadSpec {
  std::vector<RoadSegment> segments;
  double lane_width = 3.5;
  std::vector<Crosswalk> crosswalks;

  double length() const;
  double left_edge() const { return 1.5 * lane_width; }
  double right_edge() const { return -0.5 * lane_width; }

  const RoadSegment& segment_at(double s) const;
  Pose2D pose_at(double s) const;
  double curvature_at(double s) const;
  Pose2D frenet_to_pose(Frenet f) const;

  // Every segment whose parameter range (extended at the road ends) covers the
  // point's projection. Used by the rasterizer.
  void project_all(Vec2 p, std::vector<Frenet>& out) const;
};

// Appends a segment continuing tangentially from the last one.
void append_segment(RoadSpec& road, double length, double curvature);

}  // namespace trajlab::sim
