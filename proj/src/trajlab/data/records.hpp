#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace trajlab::data {

struct Odometry {
  double x = 0.0;        // m
  double y = 0.0;        // m
  double yaw_deg = 0.0;  // degrees
  double speed = 0.0;    // m/s
  friend bool operator==(const Odometry&, const Odometry&) = default;
};

struct Imu {
  double ax = 0.0;  // longitudinal, m/s^2
  double ay = 0.0;  // lateral, m/s^2
  double wz = 0.0;  // yaw rate, rad/s
  friend bool operator==(const Imu&, const Imu&) = default;
};

struct FrameRecord {
  std::int64_t frame = 0;
  double time_s = 0.0;
  std::string image;  // relative to the episode directory
  Odometry odom;
  Imu imu;
  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

// Shortest decimal that reads back to the same double.
std::string format_real(double v);

// {"frame":..,"time_s":..,"image":..,"odom":{x,y,yaw_deg,speed},"imu":{ax,ay,wz}}
std::string format_record(const FrameRecord& r);
FrameRecord parse_record(const std::string& line, std::size_t line_no);

std::string format_records(const std::vector<FrameRecord>& records);
std::vector<FrameRecord> parse_records(const std::string& text);

void write_records(const std::filesystem::path& path, const std::vector<FrameRecord>& records);
std::vector<FrameRecord> read_records(const std::filesystem::path& path);

}  // namespace trajlab::data
