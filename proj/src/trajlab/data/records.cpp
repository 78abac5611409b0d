#include "trajlab/data/records.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "trajlab/data/ppm.hpp"
#include "trajlab/error.hpp"

namespace trajlab::data {

using nlohmann::json;

std::string format_real(double v) {
  if (!std::isfinite(v)) fail(ErrorKind::Numeric, "record value is not finite");
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_record(const FrameRecord& r) {
  std::string s = "{\"frame\":" + std::to_string(r.frame);
  s += ",\"time_s\":" + format_real(r.time_s);
  s += ",\"image\":" + json(r.image).dump();
  s += ",\"odom\":{\"x\":" + format_real(r.odom.x) + ",\"y\":" + format_real(r.odom.y) +
       ",\"yaw_deg\":" + format_real(r.odom.yaw_deg) + ",\"speed\":" + format_real(r.odom.speed) +
       "}";
  s += ",\"imu\":{\"ax\":" + format_real(r.imu.ax) + ",\"ay\":" + format_real(r.imu.ay) +
       ",\"wz\":" + format_real(r.imu.wz) + "}}";
  return s;
}

namespace {

[[noreturn]] void line_error(std::size_t line_no, const std::string& what) {
  fail(ErrorKind::Format, "records line " + std::to_string(line_no) + ": " + what);
}

void require_keys(const json& obj, const std::set<std::string>& keys, const std::string& where,
                  std::size_t line_no) {
  if (!obj.is_object()) line_error(line_no, where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!keys.count(it.key())) line_error(line_no, "unknown field '" + it.key() + "' in " + where);
  for (const auto& k : keys)
    if (!obj.contains(k)) line_error(line_no, "missing field '" + k + "' in " + where);
}

double number(const json& obj, const char* key, std::size_t line_no) {
  const json& v = obj.at(key);
  if (!v.is_number()) line_error(line_no, std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

}  // namespace

FrameRecord parse_record(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    line_error(line_no, std::string("parse failure: ") + e.what());
  }
  require_keys(j, {"frame", "time_s", "image", "odom", "imu"}, "record", line_no);
  require_keys(j["odom"], {"x", "y", "yaw_deg", "speed"}, "odom", line_no);
  require_keys(j["imu"], {"ax", "ay", "wz"}, "imu", line_no);
  if (!j["frame"].is_number_integer()) line_error(line_no, "field 'frame' must be an integer");
  if (!j["image"].is_string()) line_error(line_no, "field 'image' must be a string");
  FrameRecord r;
  r.frame = j["frame"].get<std::int64_t>();
  r.time_s = number(j, "time_s", line_no);
  r.image = j["image"].get<std::string>();
  r.odom = {number(j["odom"], "x", line_no), number(j["odom"], "y", line_no),
            number(j["odom"], "yaw_deg", line_no), number(j["odom"], "speed", line_no)};
  r.imu = {number(j["imu"], "ax", line_no), number(j["imu"], "ay", line_no),
           number(j["imu"], "wz", line_no)};
  return r;
}

std::string format_records(const std::vector<FrameRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += format_record(r);
    out += '\n';
  }
  return out;
}

std::vector<FrameRecord> parse_records(const std::string& text) {
  std::vector<FrameRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) line_error(line_no, "empty line");
    FrameRecord r = parse_record(line, line_no);
    if (!out.empty() && r.frame <= out.back().frame)
      line_error(line_no, "frame index " + std::to_string(r.frame) +
                              " not greater than previous " + std::to_string(out.back().frame));
    out.push_back(std::move(r));
  }
  return out;
}

void write_records(const std::filesystem::path& path, const std::vector<FrameRecord>& records) {
  write_file_text(path, format_records(records));
}

std::vector<FrameRecord> read_records(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return parse_records(std::string(bytes.begin(), bytes.end()));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Format) fail(ErrorKind::Format, path.string() + ": " + e.what());
    throw;
  }
}

}  // namespace trajlab::data
