#include "trajlab/data/ppm.hpp"

#include <cctype>
#include <fstream>
#include <iterator>

#include "trajlab/error.hpp"

namespace trajlab::data {

namespace fs = std::filesystem;

std::vector<std::uint8_t> encode_ppm(const render::Image& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

namespace {

[[noreturn]] void format_error(std::size_t offset, const std::string& what) {
  fail(ErrorKind::Format, "ppm: " + what + " at byte offset " + std::to_string(offset));
}

// Parses a decimal token followed by exactly one whitespace byte.
long parse_token(const std::vector<std::uint8_t>& b, std::size_t& pos) {
  const std::size_t start = pos;
  long value = 0;
  while (pos < b.size() && std::isdigit(b[pos])) {
    value = value * 10 + (b[pos] - '0');
    if (value > 1'000'000) format_error(start, "header value too large");
    ++pos;
  }
  if (pos == start) format_error(pos, "expected decimal header value");
  if (pos >= b.size() || !std::isspace(b[pos])) format_error(pos, "expected whitespace");
  ++pos;
  return value;
}

}  // namespace

render::Image decode_ppm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 3 || bytes[0] != 'P' || bytes[1] != '6' || !std::isspace(bytes[2]))
    format_error(0, "bad magic (expected P6)");
  std::size_t pos = 3;
  const long w = parse_token(bytes, pos);
  const long h = parse_token(bytes, pos);
  const std::size_t maxval_pos = pos;
  const long maxval = parse_token(bytes, pos);
  if (w <= 0 || h <= 0) format_error(3, "non-positive dimensions");
  if (maxval != 255) format_error(maxval_pos, "maxval must be 255");
  const std::size_t expected = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  const std::size_t actual = bytes.size() - pos;
  if (actual != expected)
    format_error(pos, "payload length " + std::to_string(actual) + " != expected " +
                          std::to_string(expected));
  render::Image img(static_cast<int>(w), static_cast<int>(h));
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), img.pixels.begin());
  return img;
}

void write_image(const fs::path& path, const render::Image& img) {
  write_file_bytes(path, encode_ppm(img));
}

render::Image read_image(const fs::path& path) {
  try {
    return decode_ppm(read_file_bytes(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Format) fail(ErrorKind::Format, path.string() + ": " + e.what());
    throw;
  }
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

void write_file_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

void write_file_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  write_file_text(tmp, text);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace trajlab::data
