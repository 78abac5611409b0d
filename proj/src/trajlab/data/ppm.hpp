#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trajlab/render/bev.hpp"

namespace trajlab::data {

// Binary PPM (P6, maxval 255), one whitespace byte after each header token.
std::vector<std::uint8_t> encode_ppm(const render::Image& img);
render::Image decode_ppm(const std::vector<std::uint8_t>& bytes);

void write_image(const std::filesystem::path& path, const render::Image& img);
render::Image read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_file_text(const std::filesystem::path& path, const std::string& text);
// Writes to a sibling temporary and renames over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace trajlab::data
