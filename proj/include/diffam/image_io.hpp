#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "diffam/types.hpp"

namespace diffam {

/// 8-bit single-channel raster, row-major.
struct GrayImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;
};

/// p / 127.5 - 1
inline double from_byte(std::uint8_t p) { return p / 127.5 - 1.0; }
/// Inverse of from_byte with round-half-away-from-zero and clamping.
std::uint8_t to_byte(double v);

ImageBuffer decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const ImageBuffer& img);

ImageBuffer load_image(const std::filesystem::path& path);
void save_image(const ImageBuffer& img, const std::filesystem::path& path);

GrayImage load_gray_png(const std::filesystem::path& path);
void save_gray_png(const GrayImage& img, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace diffam
