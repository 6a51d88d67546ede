#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hapmap/types.hpp"

namespace hapmap {

/// A single depth raster. Raw values are scaled by Intrinsics::depth_scale
/// to obtain millimeters; 0 means no return.
struct DepthFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> data;

  DepthFrame() = default;
  DepthFrame(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {}

  std::uint16_t at(int u, int v) const { return data[static_cast<std::size_t>(v) * width + u]; }
  std::uint16_t& at(int u, int v) { return data[static_cast<std::size_t>(v) * width + u]; }
};

/// Pinhole camera model. Defaults describe a Kinect V1 class sensor.
struct Intrinsics {
  int width = 640;
  int height = 480;
  double fx = 575.8;
  double fy = 575.8;
  double cx = 319.5;
  double cy = 239.5;
  double depth_scale = 1.0;  // millimeters per raw unit

  /// Throws Error when focal lengths are not positive or the principal
  /// point lies outside the image.
  void validate() const;

  /// Horizontal field of view in radians.
  double hfov() const;
};

/// Parses "key=value" lines (fx, fy, cx, cy, depth_scale, width, height).
/// Blank lines and lines starting with '#' are ignored.
Intrinsics parse_intrinsics(std::string_view text);
Intrinsics load_intrinsics_file(const std::filesystem::path& path);
std::string format_intrinsics(const Intrinsics& k);

// Flat binary depth format: "HDPT", u32 width, u32 height, u16 payload, all
// little-endian.
inline constexpr std::string_view kRawDepthMagic = "HDPT";

/// Decodes a binary PGM (P5, maxval <= 65535, 16-bit samples big-endian) or
/// the flat HDPT format.
DepthFrame load_depth(std::span<const std::uint8_t> bytes);
DepthFrame load_depth_file(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_depth_pgm(const DepthFrame& frame);
std::vector<std::uint8_t> encode_depth_raw(const DepthFrame& frame);

/// 8-bit P5 image of a mask (0 / 255).
std::vector<std::uint8_t> encode_mask_pgm(const PixelMask& mask);
PixelMask decode_mask_pgm(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Depth of one pixel in millimeters.
inline double depth_mm(const DepthFrame& f, int u, int v, const Intrinsics& k) {
  return f.at(u, v) * k.depth_scale;
}

inline Vec3 pixel_to_point(double u, double v, double z, const Intrinsics& k) {
  return {(u - k.cx) * z / k.fx, (k.cy - v) * z / k.fy, z};
}

/// Back-projects every valid pixel (raw depth > 0) in row-major order.
/// Pixels set in `skip` (same dimensions as the frame) are omitted.
PointCloud backproject(const DepthFrame& frame, const Intrinsics& k,
                       const PixelMask* skip = nullptr, Exec exec = Exec::parallel);

/// Keeps points with zmin <= z <= zmax, preserving order.
PointCloud passthrough_filter(const PointCloud& cloud, double zmin, double zmax);

}  // namespace hapmap
