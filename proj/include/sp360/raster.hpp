#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace sp360 {

/// Dense row-major image with interleaved channels. Values are double so that
/// renders, losses and their gradients share one representation; on disk they
/// are float32 (FRAS) or 8-bit (PNG).
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  Raster() = default;
  Raster(int w, int h, int c, double fill = 0.0);

  std::size_t size() const { return data.size(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool empty() const { return data.empty(); }

  double& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool same_shape(const Raster& other) const {
    return width == other.width && height == other.height && channels == other.channels;
  }

  friend bool operator==(const Raster&, const Raster&) = default;
};

/// Throws ShapeError unless the two rasters have identical dimensions.
void require_same_shape(const Raster& a, const Raster& b, const char* what);

// Portable float raster: "FRAS", u32 LE width, height, channels, then float32 LE
// row-major values.
std::vector<std::uint8_t> encode_fras(const Raster& raster);
Raster decode_fras(std::span<const std::uint8_t> bytes);

// 8-bit PNG with 1 (gray/mask) or 3 (RGB) channels. Values are clamped to
// [0,1] and rounded to the nearest of 256 levels.
std::vector<std::uint8_t> encode_png(const Raster& raster);
Raster decode_png(std::span<const std::uint8_t> bytes);

/// Writes PNG when the path ends in ".png", FRAS otherwise.
void save_raster(const std::filesystem::path& path, const Raster& raster);
/// Detects the format from the leading magic bytes.
Raster load_raster(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Box-filter downscale by an integer factor (>= 1).
Raster downscale(const Raster& raster, int factor);

}  // namespace sp360
