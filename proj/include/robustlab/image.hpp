#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace robustlab {

/// 8-bit RGB raster, row-major interleaved.
struct RasterImage {
  static constexpr int kChannels = 3;

  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  static RasterImage filled(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b);

  std::uint8_t& at(int x, int y, int c) {
    return data[static_cast<std::size_t>(y * width + x) * kChannels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data[static_cast<std::size_t>(y * width + x) * kChannels + c];
  }

  std::size_t sample_count() const { return data.size(); }
  bool same_shape(const RasterImage& o) const {
    return width == o.width && height == o.height;
  }

  bool operator==(const RasterImage&) const = default;
};

/// Content hash over dimensions and samples (FNV-1a).
std::uint64_t pixel_hash(const RasterImage& img);

/// Mean squared error over all samples. Throws DimensionMismatch.
double image_mse(const RasterImage& a, const RasterImage& b);

/// PNG I/O. Non-RGB8 inputs (palette, gray, alpha, 16-bit) are converted
/// to 8-bit RGB on read. Throws ImageDecodeError / Error.
RasterImage read_png(const std::string& path);
void write_png(const RasterImage& img, const std::string& path);
std::vector<std::uint8_t> encode_png(const RasterImage& img);

/// In-memory JPEG encode/decode round trip at the given quality (1..100).
RasterImage jpeg_round_trip(const RasterImage& img, int quality);

}  // namespace robustlab
