#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hep2/map2d.hpp"

namespace hep2 {

// Single-channel image. Real-valued; after contrast normalization the
// pixels lie in [0, 1].
class GrayImage : public Map2D {
 public:
  using Map2D::Map2D;
  explicit GrayImage(Map2D map) : Map2D(std::move(map)) {}
};

// Foreground flags, one byte per pixel (0 or 1).
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(std::size_t height, std::size_t width, bool fill = false)
      : height_(height), width_(width), flags_(height * width, fill ? 1 : 0) {}

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  bool operator()(std::size_t row, std::size_t col) const { return flags_[row * width_ + col] != 0; }
  void set(std::size_t row, std::size_t col, bool on) { flags_[row * width_ + col] = on ? 1 : 0; }
  std::size_t count() const;

  bool operator==(const BinaryMask&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> flags_;
};

// Decoded raster exactly as stored: 1 (gray) or 3 (RGB) interleaved channels
// with integer samples in [0, max_value].
struct RasterImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::uint32_t max_value = 255;
  std::vector<std::uint16_t> samples;

  std::uint16_t sample(std::size_t row, std::size_t col, std::size_t ch) const {
    return samples[(row * width + col) * channels + ch];
  }
};

// Netpbm codec: P2/P5 grayscale (8- or 16-bit), P3/P6 RGB (8- or 16-bit).
RasterImage decode_netpbm(std::istream& in);
RasterImage read_netpbm(const std::filesystem::path& path);
void encode_netpbm(std::ostream& out, const RasterImage& image);
void write_netpbm(const std::filesystem::path& path, const RasterImage& image);

// Intensities of a raster as a GrayImage: identity for gray, the green
// channel for RGB.
GrayImage raster_to_gray(const RasterImage& raster);
// Quantize a [0,1] image (values clamped) to a raster with the given depth.
RasterImage gray_to_raster(const GrayImage& image, int bits = 8);

BinaryMask raster_to_mask(const RasterImage& raster);  // non-zero is foreground
RasterImage mask_to_raster(const BinaryMask& mask);     // foreground stored as 255

GrayImage read_gray(const std::filesystem::path& path);
BinaryMask read_mask(const std::filesystem::path& path);
void write_gray(const std::filesystem::path& path, const GrayImage& image, int bits = 8);
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);

}  // namespace hep2
