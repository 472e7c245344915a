#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hep2/error.hpp"

namespace hep2 {

// Dense row-major 2-D map of doubles.
class Map2D {
 public:
  Map2D() = default;
  Map2D(std::size_t height, std::size_t width, double fill = 0.0)
      : height_(height), width_(width), values_(height * width, fill) {}
  Map2D(std::size_t height, std::size_t width, std::vector<double> values)
      : height_(height), width_(width), values_(std::move(values)) {
    if (values_.size() != height_ * width_)
      fail(ErrorKind::shape, "Map2D: values length does not equal height*width");
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t row, std::size_t col) { return values_[row * width_ + col]; }
  double operator()(std::size_t row, std::size_t col) const { return values_[row * width_ + col]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool operator==(const Map2D&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> values_;
};

// A set of equally sized maps stored back to back (map-major, then row, then
// column). This is also the flattening order used when feeding the first
// fully-connected layer.
class FeatureStack {
 public:
  FeatureStack() = default;
  FeatureStack(std::size_t depth, std::size_t height, std::size_t width, double fill = 0.0)
      : depth_(depth), height_(height), width_(width), data_(depth * height * width, fill) {}
  explicit FeatureStack(const std::vector<Map2D>& maps);
  explicit FeatureStack(const Map2D& map) : FeatureStack(std::vector<Map2D>{map}) {}

  std::size_t depth() const noexcept { return depth_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t map_size() const noexcept { return height_ * width_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> map(std::size_t j) { return {data_.data() + j * map_size(), map_size()}; }
  std::span<const double> map(std::size_t j) const {
    return {data_.data() + j * map_size(), map_size()};
  }
  Map2D to_map(std::size_t j) const;

  double& at(std::size_t j, std::size_t row, std::size_t col) {
    return data_[(j * height_ + row) * width_ + col];
  }
  double at(std::size_t j, std::size_t row, std::size_t col) const {
    return data_[(j * height_ + row) * width_ + col];
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool same_shape(const FeatureStack& other) const noexcept {
    return depth_ == other.depth_ && height_ == other.height_ && width_ == other.width_;
  }
  bool operator==(const FeatureStack&) const = default;

 private:
  std::size_t depth_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

// Argmax positions selected by max-pooling: for each map, the flat
// (row * width + col) input index behind every output cell.
struct PoolTrace {
  std::size_t region = 0;
  std::size_t input_height = 0;
  std::size_t input_width = 0;
  std::size_t depth = 0;
  std::vector<std::uint32_t> argmax;  // depth * out_h * out_w entries, map-major
};

inline FeatureStack::FeatureStack(const std::vector<Map2D>& maps) {
  if (maps.empty()) fail(ErrorKind::shape, "FeatureStack: needs at least one map");
  depth_ = maps.size();
  height_ = maps.front().height();
  width_ = maps.front().width();
  data_.reserve(depth_ * height_ * width_);
  for (const auto& m : maps) {
    if (m.height() != height_ || m.width() != width_)
      fail(ErrorKind::shape, "FeatureStack: member maps differ in size");
    data_.insert(data_.end(), m.values().begin(), m.values().end());
  }
}

inline Map2D FeatureStack::to_map(std::size_t j) const {
  auto src = map(j);
  return Map2D(height_, width_, std::vector<double>(src.begin(), src.end()));
}

}  // namespace hep2
