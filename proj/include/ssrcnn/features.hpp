#pragma once

#include <cstddef>
#include <vector>

#include "ssrcnn/geometry.hpp"
#include "ssrcnn/numerics.hpp"

namespace ssrcnn {

inline constexpr std::size_t kPoolSize = 7;

// Channel-major C x H x W feature map over the normalized image [0,1]^2.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t channels, std::size_t height, std::size_t width,
             std::vector<double> values);

  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  const std::vector<double>& values() const { return values_; }

  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return values_[(c * height_ + y) * width_ + x];
  }

  // Bilinear sample of every channel at normalized (u, v); coordinates
  // outside the map are clamped to its border.
  void sample(double u, double v, std::span<double> out) const;

  // Bilinear RoI pooling to a fixed pool x pool grid, one sample at each bin
  // centre. Returns C x (pool * pool), row c holding channel c in row-major
  // spatial order.
  Matrix roi_pool(const Box& box, std::size_t pool = kPoolSize) const;

 private:
  std::size_t channels_ = 0, height_ = 0, width_ = 0;
  std::vector<double> values_;
};

}  // namespace ssrcnn
