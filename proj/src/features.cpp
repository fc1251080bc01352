#include "ssrcnn/features.hpp"

#include <algorithm>
#include <cmath>

#include "ssrcnn/error.hpp"

namespace ssrcnn {

FeatureMap::FeatureMap(std::size_t channels, std::size_t height, std::size_t width,
                       std::vector<double> values)
    : channels_(channels), height_(height), width_(width), values_(std::move(values)) {
  if (channels == 0 || height == 0 || width == 0) throw DimensionMismatch("empty feature map");
  if (values_.size() != channels * height * width)
    throw DimensionMismatch("feature map value count does not match C x H x W");
  require_finite(values_, "feature map");
}

void FeatureMap::sample(double u, double v, std::span<double> out) const {
  // Pixel centres sit at (i + 0.5) / size.
  const double px = std::clamp(u * double(width_) - 0.5, 0.0, double(width_ - 1));
  const double py = std::clamp(v * double(height_) - 0.5, 0.0, double(height_ - 1));
  const auto x0 = static_cast<std::size_t>(std::floor(px));
  const auto y0 = static_cast<std::size_t>(std::floor(py));
  const std::size_t x1 = std::min(x0 + 1, width_ - 1);
  const std::size_t y1 = std::min(y0 + 1, height_ - 1);
  const double fx = px - double(x0);
  const double fy = py - double(y0);
  for (std::size_t c = 0; c < channels_; ++c) {
    const double top = at(c, y0, x0) * (1.0 - fx) + at(c, y0, x1) * fx;
    const double bottom = at(c, y1, x0) * (1.0 - fx) + at(c, y1, x1) * fx;
    out[c] = top * (1.0 - fy) + bottom * fy;
  }
}

Matrix FeatureMap::roi_pool(const Box& box, std::size_t pool) const {
  if (pool == 0) throw InvalidArgument("roi_pool size must be positive");
  const CornerBox c = box.corners();
  Matrix out(channels_, pool * pool);
  std::vector<double> px(channels_);
  for (std::size_t by = 0; by < pool; ++by) {
    const double v = c.y1 + (double(by) + 0.5) / double(pool) * box.h();
    for (std::size_t bx = 0; bx < pool; ++bx) {
      const double u = c.x1 + (double(bx) + 0.5) / double(pool) * box.w();
      sample(u, v, px);
      for (std::size_t ch = 0; ch < channels_; ++ch) out(ch, by * pool + bx) = px[ch];
    }
  }
  return out;
}

}  // namespace ssrcnn
