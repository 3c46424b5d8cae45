#pragma once

#include <random>

#include "ovs/image.hpp"
#include "ovs/synth.hpp"

namespace testutil {

inline ovs::Image textured(int w, int h, uint64_t seed = 1) {
  return ovs::make_panorama(w, h, seed);
}

// Content moves by (dx, dy): out(x, y) = src(x - dx, y - dy), zero outside.
inline ovs::Image translate_render(const ovs::Image& src, double dx, double dy) {
  ovs::Image out(src.width, src.height, src.channels, 0.f);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x)
      for (int c = 0; c < src.channels; ++c)
        out.at(x, y, c) = ovs::sample_bilinear(src, x - dx, y - dy, c).value;
  return out;
}

// Rotation by `angle` radians about the frame center; content rotates
// forward, i.e. out(q) = src(R^{-1}(q - c) + c).
inline ovs::Image rotate_render(const ovs::Image& src, double angle) {
  ovs::Image out(src.width, src.height, src.channels, 0.f);
  const double cx = (src.width - 1) / 2.0, cy = (src.height - 1) / 2.0;
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double sx = cx + ca * dx + sa * dy;
      const double sy = cy - sa * dx + ca * dy;
      for (int c = 0; c < src.channels; ++c)
        out.at(x, y, c) = ovs::sample_bilinear(src, sx, sy, c).value;
    }
  return out;
}

inline double psnr_full(const ovs::Image& a, const ovs::Image& b) {
  double mse = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.data.size());
  return mse <= 0 ? 99.0 : 10.0 * std::log10(1.0 / mse);
}

}  // namespace testutil
