#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace ovs {

// Planar-interleaved float raster. Channel values live in [0,1] for color,
// {0,1} for masks. Origin at top-left, x rightward, y downward.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.f)
      : width(w), height(h), channels(c),
        data(static_cast<size_t>(w) * h * c, fill) {
    if (w < 0 || h < 0 || c < 1) throw std::invalid_argument("bad image dims");
  }

  bool empty() const { return width == 0 || height == 0; }
  size_t pixels() const { return static_cast<size_t>(width) * height; }

  float& at(int x, int y, int c = 0) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  float at(int x, int y, int c = 0) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  // Replicate-border read.
  float at_clamped(int x, int y, int c = 0) const {
    x = std::clamp(x, 0, width - 1);
    y = std::clamp(y, 0, height - 1);
    return at(x, y, c);
  }

  bool same_dims(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

using Mask = Image;     // single channel, values in {0,1}
using EdgeMap = Image;  // single channel, non-negative magnitudes

inline Mask make_mask(int w, int h, float fill = 0.f) { return Mask(w, h, 1, fill); }

inline double mask_area(const Mask& m) {
  double s = 0;
  for (float v : m.data) s += v;
  return s;
}

struct Rect {
  int x = 0, y = 0, w = 0, h = 0;
  bool contains(int px, int py) const {
    return px >= x && px < x + w && py >= y && py < y + h;
  }
};

// Padded frame plus validity mask. The out-of-boundary band starts invalid
// and is filled in by alignment/compositing.
struct Canvas {
  Image color;  // 3 channels
  Mask mask;    // 1 channel
  int pad = 0;

  Rect inner_rect() const {
    return {pad, pad, color.width - 2 * pad, color.height - 2 * pad};
  }
};

// Per-pixel displacement (u,v) in pixels plus validity mask. Stored in
// double: the propagation iteration and its oracle compare at 1e-9.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<double> u, v;
  Mask valid;

  FlowField() = default;
  FlowField(int w, int h)
      : width(w), height(h),
        u(static_cast<size_t>(w) * h, 0.0),
        v(static_cast<size_t>(w) * h, 0.0),
        valid(w, h, 1, 0.f) {}

  size_t idx(int x, int y) const { return static_cast<size_t>(y) * width + x; }
};

struct BilinearSample {
  float value = 0.f;
  bool inside = false;  // center of support intersects the raster
};

// Bilinear blend of the 4 neighbors, zero outside the raster. Samples whose
// whole footprint lies outside return 0 and inside=false.
inline BilinearSample sample_bilinear(const Image& img, double x, double y, int c = 0) {
  BilinearSample s;
  if (x <= -1.0 || y <= -1.0 || x >= img.width || y >= img.height) return s;
  s.inside = true;
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  auto pick = [&](int xi, int yi) -> double {
    if (xi < 0 || yi < 0 || xi >= img.width || yi >= img.height) return 0.0;
    return img.at(xi, yi, c);
  };
  const double v00 = pick(x0, y0), v10 = pick(x0 + 1, y0);
  const double v01 = pick(x0, y0 + 1), v11 = pick(x0 + 1, y0 + 1);
  s.value = static_cast<float>((1 - fy) * ((1 - fx) * v00 + fx * v10) +
                               fy * ((1 - fx) * v01 + fx * v11));
  return s;
}

// Mask sampling: bilinear then re-binarized at 0.5.
inline float sample_mask(const Mask& m, double x, double y) {
  const BilinearSample s = sample_bilinear(m, x, y, 0);
  return (s.inside && s.value >= 0.5f) ? 1.f : 0.f;
}

inline Canvas pad_frame(const Image& frame, int pad) {
  if (pad < 0) throw std::invalid_argument("pad must be >= 0");
  Canvas c;
  c.pad = pad;
  c.color = Image(frame.width + 2 * pad, frame.height + 2 * pad, frame.channels, 0.f);
  c.mask = make_mask(c.color.width, c.color.height, 0.f);
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x) {
      for (int ch = 0; ch < frame.channels; ++ch)
        c.color.at(x + pad, y + pad, ch) = frame.at(x, y, ch);
      c.mask.at(x + pad, y + pad) = 1.f;
    }
  return c;
}

inline Image crop(const Image& img, const Rect& r) {
  Image out(r.w, r.h, img.channels);
  for (int y = 0; y < r.h; ++y)
    for (int x = 0; x < r.w; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(x, y, c) = img.at(x + r.x, y + r.y, c);
  return out;
}

// ITU-R BT.601 luminance.
inline Image to_luma(const Image& img) {
  if (img.channels == 1) return img;
  Image g(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      g.at(x, y) = 0.299f * img.at(x, y, 0) + 0.587f * img.at(x, y, 1) +
                   0.114f * img.at(x, y, 2);
  return g;
}

// Gradient magnitude from 3x3 Sobel kernels on luminance, replicate border.
inline EdgeMap sobel_edges(const Image& frame) {
  if (frame.empty()) throw std::invalid_argument("sobel_edges: empty frame");
  const Image g = to_luma(frame);
  EdgeMap e(g.width, g.height, 1);
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) {
      const double p00 = g.at_clamped(x - 1, y - 1), p10 = g.at_clamped(x, y - 1),
                   p20 = g.at_clamped(x + 1, y - 1);
      const double p01 = g.at_clamped(x - 1, y), p21 = g.at_clamped(x + 1, y);
      const double p02 = g.at_clamped(x - 1, y + 1), p12 = g.at_clamped(x, y + 1),
                   p22 = g.at_clamped(x + 1, y + 1);
      const double gx = (p20 + 2 * p21 + p22) - (p00 + 2 * p01 + p02);
      const double gy = (p02 + 2 * p12 + p22) - (p00 + 2 * p10 + p20);
      e.at(x, y) = static_cast<float>(std::sqrt(gx * gx + gy * gy));
    }
  return e;
}

inline Image resize_bilinear(const Image& img, int w, int h) {
  Image out(w, h, img.channels);
  const double sx = static_cast<double>(img.width) / w;
  const double sy = static_cast<double>(img.height) / h;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double src_x = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
      const double src_y = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
      for (int c = 0; c < img.channels; ++c)
        out.at(x, y, c) = sample_bilinear(img, src_x, src_y, c).value;
    }
  return out;
}

inline Image downscale_half(const Image& img) {
  const int w = std::max(1, img.width / 2), h = std::max(1, img.height / 2);
  Image out(w, h, img.channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < img.channels; ++c) {
        const float a = img.at_clamped(2 * x, 2 * y, c) + img.at_clamped(2 * x + 1, 2 * y, c) +
                        img.at_clamped(2 * x, 2 * y + 1, c) + img.at_clamped(2 * x + 1, 2 * y + 1, c);
        out.at(x, y, c) = 0.25f * a;
      }
  return out;
}

// For every pixel, the linear index of the nearest mask-1 pixel (Euclidean
// distance, ties broken by the smaller linear index). Pixels of an all-zero
// mask map to index 0. Two-pass scan: exact nearest row per column, then an
// outward column sweep per row.
inline std::vector<size_t> nearest_valid_map(const Mask& mask) {
  const int w = mask.width, h = mask.height;
  constexpr int kNone = std::numeric_limits<int>::max();
  std::vector<int> nearest_row(static_cast<size_t>(w) * h, kNone);
  for (int x = 0; x < w; ++x) {
    int last = kNone;
    for (int y = 0; y < h; ++y) {
      if (mask.at(x, y) >= 0.5f) last = y;
      if (last != kNone) nearest_row[static_cast<size_t>(y) * w + x] = last;
    }
    last = kNone;
    for (int y = h - 1; y >= 0; --y) {
      if (mask.at(x, y) >= 0.5f) last = y;
      if (last == kNone) continue;
      int& cur = nearest_row[static_cast<size_t>(y) * w + x];
      if (cur == kNone || std::abs(last - y) < std::abs(cur - y)) cur = last;
    }
  }

  std::vector<size_t> witness(static_cast<size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t i = static_cast<size_t>(y) * w + x;
      if (mask.data[i] >= 0.5f) {
        witness[i] = i;
        continue;
      }
      long best = std::numeric_limits<long>::max();
      size_t best_idx = 0;
      for (int d = 0; d < w; ++d) {
        if (static_cast<long>(d) * d > best) break;
        for (int sgn = 0; sgn < (d == 0 ? 1 : 2); ++sgn) {
          const int xc = sgn == 0 ? x - d : x + d;
          if (xc < 0 || xc >= w) continue;
          const int yc = nearest_row[static_cast<size_t>(y) * w + xc];
          if (yc == kNone) continue;
          const long dy = yc - y;
          const long dist = static_cast<long>(d) * d + dy * dy;
          const size_t cand = static_cast<size_t>(yc) * w + xc;
          if (dist < best || (dist == best && cand < best_idx)) {
            best = dist;
            best_idx = cand;
          }
        }
      }
      witness[i] = best_idx;
    }
  return witness;
}

// Default padding: 80 px per side at 640x480 input, scaling as width/8.
inline int default_pad(int width) { return static_cast<int>(std::lround(width / 8.0)); }

struct DimensionMismatch : std::runtime_error {
  explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ovs
