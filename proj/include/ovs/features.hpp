#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ovs/image.hpp"

namespace ovs {

struct Keypoint {
  double x = 0, y = 0;    // position in the source (neighbor) frame
  double dx = 0, dy = 0;  // motion toward the reference frame
  float score = 0.f;      // detector response
};

struct TooFewKeypoints : std::runtime_error {
  explicit TooFewKeypoints(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void gradients(const Image& g, Image& gx, Image& gy) {
  gx = Image(g.width, g.height, 1);
  gy = Image(g.width, g.height, 1);
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) {
      gx.at(x, y) = 0.5f * (g.at_clamped(x + 1, y) - g.at_clamped(x - 1, y));
      gy.at(x, y) = 0.5f * (g.at_clamped(x, y + 1) - g.at_clamped(x, y - 1));
    }
}

// Box-filtered structure tensor, min-eigenvalue response.
inline Image shi_tomasi_response(const Image& gray, int window = 7) {
  Image gx, gy;
  gradients(gray, gx, gy);
  const int w = gray.width, h = gray.height, r = window / 2;

  // Summed-area tables of the tensor products.
  const int sw = w + 1, sh = h + 1;
  std::vector<double> sxx(static_cast<size_t>(sw) * sh, 0.0), sxy(sxx), syy(sxx);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t i = static_cast<size_t>(y + 1) * sw + x + 1;
      const size_t up = i - sw;
      const double a = gx.at(x, y), b = gy.at(x, y);
      sxx[i] = a * a + sxx[i - 1] + sxx[up] - sxx[up - 1];
      sxy[i] = a * b + sxy[i - 1] + sxy[up] - sxy[up - 1];
      syy[i] = b * b + syy[i - 1] + syy[up] - syy[up - 1];
    }
  auto box = [&](const std::vector<double>& s, int x0, int y0, int x1, int y1) {
    return s[static_cast<size_t>(y1 + 1) * sw + x1 + 1] - s[static_cast<size_t>(y0) * sw + x1 + 1] -
           s[static_cast<size_t>(y1 + 1) * sw + x0] + s[static_cast<size_t>(y0) * sw + x0];
  };

  Image resp(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
      const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
      const double a = box(sxx, x0, y0, x1, y1);
      const double b = box(sxy, x0, y0, x1, y1);
      const double c = box(syy, x0, y0, x1, y1);
      const double half = 0.5 * (a + c);
      const double root = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
      resp.at(x, y) = static_cast<float>(half - root);
    }
  return resp;
}

}  // namespace detail

// Shi-Tomasi corners with minimum spacing, strongest first. `valid` (optional)
// restricts detections to mask-1 pixels.
inline std::vector<Keypoint> detect_corners(const Image& gray, int max_points,
                                            double min_spacing = 10.0,
                                            const Mask* valid = nullptr) {
  const Image resp = detail::shi_tomasi_response(gray);
  const int margin = 11;  // keep the tracking window inside the raster

  // Erode the validity mask by the margin so the structure-tensor window never
  // touches invalid pixels: content/mask boundaries otherwise dominate the
  // response and suppress real texture corners.
  Mask eligible;
  if (valid) {
    Mask hpass = make_mask(gray.width, gray.height, 0.f);
    for (int y = 0; y < gray.height; ++y)
      for (int x = 0; x < gray.width; ++x) {
        float m = 1.f;
        for (int d = -margin; d <= margin && m >= 0.5f; ++d)
          m = std::min(m, valid->at_clamped(x + d, y));
        hpass.at(x, y) = m >= 0.5f ? 1.f : 0.f;
      }
    eligible = make_mask(gray.width, gray.height, 0.f);
    for (int y = 0; y < gray.height; ++y)
      for (int x = 0; x < gray.width; ++x) {
        float m = 1.f;
        for (int d = -margin; d <= margin && m >= 0.5f; ++d)
          m = std::min(m, hpass.at_clamped(x, y + d));
        eligible.at(x, y) = m >= 0.5f ? 1.f : 0.f;
      }
  }

  // Threshold from eligible pixels only.
  float max_resp = 0.f;
  for (int y = margin; y < gray.height - margin; ++y)
    for (int x = margin; x < gray.width - margin; ++x) {
      if (valid && eligible.at(x, y) < 0.5f) continue;
      max_resp = std::max(max_resp, resp.at(x, y));
    }
  const float thresh = std::max(1e-7f, 0.01f * max_resp);

  struct Cand {
    int x, y;
    float r;
  };
  std::vector<Cand> cands;
  for (int y = margin; y < gray.height - margin; ++y)
    for (int x = margin; x < gray.width - margin; ++x) {
      const float v = resp.at(x, y);
      if (v < thresh) continue;
      if (valid && eligible.at(x, y) < 0.5f) continue;
      // 3x3 non-max suppression before the spacing pass.
      bool peak = true;
      for (int dy = -1; dy <= 1 && peak; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if ((dx || dy) && resp.at_clamped(x + dx, y + dy) > v) {
            peak = false;
            break;
          }
      if (peak) cands.push_back({x, y, v});
    }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.r != b.r) return a.r > b.r;
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  });

  // Greedy spacing via an occupancy grid of min_spacing-sized cells.
  const int cell = std::max(1, static_cast<int>(min_spacing));
  const int gw = gray.width / cell + 1, gh = gray.height / cell + 1;
  std::vector<std::vector<std::pair<int, int>>> grid(static_cast<size_t>(gw) * gh);
  std::vector<Keypoint> out;
  const double sp2 = min_spacing * min_spacing;
  for (const Cand& c : cands) {
    if (static_cast<int>(out.size()) >= max_points) break;
    const int cx = c.x / cell, cy = c.y / cell;
    bool ok = true;
    for (int gy = std::max(0, cy - 1); gy <= std::min(gh - 1, cy + 1) && ok; ++gy)
      for (int gx = std::max(0, cx - 1); gx <= std::min(gw - 1, cx + 1); ++gx)
        for (auto [px, py] : grid[static_cast<size_t>(gy) * gw + gx]) {
          const double ddx = px - c.x, ddy = py - c.y;
          if (ddx * ddx + ddy * ddy < sp2) {
            ok = false;
            break;
          }
        }
    if (!ok) continue;
    grid[static_cast<size_t>(cy) * gw + cx].emplace_back(c.x, c.y);
    out.push_back({static_cast<double>(c.x), static_cast<double>(c.y), 0, 0, c.r});
  }
  return out;
}

namespace detail {

inline double sample_clamped(const Image& img, double x, double y) {
  x = std::clamp(x, 0.0, img.width - 1.0);
  y = std::clamp(y, 0.0, img.height - 1.0);
  return sample_bilinear(img, x, y, 0).value;
}

struct GrayPyramid {
  std::vector<Image> levels;
  std::vector<Image> gx, gy;
};

inline GrayPyramid build_pyramid(const Image& gray, int n_levels) {
  GrayPyramid p;
  p.levels.push_back(gray);
  for (int l = 1; l < n_levels; ++l) p.levels.push_back(downscale_half(p.levels.back()));
  p.gx.resize(n_levels);
  p.gy.resize(n_levels);
  for (int l = 0; l < n_levels; ++l) gradients(p.levels[l], p.gx[l], p.gy[l]);
  return p;
}

inline bool lk_track(const GrayPyramid& src, const GrayPyramid& dst, double x0, double y0,
                     double& out_x, double& out_y, int window = 21, int max_steps = 30) {
  const int levels = static_cast<int>(src.levels.size());
  const int r = window / 2;
  double dx = 0, dy = 0;
  for (int l = levels - 1; l >= 0; --l) {
    const double scale = 1.0 / (1 << l);
    const double px = x0 * scale, py = y0 * scale;
    const Image& a = src.levels[l];
    const Image& b = dst.levels[l];
    const Image& agx = src.gx[l];
    const Image& agy = src.gy[l];

    // Template patch and gradients, sampled once per level.
    const int side = 2 * r + 1;
    std::vector<double> tmpl(static_cast<size_t>(side) * side);
    std::vector<double> tgx(tmpl.size()), tgy(tmpl.size());
    double gxx = 0, gxy = 0, gyy = 0;
    for (int wy = -r; wy <= r; ++wy)
      for (int wx = -r; wx <= r; ++wx) {
        const size_t i = static_cast<size_t>(wy + r) * side + (wx + r);
        tmpl[i] = sample_clamped(a, px + wx, py + wy);
        tgx[i] = sample_clamped(agx, px + wx, py + wy);
        tgy[i] = sample_clamped(agy, px + wx, py + wy);
        gxx += tgx[i] * tgx[i];
        gxy += tgx[i] * tgy[i];
        gyy += tgy[i] * tgy[i];
      }
    const double det = gxx * gyy - gxy * gxy;
    if (det < 1e-12) return false;

    for (int step = 0; step < max_steps; ++step) {
      double bx = 0, by = 0;
      // The bilinear fraction is shared by every pixel in the patch, so the
      // four tap weights can be hoisted out of the loop; interior patches
      // read the level directly without per-sample clamping.
      const double cx = px + dx, cy = py + dy;
      const double fxa = std::floor(cx), fya = std::floor(cy);
      const int ix = static_cast<int>(fxa), iy = static_cast<int>(fya);
      const double fx = cx - fxa, fy = cy - fya;
      const double w00 = (1 - fx) * (1 - fy), w10 = fx * (1 - fy);
      const double w01 = (1 - fx) * fy, w11 = fx * fy;
      if (ix - r >= 0 && iy - r >= 0 && ix + r + 1 < b.width && iy + r + 1 < b.height) {
        for (int wy = -r; wy <= r; ++wy) {
          const float* row0 = &b.data[static_cast<size_t>(iy + wy) * b.width + (ix - r)];
          const float* row1 = row0 + b.width;
          const double* trow = &tmpl[static_cast<size_t>(wy + r) * side];
          const double* gxrow = &tgx[static_cast<size_t>(wy + r) * side];
          const double* gyrow = &tgy[static_cast<size_t>(wy + r) * side];
          for (int j = 0; j < side; ++j) {
            const double val =
                w00 * row0[j] + w10 * row0[j + 1] + w01 * row1[j] + w11 * row1[j + 1];
            const double diff = val - trow[j];
            bx += diff * gxrow[j];
            by += diff * gyrow[j];
          }
        }
      } else {
        for (int wy = -r; wy <= r; ++wy)
          for (int wx = -r; wx <= r; ++wx) {
            const size_t i = static_cast<size_t>(wy + r) * side + (wx + r);
            const double diff = sample_clamped(b, cx + wx, cy + wy) - tmpl[i];
            bx += diff * tgx[i];
            by += diff * tgy[i];
          }
      }
      const double ux = (gyy * bx - gxy * by) / det;
      const double uy = (gxx * by - gxy * bx) / det;
      dx -= ux;
      dy -= uy;
      if (ux * ux + uy * uy < 1e-4) break;  // step below 0.01 px
    }
    if (l > 0) {
      dx *= 2;
      dy *= 2;
    }
    if (!std::isfinite(dx) || !std::isfinite(dy)) return false;
    if (std::abs(dx) > src.levels[0].width || std::abs(dy) > src.levels[0].height) return false;
  }
  out_x = x0 + dx;
  out_y = y0 + dy;
  return true;
}

}  // namespace detail

// Corners in `neighbor` tracked toward `ref` by pyramidal LK (3 levels, 21x21
// window, <=30 steps/level), then forward-backward checked at 1 px. The
// optional mask restricts detection to valid content.
inline std::vector<Keypoint> detect_and_track(const Image& ref, const Image& neighbor,
                                              int max_points = 1000,
                                              const Mask* neighbor_valid = nullptr,
                                              int pyramid_levels = 3) {
  if (ref.width != neighbor.width || ref.height != neighbor.height)
    throw DimensionMismatch("detect_and_track: frame sizes differ");

  const Image gray_ref = to_luma(ref);
  const Image gray_nb = to_luma(neighbor);
  std::vector<Keypoint> corners = detect_corners(gray_nb, max_points, 10.0, neighbor_valid);

  const auto pyr_nb = detail::build_pyramid(gray_nb, pyramid_levels);
  const auto pyr_ref = detail::build_pyramid(gray_ref, pyramid_levels);

  std::vector<Keypoint> out;
  out.reserve(corners.size());
  for (const Keypoint& k : corners) {
    double tx, ty;
    if (!detail::lk_track(pyr_nb, pyr_ref, k.x, k.y, tx, ty)) continue;
    double bx, by;
    if (!detail::lk_track(pyr_ref, pyr_nb, tx, ty, bx, by)) continue;
    const double ex = bx - k.x, ey = by - k.y;
    if (ex * ex + ey * ey > 1.0) continue;  // round-trip error > 1 px
    Keypoint t = k;
    t.dx = tx - k.x;
    t.dy = ty - k.y;
    out.push_back(t);
  }
  if (out.size() < 8)
    throw TooFewKeypoints("only " + std::to_string(out.size()) + " tracks survived");
  return out;
}

}  // namespace ovs
