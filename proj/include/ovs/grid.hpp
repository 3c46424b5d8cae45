#pragma once

#include <vector>

#include "ovs/features.hpp"
#include "ovs/homography.hpp"
#include "ovs/image.hpp"

namespace ovs {

// Per-cell projective transforms over a rows x cols grid covering the
// unpadded frame. Transforms map neighbor-frame coords to reference coords.
struct HomographyGrid {
  int rows = 0, cols = 0;
  double cell_w = 0, cell_h = 0;
  std::vector<Mat3> cell;         // rows*cols, h(2,2) = 1
  std::vector<Vec2> vertex_motion;  // (rows+1)*(cols+1), (dx,dy) per vertex

  const Mat3& cell_at(int cx, int cy) const { return cell[static_cast<size_t>(cy) * cols + cx]; }

  static HomographyGrid identity(int rows, int cols, int frame_w, int frame_h) {
    HomographyGrid g;
    g.rows = rows;
    g.cols = cols;
    g.cell_w = static_cast<double>(frame_w) / cols;
    g.cell_h = static_cast<double>(frame_h) / rows;
    g.cell.assign(static_cast<size_t>(rows) * cols, Mat3::Identity());
    g.vertex_motion.assign(static_cast<size_t>(rows + 1) * (cols + 1), Vec2::Zero());
    return g;
  }
};

namespace detail {

// Weighted median, ties toward the lower value.
inline double weighted_median(std::vector<std::pair<double, double>>& vw) {
  std::sort(vw.begin(), vw.end());
  double total = 0;
  for (const auto& [v, w] : vw) total += w;
  double acc = 0;
  for (const auto& [v, w] : vw) {
    acc += w;
    if (acc >= 0.5 * total) return v;
  }
  return vw.back().first;
}

}  // namespace detail

// Robust global homography + local residual medians at grid vertices +
// per-cell DLT from the 4 vertex correspondences.
inline HomographyGrid propagate_to_grid(const std::vector<Keypoint>& keypoints, int rows,
                                        int cols, int frame_w, int frame_h,
                                        uint64_t seed = 0x5eed) {
  if (keypoints.size() < 8) throw DegenerateFit("propagate_to_grid needs >= 8 keypoints");

  std::vector<Correspondence> corr;
  corr.reserve(keypoints.size());
  for (const auto& k : keypoints)
    corr.push_back({Vec2(k.x, k.y), Vec2(k.x + k.dx, k.y + k.dy)});
  const RansacResult global = ransac_homography(corr, 1000, 2.0, seed);

  HomographyGrid g = HomographyGrid::identity(rows, cols, frame_w, frame_h);

  // Residual motions of the keypoints w.r.t. the global model.
  std::vector<Vec2> residual(keypoints.size());
  for (size_t i = 0; i < keypoints.size(); ++i) {
    const Vec2 p(keypoints[i].x, keypoints[i].y);
    const Vec2 gm = apply_homography(global.h, p) - p;
    residual[i] = Vec2(keypoints[i].dx, keypoints[i].dy) - gm;
  }

  const double radius = 1.5 * std::max(g.cell_w, g.cell_h);
  const double sigma = std::max(g.cell_w, g.cell_h);
  const double r2 = radius * radius;

  for (int vy = 0; vy <= rows; ++vy)
    for (int vx = 0; vx <= cols; ++vx) {
      const Vec2 p(vx * g.cell_w, vy * g.cell_h);
      Vec2 motion = apply_homography(global.h, p) - p;
      std::vector<std::pair<double, double>> rx, ry;
      for (size_t i = 0; i < keypoints.size(); ++i) {
        const double dx = keypoints[i].x - p.x(), dy = keypoints[i].y - p.y();
        const double d2 = dx * dx + dy * dy;
        if (d2 > r2) continue;
        const double w = std::exp(-d2 / (2 * sigma * sigma));
        rx.emplace_back(residual[i].x(), w);
        ry.emplace_back(residual[i].y(), w);
      }
      if (!rx.empty())
        motion += Vec2(detail::weighted_median(rx), detail::weighted_median(ry));
      g.vertex_motion[static_cast<size_t>(vy) * (cols + 1) + vx] = motion;
    }

  for (int cy = 0; cy < rows; ++cy)
    for (int cx = 0; cx < cols; ++cx) {
      std::vector<Correspondence> quad;
      for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
          const Vec2 p((cx + dx) * g.cell_w, (cy + dy) * g.cell_h);
          const Vec2 m = g.vertex_motion[static_cast<size_t>(cy + dy) * (cols + 1) + cx + dx];
          quad.push_back({p, p + m});
        }
      Mat3 h = fit_homography_dlt(quad);
      if (std::abs(h.determinant()) < 1e-9) throw DegenerateFit("non-invertible cell homography");
      g.cell[static_cast<size_t>(cy) * cols + cx] = h;
    }
  return g;
}

// Backward warp of a source canvas onto an out_w x out_h canvas. Grid (and
// its transforms) live in coordinates offset by `offset` inside the output;
// the padded band reuses the nearest border cell.
inline Canvas warp_canvas(const Canvas& src, const HomographyGrid& grid, int out_w, int out_h,
                          int offset_x, int offset_y) {
  Canvas out;
  out.pad = offset_x;
  out.color = Image(out_w, out_h, 3, 0.f);
  out.mask = make_mask(out_w, out_h, 0.f);

  std::vector<Mat3> inv(grid.cell.size());
  for (size_t i = 0; i < grid.cell.size(); ++i) inv[i] = grid.cell[i].inverse();

  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      const double rx = x - offset_x, ry = y - offset_y;
      const int cx = std::clamp(static_cast<int>(std::floor(rx / grid.cell_w)), 0, grid.cols - 1);
      const int cy = std::clamp(static_cast<int>(std::floor(ry / grid.cell_h)), 0, grid.rows - 1);
      Vec2 s;
      try {
        s = apply_homography(inv[static_cast<size_t>(cy) * grid.cols + cx], Vec2(rx, ry));
      } catch (const DegenerateFit&) {
        continue;
      }
      if (sample_mask(src.mask, s.x(), s.y()) < 0.5f) continue;
      out.mask.at(x, y) = 1.f;
      for (int c = 0; c < 3; ++c)
        out.color.at(x, y, c) = sample_bilinear(src.color, s.x(), s.y(), c).value;
    }
  return out;
}

// Warp a plain (unpadded) frame onto the reference's padded canvas.
inline Canvas warp_to_canvas(const Image& neighbor, const HomographyGrid& grid, int pad) {
  Canvas src;
  src.pad = 0;
  src.color = neighbor;
  src.mask = make_mask(neighbor.width, neighbor.height, 1.f);
  return warp_canvas(src, grid, neighbor.width + 2 * pad, neighbor.height + 2 * pad, pad, pad);
}

enum class PassDirection { Forward, Backward };

// One coarse-alignment pass (3.1): forward yields frame i aligned onto the
// canvas of frame i+1, backward onto frame i-1. Sequence ends use the padded
// frame itself. Fit failures degrade to the identity grid.
inline std::vector<Canvas> coarse_align_pass(const std::vector<Image>& frames,
                                             PassDirection dir, int pad, int grid_size = 16,
                                             int max_points = 1000, uint64_t seed = 0x5eed) {
  if (frames.empty()) throw std::invalid_argument("coarse_align_pass: no frames");
  const int n = static_cast<int>(frames.size());
  std::vector<Canvas> out(n);
  for (int i = 0; i < n; ++i) {
    const int ref = dir == PassDirection::Forward ? i + 1 : i - 1;
    if (ref < 0 || ref >= n) {
      out[i] = pad_frame(frames[i], pad);
      continue;
    }
    HomographyGrid grid = HomographyGrid::identity(grid_size, grid_size, frames[i].width,
                                                   frames[i].height);
    try {
      const auto kps = detect_and_track(frames[ref], frames[i], max_points);
      grid = propagate_to_grid(kps, grid_size, grid_size, frames[i].width, frames[i].height, seed);
    } catch (const TooFewKeypoints&) {
    } catch (const DegenerateFit&) {
    }
    out[i] = warp_to_canvas(frames[i], grid, pad);
  }
  return out;
}

}  // namespace ovs
