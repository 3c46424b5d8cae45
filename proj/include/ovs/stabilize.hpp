#pragma once

#include <stdexcept>
#include <vector>

#include "ovs/grid.hpp"
#include "ovs/image.hpp"

namespace ovs {

// Cumulative per-vertex camera path plus a per-frame global similarity for
// metric computation. Frame 0 is the rest pose ((0,0) displacements).
struct Trajectory {
  int rows = 0, cols = 0;
  double cell_w = 0, cell_h = 0;
  int frame_w = 0, frame_h = 0;
  std::vector<std::vector<Vec2>> vertex;  // [frame][(rows+1)*(cols+1)] displacement
  std::vector<Similarity> global;

  int n_frames() const { return static_cast<int>(vertex.size()); }
  int n_vertices() const { return (rows + 1) * (cols + 1); }
  Vec2 rest_position(int v) const { return {(v % (cols + 1)) * cell_w, (v / (cols + 1)) * cell_h}; }
};

// Grid motion between consecutive frames, accumulated per vertex. Degenerate
// pairs contribute identity motion.
inline Trajectory estimate_trajectory(const std::vector<Image>& frames, int grid_size = 16,
                                      int max_points = 1000, uint64_t seed = 0x5eed) {
  if (frames.size() < 2) throw std::invalid_argument("estimate_trajectory needs >= 2 frames");
  Trajectory t;
  t.rows = t.cols = grid_size;
  t.frame_w = frames[0].width;
  t.frame_h = frames[0].height;
  t.cell_w = static_cast<double>(t.frame_w) / grid_size;
  t.cell_h = static_cast<double>(t.frame_h) / grid_size;

  const int nv = t.n_vertices();
  t.vertex.assign(frames.size(), std::vector<Vec2>(nv, Vec2::Zero()));
  for (size_t i = 0; i + 1 < frames.size(); ++i) {
    std::vector<Vec2> motion(nv, Vec2::Zero());
    try {
      // Keypoints in frame i, motion toward frame i+1.
      const auto kps = detect_and_track(frames[i + 1], frames[i], max_points);
      const HomographyGrid g =
          propagate_to_grid(kps, grid_size, grid_size, t.frame_w, t.frame_h, seed + i);
      for (int v = 0; v < nv; ++v) motion[v] = g.vertex_motion[v];
    } catch (const TooFewKeypoints&) {
    } catch (const DegenerateFit&) {
    }
    for (int v = 0; v < nv; ++v) t.vertex[i + 1][v] = t.vertex[i][v] + motion[v];
  }

  t.global.resize(frames.size());
  for (size_t i = 0; i < frames.size(); ++i) {
    std::vector<Correspondence> corr;
    corr.reserve(nv);
    for (int v = 0; v < nv; ++v) {
      const Vec2 p = t.rest_position(v);
      corr.push_back({p, p + t.vertex[i][v]});
    }
    t.global[i] = fit_similarity(corr);
  }
  return t;
}

// Gaussian temporal smoothing per vertex, window clipped at sequence ends.
inline Trajectory smooth_trajectory(const Trajectory& traj, int window = 31, double sigma = 0.0) {
  if (window < 3 || window % 2 == 0) throw std::invalid_argument("window must be odd and >= 3");
  if (sigma <= 0) sigma = window / 6.0;
  Trajectory out = traj;
  const int n = traj.n_frames(), half = window / 2, nv = traj.n_vertices();
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half), hi = std::min(n - 1, i + half);
    std::vector<double> wgt(hi - lo + 1);
    double wsum = 0;
    for (int j = lo; j <= hi; ++j) {
      wgt[j - lo] = std::exp(-0.5 * (j - i) * (j - i) / (sigma * sigma));
      wsum += wgt[j - lo];
    }
    for (int v = 0; v < nv; ++v) {
      Vec2 acc = Vec2::Zero();
      for (int j = lo; j <= hi; ++j) acc += wgt[j - lo] * traj.vertex[j][v];
      out.vertex[i][v] = acc / wsum;
    }
  }
  for (int i = 0; i < n; ++i) {
    std::vector<Correspondence> corr;
    for (int v = 0; v < nv; ++v) {
      const Vec2 p = traj.rest_position(v);
      corr.push_back({p, p + out.vertex[i][v]});
    }
    out.global[i] = fit_similarity(corr);
  }
  return out;
}

enum class HoleFill { None, Nearest };

struct StabilizedVideo {
  std::vector<Image> frames;  // original frame size
  std::vector<Mask> valid;    // post-fill validity (all ones with Nearest fill)
  long hole_pixels = 0;       // invalid pixels before any fill
};

// Warp each source canvas by the (smoothed - original) vertex displacement
// and crop back to the original frame size around the canvas center. Sources
// are padded frames (OVS off) or expanded canvases (OVS on).
inline StabilizedVideo render_stabilized(const std::vector<Canvas>& sources,
                                         const Trajectory& traj, const Trajectory& smoothed,
                                         HoleFill fill) {
  if (static_cast<int>(sources.size()) != traj.n_frames() ||
      traj.n_frames() != smoothed.n_frames())
    throw std::invalid_argument("render_stabilized: trajectory does not cover all frames");

  StabilizedVideo out;
  const int w = traj.frame_w, h = traj.frame_h, nv = traj.n_vertices();
  for (int i = 0; i < traj.n_frames(); ++i) {
    const Canvas& src = sources[i];
    const int pad = src.pad;

    // Backward per-cell homographies: output cell corners sample the source
    // at corner - (smoothed - original).
    std::vector<Mat3> cell_inv(static_cast<size_t>(traj.rows) * traj.cols);
    for (int cy = 0; cy < traj.rows; ++cy)
      for (int cx = 0; cx < traj.cols; ++cx) {
        std::vector<Correspondence> quad;
        for (int dy = 0; dy <= 1; ++dy)
          for (int dx = 0; dx <= 1; ++dx) {
            const int v = (cy + dy) * (traj.cols + 1) + cx + dx;
            const Vec2 p((cx + dx) * traj.cell_w, (cy + dy) * traj.cell_h);
            const Vec2 delta = smoothed.vertex[i][v] - traj.vertex[i][v];
            quad.push_back({p, p - delta});
          }
        cell_inv[static_cast<size_t>(cy) * traj.cols + cx] = fit_homography_dlt(quad);
      }

    Image frame(w, h, 3, 0.f);
    Mask valid = make_mask(w, h, 0.f);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int cx = std::clamp(static_cast<int>(x / traj.cell_w), 0, traj.cols - 1);
        const int cy = std::clamp(static_cast<int>(y / traj.cell_h), 0, traj.rows - 1);
        Vec2 s;
        try {
          s = apply_homography(cell_inv[static_cast<size_t>(cy) * traj.cols + cx],
                               Vec2(x, y));
        } catch (const DegenerateFit&) {
          continue;
        }
        const double sx = s.x() + pad, sy = s.y() + pad;
        if (sample_mask(src.mask, sx, sy) < 0.5f) continue;
        valid.at(x, y) = 1.f;
        for (int c = 0; c < 3; ++c)
          frame.at(x, y, c) = sample_bilinear(src.color, sx, sy, c).value;
      }

    for (float v : valid.data)
      if (v < 0.5f) ++out.hole_pixels;

    if (fill == HoleFill::Nearest) {
      const std::vector<size_t> witness = nearest_valid_map(valid);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const size_t i2 = static_cast<size_t>(y) * w + x;
          if (valid.data[i2] >= 0.5f) continue;
          const int wx = static_cast<int>(witness[i2] % w), wy = static_cast<int>(witness[i2] / w);
          for (int c = 0; c < 3; ++c) frame.at(x, y, c) = frame.at(wx, wy, c);
        }
      valid = make_mask(w, h, 1.f);
    }
    out.frames.push_back(std::move(frame));
    out.valid.push_back(std::move(valid));
  }
  return out;
}

struct DegenerateCrop : std::runtime_error {
  explicit DegenerateCrop(const std::string& what) : std::runtime_error(what) {}
};

// Largest center-anchored, aspect-preserving rectangle inscribed in the
// intersection of all per-frame valid masks.
inline Rect crop_rectangle(const std::vector<Mask>& masks) {
  if (masks.empty()) throw std::invalid_argument("crop_rectangle: no masks");
  const int w = masks[0].width, h = masks[0].height;
  Mask inter = make_mask(w, h, 1.f);
  for (const Mask& m : masks) {
    if (m.width != w || m.height != h) throw DimensionMismatch("crop_rectangle: mask sizes differ");
    for (size_t i = 0; i < inter.data.size(); ++i)
      if (m.data[i] < 0.5f) inter.data[i] = 0.f;
  }

  // Summed-area table of invalid pixels for O(1) rectangle tests.
  std::vector<long> sat(static_cast<size_t>(w + 1) * (h + 1), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t i = static_cast<size_t>(y + 1) * (w + 1) + x + 1;
      sat[i] = (inter.at(x, y) < 0.5f ? 1 : 0) + sat[i - 1] + sat[i - (w + 1)] -
               sat[i - (w + 1) - 1];
    }
  auto invalid_in = [&](const Rect& r) {
    return sat[static_cast<size_t>(r.y + r.h) * (w + 1) + r.x + r.w] -
           sat[static_cast<size_t>(r.y) * (w + 1) + r.x + r.w] -
           sat[static_cast<size_t>(r.y + r.h) * (w + 1) + r.x] +
           sat[static_cast<size_t>(r.y) * (w + 1) + r.x];
  };

  for (int rw = w; rw >= 1; --rw) {
    const int rh = std::max(1, static_cast<int>(std::lround(static_cast<double>(rw) * h / w)));
    if (rh > h) continue;
    Rect r{(w - rw) / 2, (h - rh) / 2, rw, rh};
    if (invalid_in(r) == 0) return r;
  }
  throw DegenerateCrop("no valid centered rectangle exists");
}

}  // namespace ovs
