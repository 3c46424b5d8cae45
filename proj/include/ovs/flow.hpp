#pragma once

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "ovs/features.hpp"
#include "ovs/homography.hpp"
#include "ovs/image.hpp"
#include "ovs/io.hpp"

namespace ovs {

// Estimators must be pure in their inputs; the pipeline may swap in
// precomputed flow (files mode) without touching anything downstream.
class FlowEstimator {
 public:
  virtual ~FlowEstimator() = default;
  virtual std::string name() const = 0;
  virtual FlowField estimate(const Image& ref, const Image& tgt) const = 0;
  // Pipeline hint for estimators keyed by frame pair (files mode); no-op here.
  virtual void set_pair(int /*ref_index*/, int /*tgt_index*/) const {}
};

namespace detail {

inline FlowField upsample_flow2x(const FlowField& f, int w, int h) {
  FlowField out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double sx = std::clamp((x + 0.5) * f.width / static_cast<double>(w) - 0.5, 0.0,
                                   f.width - 1.0);
      const double sy = std::clamp((y + 0.5) * f.height / static_cast<double>(h) - 0.5, 0.0,
                                   f.height - 1.0);
      const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, f.width - 1), y1 = std::min(y0 + 1, f.height - 1);
      const double fx = sx - x0, fy = sy - y0;
      auto lerp = [&](const std::vector<double>& ch) {
        return (1 - fy) * ((1 - fx) * ch[f.idx(x0, y0)] + fx * ch[f.idx(x1, y0)]) +
               fy * ((1 - fx) * ch[f.idx(x0, y1)] + fx * ch[f.idx(x1, y1)]);
      };
      out.u[out.idx(x, y)] = 2.0 * lerp(f.u);
      out.v[out.idx(x, y)] = 2.0 * lerp(f.v);
      out.valid.at(x, y) = 1.f;
    }
  return out;
}

inline void median_filter_flow(FlowField& f, int radius = 2) {
  FlowField src = f;
  std::vector<double> buf;
  buf.reserve((2 * radius + 1) * (2 * radius + 1));
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x)
      for (int ch = 0; ch < 2; ++ch) {
        buf.clear();
        for (int dy = -radius; dy <= radius; ++dy)
          for (int dx = -radius; dx <= radius; ++dx) {
            const int nx = std::clamp(x + dx, 0, f.width - 1);
            const int ny = std::clamp(y + dy, 0, f.height - 1);
            buf.push_back(ch == 0 ? src.u[src.idx(nx, ny)] : src.v[src.idx(nx, ny)]);
          }
        std::nth_element(buf.begin(), buf.begin() + buf.size() / 2, buf.end());
        (ch == 0 ? f.u : f.v)[f.idx(x, y)] = buf[buf.size() / 2];
      }
}

}  // namespace detail

namespace detail {

// Coarse-to-fine block-matching core shared by the estimators. With
// `ignore_zero` set, exact-zero luma (canvas gutters) is treated as missing:
// such pixels contribute to no SSD, blocks score by masked mean SSD, and a
// block with no sufficiently-overlapping candidate keeps the upsampled
// estimate. This stops blocks from locking the reference content edge onto
// the warped support edge (both are content-to-black steps).
// `fine_search` < 0 searches +-search at every level; otherwise the full
// radius applies only at the coarsest level and finer levels refine within
// +-fine_search of the upsampled estimate (the reach is set by the coarsest
// level, so refinement at finer levels only needs to absorb upsampling
// error).
inline FlowField pyramid_block_flow(const Image& ref, const Image& tgt, int levels, int block,
                                    int search, bool ignore_zero, int fine_search = -1) {
  if (ref.width != tgt.width || ref.height != tgt.height)
    throw DimensionMismatch("baseline_flow: frame sizes differ");

  std::vector<Image> pyr_ref{to_luma(ref)}, pyr_tgt{to_luma(tgt)};
  for (int l = 1; l < levels; ++l) {
    pyr_ref.push_back(downscale_half(pyr_ref.back()));
    pyr_tgt.push_back(downscale_half(pyr_tgt.back()));
  }
  std::vector<Mask> val_ref, val_tgt;
  if (ignore_zero) {
    auto build = [&](const std::vector<Image>& pyr, std::vector<Mask>& out) {
      Mask m = make_mask(pyr[0].width, pyr[0].height, 0.f);
      for (size_t i = 0; i < m.data.size(); ++i) m.data[i] = pyr[0].data[i] != 0.f ? 1.f : 0.f;
      out.push_back(m);
      for (int l = 1; l < levels; ++l) {
        Mask d = downscale_half(out.back());
        for (float& v : d.data) v = v > 0.99f ? 1.f : 0.f;  // all children valid
        out.push_back(std::move(d));
      }
    };
    build(pyr_ref, val_ref);
    build(pyr_tgt, val_tgt);
  }
  // Summed-area table of target validity per level: O(1) "is this candidate
  // rectangle fully valid" tests route interior candidates to the fast
  // unmasked SSD path.
  std::vector<std::vector<long>> sat_tgt(levels);
  if (ignore_zero) {
    for (int l = 0; l < levels; ++l) {
      const Mask& m = val_tgt[l];
      const int w = m.width, h = m.height;
      std::vector<long>& s = sat_tgt[l];
      s.assign(static_cast<size_t>(w + 1) * (h + 1), 0);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          s[static_cast<size_t>(y + 1) * (w + 1) + (x + 1)] =
              (m.at(x, y) >= 0.5f ? 1 : 0) + s[static_cast<size_t>(y) * (w + 1) + (x + 1)] +
              s[static_cast<size_t>(y + 1) * (w + 1) + x] -
              s[static_cast<size_t>(y) * (w + 1) + x];
    }
  }

  FlowField flow(pyr_ref.back().width, pyr_ref.back().height);
  for (int l = levels - 1; l >= 0; --l) {
    const Image& a = pyr_ref[l];
    const Image& b = pyr_tgt[l];
    if (flow.width != a.width || flow.height != a.height)
      flow = detail::upsample_flow2x(flow, a.width, a.height);

    const int bw = (a.width + block - 1) / block;
    const int bh = (a.height + block - 1) / block;
    const int lsearch = (l == levels - 1 || fine_search < 0) ? search : fine_search;
    std::vector<double> bu(static_cast<size_t>(bw) * bh, 0.0), bv(bu);

    Image gx, gy;
    detail::gradients(a, gx, gy);

    for (int by = 0; by < bh; ++by)
      for (int bx = 0; bx < bw; ++bx) {
        const int x0 = bx * block, y0 = by * block;
        const int x1 = std::min(x0 + block, a.width), y1 = std::min(y0 + block, a.height);
        const int cx = (x0 + x1) / 2, cy = (y0 + y1) / 2;
        const int iu = static_cast<int>(std::lround(flow.u[flow.idx(cx, cy)]));
        const int iv = static_cast<int>(std::lround(flow.v[flow.idx(cx, cy)]));

        // Integer SSD search around the upsampled estimate. Rows of a
        // candidate are abandoned as soon as the partial sum exceeds the
        // best SSD so far; the center candidate is scored first so that
        // bound is tight from the start.
        const auto block_ssd = [&](int du, int dv, double bound) {
          double ssd = 0;
          const bool interior = x0 + du >= 0 && x1 + du <= b.width && y0 + dv >= 0 &&
                                y1 + dv <= b.height;
          for (int y = y0; y < y1; ++y) {
            if (interior) {
              const float* brow = &b.data[static_cast<size_t>(y + dv) * b.width + (x0 + du)];
              const float* arow = &a.data[static_cast<size_t>(y) * a.width + x0];
              for (int x = 0; x < x1 - x0; ++x) {
                const double d = static_cast<double>(brow[x]) - arow[x];
                ssd += d * d;
              }
            } else {
              for (int x = x0; x < x1; ++x) {
                const double d = b.at_clamped(x + du, y + dv) - a.at(x, y);
                ssd += d * d;
              }
            }
            if (ssd >= bound) return bound;
          }
          return ssd;
        };
        // Masked variant: mean SSD over pixels valid in both blocks, with a
        // minimum-overlap requirement; insufficient overlap keeps the
        // upsampled estimate.
        const long area = static_cast<long>(x1 - x0) * (y1 - y0);
        const long min_count = std::max(9L, area / 4);
        // Valid reference pixels of this block, collected once: candidate
        // scoring iterates only these, and a block that cannot reach the
        // overlap minimum skips the search entirely (canvas gutters).
        std::vector<std::pair<int, int>> ref_px;
        bool ref_full = true;
        if (ignore_zero) {
          ref_px.reserve(static_cast<size_t>(area));
          for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
              if (val_ref[l].at(x, y) >= 0.5f)
                ref_px.emplace_back(x, y);
              else
                ref_full = false;
            }
        }
        // `bound` is the best masked mean SSD so far; the running sum can
        // only yield a mean >= sum/area, so a row whose sum crosses
        // bound*area abandons the candidate.
        const auto block_ssd_masked = [&](int du, int dv, double bound) {
          if (ignore_zero && ref_full && x0 + du >= 0 && x1 + du <= b.width && y0 + dv >= 0 &&
              y1 + dv <= b.height) {
            const std::vector<long>& s = sat_tgt[l];
            const int sw = b.width + 1;
            const long cnt = s[static_cast<size_t>(y1 + dv) * sw + (x1 + du)] -
                             s[static_cast<size_t>(y0 + dv) * sw + (x1 + du)] -
                             s[static_cast<size_t>(y1 + dv) * sw + (x0 + du)] +
                             s[static_cast<size_t>(y0 + dv) * sw + (x0 + du)];
            if (cnt == area) {
              const double cap = std::isfinite(bound)
                                     ? bound * static_cast<double>(area)
                                     : std::numeric_limits<double>::max();
              const double ssd = block_ssd(du, dv, cap);
              if (ssd >= cap) return std::numeric_limits<double>::infinity();
              return ssd / static_cast<double>(area);
            }
          }
          const double sum_cap = std::isfinite(bound)
                                     ? bound * static_cast<double>(area)
                                     : std::numeric_limits<double>::max();
          double ssd = 0;
          long count = 0;
          size_t i = 0;
          for (const auto& [x, y] : ref_px) {
            const int tx2 = std::clamp(x + du, 0, b.width - 1);
            const int ty2 = std::clamp(y + dv, 0, b.height - 1);
            if (val_tgt[l].at(tx2, ty2) >= 0.5f) {
              const double d = static_cast<double>(b.at(tx2, ty2)) - a.at(x, y);
              ssd += d * d;
              ++count;
            }
            if ((++i & 15u) == 0 && ssd >= sum_cap)
              return std::numeric_limits<double>::infinity();
          }
          if (count < min_count || ssd >= sum_cap)
            return std::numeric_limits<double>::infinity();
          return ssd / static_cast<double>(count);
        };

        int best_du = iu, best_dv = iv;
        if (!ignore_zero) {
          double best = block_ssd(iu, iv, std::numeric_limits<double>::max());
          for (int dv = iv - lsearch; dv <= iv + lsearch; ++dv)
            for (int du = iu - lsearch; du <= iu + lsearch; ++du) {
              if (du == iu && dv == iv) continue;
              const double ssd = block_ssd(du, dv, best);
              if (ssd < best) {
                best = ssd;
                best_du = du;
                best_dv = dv;
              }
            }
        } else if (static_cast<long>(ref_px.size()) >= min_count) {
          double best = block_ssd_masked(iu, iv, std::numeric_limits<double>::infinity());
          for (int dv = iv - lsearch; dv <= iv + lsearch; ++dv)
            for (int du = iu - lsearch; du <= iu + lsearch; ++du) {
              if (du == iu && dv == iv) continue;
              const double ssd = block_ssd_masked(du, dv, best);
              if (ssd < best) {
                best = ssd;
                best_du = du;
                best_dv = dv;
              }
            }
        }

        // One least-squares step on the gradients for subpixel motion
        // (restricted to mutually valid pixels in the masked variant).
        double gxx = 0, gxy = 0, gyy = 0, ex = 0, ey = 0;
        const auto ls_accumulate = [&](int x, int y) {
          const double g1 = gx.at(x, y), g2 = gy.at(x, y);
          const double diff = b.at_clamped(x + best_du, y + best_dv) - a.at(x, y);
          gxx += g1 * g1;
          gxy += g1 * g2;
          gyy += g2 * g2;
          ex += diff * g1;
          ey += diff * g2;
        };
        if (ignore_zero) {
          for (const auto& [x, y] : ref_px) {
            const int tx2 = std::clamp(x + best_du, 0, b.width - 1);
            const int ty2 = std::clamp(y + best_dv, 0, b.height - 1);
            if (val_tgt[l].at(tx2, ty2) < 0.5f) continue;
            ls_accumulate(x, y);
          }
        } else {
          for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) ls_accumulate(x, y);
        }
        double su = 0, sv = 0;
        const double det = gxx * gyy - gxy * gxy;
        if (det > 1e-9) {
          su = -(gyy * ex - gxy * ey) / det;
          sv = -(gxx * ey - gxy * ex) / det;
          if (std::abs(su) > 1.0 || std::abs(sv) > 1.0) su = sv = 0;  // diverged step
        }
        bu[static_cast<size_t>(by) * bw + bx] = best_du + su;
        bv[static_cast<size_t>(by) * bw + bx] = best_dv + sv;
      }

    // Bilinear interpolation between block centers gives the dense field.
    for (int y = 0; y < a.height; ++y)
      for (int x = 0; x < a.width; ++x) {
        const double fx = std::clamp((x - block / 2.0) / block, 0.0, bw - 1.0);
        const double fy = std::clamp((y - block / 2.0) / block, 0.0, bh - 1.0);
        const int bx0 = static_cast<int>(fx), by0 = static_cast<int>(fy);
        const int bx1 = std::min(bx0 + 1, bw - 1), by1 = std::min(by0 + 1, bh - 1);
        const double wx = fx - bx0, wy = fy - by0;
        auto lerp = [&](const std::vector<double>& ch) {
          return (1 - wy) * ((1 - wx) * ch[static_cast<size_t>(by0) * bw + bx0] +
                             wx * ch[static_cast<size_t>(by0) * bw + bx1]) +
                 wy * ((1 - wx) * ch[static_cast<size_t>(by1) * bw + bx0] +
                       wx * ch[static_cast<size_t>(by1) * bw + bx1]);
        };
        flow.u[flow.idx(x, y)] = lerp(bu);
        flow.v[flow.idx(x, y)] = lerp(bv);
        flow.valid.at(x, y) = 1.f;
      }
    if (l > 0) detail::median_filter_flow(flow);
  }
  return flow;
}

}  // namespace detail

// Classical coarse-to-fine stand-in for a learned flow network: 4-level
// pyramid, 16x16 block matching over +-8 px, one local least-squares
// refinement on image gradients, 5x5 median filtering between levels.
inline FlowField baseline_flow(const Image& ref, const Image& tgt, int levels = 4,
                               int block = 16, int search = 8) {
  return detail::pyramid_block_flow(ref, tgt, levels, block, search, false);
}

class BaselineFlowEstimator : public FlowEstimator {
 public:
  std::string name() const override { return "baseline"; }
  FlowField estimate(const Image& ref, const Image& tgt) const override {
    return baseline_flow(ref, tgt);
  }
};

// Forward-backward gated block-matching flow (masked variant: canvas gutters
// are treated as missing data): pixels whose round trip
// |f(p) + b(p + f(p))| exceeds the threshold carry no real correspondence
// (occluded, out of view, or matched to repeated texture). Gated-out vectors
// are replaced by a global homography fitted robustly to the consistent
// vectors: between rigidly related views the true residual motion is
// parametric, so the fill stays accurate arbitrarily far from the consistent
// region (nearest-neighbor copying is the fallback when no fit exists). The
// reversal stage assumes this kind of reliability from the estimator slot.
inline FlowField consistent_flow(const Image& ref, const Image& tgt, double threshold = 1.5) {
  // One pyramid level deeper than the plain baseline: canvas alignment must
  // bridge displacements past +-100 px when the upstream warp has failed.
  FlowField fwd = detail::pyramid_block_flow(ref, tgt, 5, 16, 8, true, 4);
  // The backward field only feeds the round-trip check, which tolerates
  // `threshold` px of slack — half resolution (with half-sized blocks, so
  // the physical block and pyramid reach match the forward pass) is plenty
  // and costs a quarter as much.
  const Image ref_half = downscale_half(to_luma(ref));
  const Image tgt_half = downscale_half(to_luma(tgt));
  const FlowField bwd = detail::pyramid_block_flow(tgt_half, ref_half, 4, 8, 8, true, 4);
  const int w = fwd.width, h = fwd.height;

  // Vectors measured near a missing-data boundary (in either frame) are
  // matched from partially-overlapping blocks and alias easily, and the
  // resulting px-level errors sit exactly where downstream anchor fills copy
  // from — so they are routed to the parametric fill along with the
  // round-trip failures. "Near" = within half a block (L-inf erosion).
  const auto eroded_valid = [&](const Image& im) {
    const Image luma = to_luma(im);
    const int r = 8;
    Mask m = make_mask(w, h, 0.f);
    std::vector<uint8_t> row(static_cast<size_t>(w) * h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        uint8_t v = 1;
        for (int dx = -r; dx <= r && v; ++dx)
          v = luma.at(std::clamp(x + dx, 0, w - 1), y) != 0.f;
        row[static_cast<size_t>(y) * w + x] = v;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        uint8_t v = 1;
        for (int dy = -r; dy <= r && v; ++dy)
          v = row[static_cast<size_t>(std::clamp(y + dy, 0, h - 1)) * w + x];
        m.at(x, y) = v ? 1.f : 0.f;
      }
    return m;
  };
  const Mask safe_ref = eroded_valid(ref);
  const Mask safe_tgt = eroded_valid(tgt);

  Mask ok = make_mask(w, h, 0.f);
  bool any = false;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t i = fwd.idx(x, y);
      const double qx = std::clamp(x + fwd.u[i], 0.0, w - 1.0);
      const double qy = std::clamp(y + fwd.v[i], 0.0, h - 1.0);
      const int bx = static_cast<int>(std::lround(qx)), by = static_cast<int>(std::lround(qy));
      if (safe_ref.at(x, y) < 0.5f || safe_tgt.at(bx, by) < 0.5f) continue;
      const size_t j = bwd.idx(std::min(bx / 2, bwd.width - 1), std::min(by / 2, bwd.height - 1));
      const double ex = fwd.u[i] + 2.0 * bwd.u[j];
      const double ey = fwd.v[i] + 2.0 * bwd.v[j];
      if (ex * ex + ey * ey <= threshold * threshold) {
        ok.at(x, y) = 1.f;
        any = true;
      }
    }
  if (!any) return fwd;  // nothing to anchor an infill on; keep the raw field

  // Global parametric fill: consistent vectors subsampled on a lattice.
  std::vector<Correspondence> pts;
  for (int y = 0; y < h; y += 6)
    for (int x = 0; x < w; x += 6) {
      if (ok.at(x, y) < 0.5f) continue;
      const size_t i = fwd.idx(x, y);
      pts.push_back({{static_cast<double>(x), static_cast<double>(y)},
                     {x + fwd.u[i], y + fwd.v[i]}});
    }
  bool fitted = false;
  Mat3 H = Mat3::Identity();
  if (pts.size() >= 16) {
    try {
      H = ransac_homography(pts, 150, 2.0, 0x5eed).h;
      fitted = true;
    } catch (const DegenerateFit&) {
    }
  }
  const std::vector<size_t> witness = fitted ? std::vector<size_t>{} : nearest_valid_map(ok);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t i = fwd.idx(x, y);
      if (ok.at(x, y) >= 0.5f) continue;
      if (fitted) {
        try {
          const Vec2 q = apply_homography(H, {static_cast<double>(x), static_cast<double>(y)});
          fwd.u[i] = q.x() - x;
          fwd.v[i] = q.y() - y;
          continue;
        } catch (const DegenerateFit&) {
        }
      }
      const size_t wi = witness.empty() ? i : witness[i];
      fwd.u[i] = fwd.u[wi];
      fwd.v[i] = fwd.v[wi];
    }
  return fwd;
}

class ConsistentFlowEstimator : public FlowEstimator {
 public:
  explicit ConsistentFlowEstimator(double threshold = 1.5) : threshold_(threshold) {}
  std::string name() const override { return "consistent"; }
  FlowField estimate(const Image& ref, const Image& tgt) const override {
    return consistent_flow(ref, tgt, threshold_);
  }

 private:
  double threshold_;
};

// Reads precomputed Middlebury flow named flow_%06d_%06d.flo per frame pair.
class FileFlowEstimator : public FlowEstimator {
 public:
  explicit FileFlowEstimator(std::string dir) : dir_(std::move(dir)) {}
  std::string name() const override { return "files:" + dir_; }
  void set_pair(int ref_index, int tgt_index) const override {
    ref_ = ref_index;
    tgt_ = tgt_index;
  }
  FlowField estimate(const Image& ref, const Image&) const override {
    char buf[64];
    std::snprintf(buf, sizeof buf, "flow_%06d_%06d.flo", ref_, tgt_);
    FlowField f = read_flo(dir_ + "/" + buf);
    if (f.width != ref.width || f.height != ref.height)
      throw DimensionMismatch("precomputed flow has wrong dimensions");
    return f;
  }

 private:
  std::string dir_;
  mutable int ref_ = 0, tgt_ = 0;
};

// Eq. 1: flow from the reference canvas to the aligned neighbor, zeroed and
// invalidated outside the reference mask.
inline FlowField estimate_masked_flow(const FlowEstimator& estimator, const Canvas& ref_canvas,
                                      const Canvas& aligned) {
  if (!ref_canvas.color.same_dims(aligned.color))
    throw DimensionMismatch("estimate_masked_flow: canvas sizes differ");
  FlowField flow = estimator.estimate(ref_canvas.color, aligned.color);
  if (flow.width != ref_canvas.color.width || flow.height != ref_canvas.color.height)
    throw DimensionMismatch("estimator returned wrong dimensions");
  for (int y = 0; y < flow.height; ++y)
    for (int x = 0; x < flow.width; ++x) {
      const bool inside = ref_canvas.mask.at(x, y) >= 0.5f;
      if (!inside) {
        flow.u[flow.idx(x, y)] = 0.0;
        flow.v[flow.idx(x, y)] = 0.0;
      }
      flow.valid.at(x, y) = inside ? 1.f : 0.f;
      if (!std::isfinite(flow.u[flow.idx(x, y)]) || !std::isfinite(flow.v[flow.idx(x, y)])) {
        flow.u[flow.idx(x, y)] = 0.0;
        flow.v[flow.idx(x, y)] = 0.0;
        flow.valid.at(x, y) = 0.f;
      }
    }
  return flow;
}

}  // namespace ovs
