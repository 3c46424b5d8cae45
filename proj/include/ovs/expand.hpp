#pragma once

#include <functional>
#include <vector>

#include "ovs/affinity.hpp"
#include "ovs/flow.hpp"
#include "ovs/flow_reverse.hpp"
#include "ovs/grid.hpp"
#include "ovs/image.hpp"

namespace ovs {

// Backward sampling through a flow field: output[q] = source(q + flow(q)).
// Invalid samples (outside the raster or on source-mask 0) yield mask 0.
inline Canvas extrapolate(const Canvas& source, const FlowField& flow) {
  if (flow.width != source.color.width || flow.height != source.color.height)
    throw DimensionMismatch("extrapolate: flow does not cover source");
  Canvas out;
  out.pad = source.pad;
  out.color = Image(source.color.width, source.color.height, source.color.channels, 0.f);
  out.mask = make_mask(source.color.width, source.color.height, 0.f);
  for (int y = 0; y < flow.height; ++y)
    for (int x = 0; x < flow.width; ++x) {
      const double sx = x + flow.u[flow.idx(x, y)];
      const double sy = y + flow.v[flow.idx(x, y)];
      if (sample_mask(source.mask, sx, sy) < 0.5f) continue;
      out.mask.at(x, y) = 1.f;
      for (int c = 0; c < out.color.channels; ++c)
        out.color.at(x, y, c) = sample_bilinear(source.color, sx, sy, c).value;
    }
  return out;
}

inline EdgeMap extrapolate(const EdgeMap& source, const FlowField& flow) {
  EdgeMap out(source.width, source.height, 1);
  for (int y = 0; y < flow.height; ++y)
    for (int x = 0; x < flow.width; ++x)
      out.at(x, y) = sample_bilinear(source, x + flow.u[flow.idx(x, y)],
                                     y + flow.v[flow.idx(x, y)]).value;
  return out;
}

inline Mask extrapolate_mask(const Mask& source, const FlowField& flow) {
  Mask out = make_mask(source.width, source.height, 0.f);
  for (int y = 0; y < flow.height; ++y)
    for (int x = 0; x < flow.width; ++x)
      out.at(x, y) = sample_mask(source, x + flow.u[flow.idx(x, y)],
                                 y + flow.v[flow.idx(x, y)]);
  return out;
}

// Reference pixels always win; contributions only fill invalid pixels.
inline Canvas composite(const Canvas& ref, const Canvas& contribution) {
  if (!ref.color.same_dims(contribution.color))
    throw DimensionMismatch("composite: canvas sizes differ");
  Canvas out = ref;
  for (int y = 0; y < ref.color.height; ++y)
    for (int x = 0; x < ref.color.width; ++x) {
      if (ref.mask.at(x, y) >= 0.5f || contribution.mask.at(x, y) < 0.5f) continue;
      out.mask.at(x, y) = 1.f;
      for (int c = 0; c < out.color.channels; ++c)
        out.color.at(x, y, c) = contribution.color.at(x, y, c);
    }
  return out;
}

struct ExpandParams {
  int pad = 80;
  int grid_size = 16;
  int max_keypoints = 1000;
  AffinityParams affinity;
  PropagationParams propagation;
  uint64_t seed = 0x5eed;
};

struct FineAlignResult {
  Canvas canvas;
  FlowField flow;
  bool refined = false;  // false when the shared view was empty
};

// Fine alignment stage: masked flow -> flow reversal -> affinity ->
// anchored propagation -> extrapolation of the coarse-aligned canvas.
// The propagated flow points from the aligned frame toward the reference,
// so extrapolation samples against it (q - B(q)).
inline FineAlignResult fine_align(const Canvas& ref, const Canvas& coarse_aligned,
                                  const FlowEstimator& estimator,
                                  const ExpandParams& params = {}) {
  FineAlignResult result;
  const FlowField masked = estimate_masked_flow(estimator, ref, coarse_aligned);
  const ReversedFlow rev = reverse_flow(masked, ref.mask);

  FlowField b0;
  try {
    const Mask domain = make_mask(ref.color.width, ref.color.height, 1.f);
    b0 = init_refined_flow(rev.flow, rev.shared, domain);
  } catch (const EmptySharedView&) {
    result.canvas = coarse_aligned;
    result.flow = FlowField(ref.color.width, ref.color.height);
    return result;
  }

  const EdgeMap ref_edges = sobel_edges(ref.color);
  const EdgeMap aligned_edges = sobel_edges(coarse_aligned.color);
  const AffinityField aff =
      compute_affinity(ref, coarse_aligned, ref_edges, aligned_edges, params.affinity);
  result.flow = propagate(b0, rev.shared, aff, params.propagation);

  FlowField sampling(result.flow.width, result.flow.height);
  for (size_t i = 0; i < sampling.u.size(); ++i) {
    sampling.u[i] = -result.flow.u[i];
    sampling.v[i] = -result.flow.v[i];
  }
  sampling.valid = result.flow.valid;
  result.canvas = extrapolate(coarse_aligned, sampling);
  result.refined = true;
  return result;
}

enum class ExpandMode { CoarseOnly, FineOnly, Full };

inline ExpandMode expand_mode_from_string(const std::string& s) {
  if (s == "coarse" || s == "coarse_only") return ExpandMode::CoarseOnly;
  if (s == "fine" || s == "fine_only") return ExpandMode::FineOnly;
  if (s == "full") return ExpandMode::Full;
  throw std::invalid_argument("unknown expand mode: " + s);
}

// Align one neighbor canvas onto a reference canvas. Failures degrade to the
// unwarped neighbor (identity grid); an empty shared view skips refinement.
inline Canvas align_canvas(const Canvas& ref, const Canvas& neighbor, ExpandMode mode,
                           const FlowEstimator& estimator, const ExpandParams& params,
                           uint64_t seed) {
  Canvas aligned = neighbor;
  if (mode != ExpandMode::FineOnly) {
    try {
      const auto kps = detect_and_track(ref.color, neighbor.color, params.max_keypoints,
                                        &neighbor.mask, 3);
      const HomographyGrid grid =
          propagate_to_grid(kps, params.grid_size, params.grid_size, neighbor.color.width,
                            neighbor.color.height, seed);
      aligned = warp_canvas(neighbor, grid, ref.color.width, ref.color.height, 0, 0);
    } catch (const TooFewKeypoints&) {
    } catch (const DegenerateFit&) {
    }
  }
  if (mode != ExpandMode::CoarseOnly) aligned = fine_align(ref, aligned, estimator, params).canvas;
  return aligned;
}

// Iterative out-of-boundary expansion: iteration k composites the expanded
// canvases of neighbors at temporal distance k (forward neighbor first) onto
// each reference canvas. Iteration 0 is plain padding.
inline std::vector<Canvas> expand_sequence(
    const std::vector<Image>& frames, int iterations, ExpandMode mode,
    const FlowEstimator& estimator, const ExpandParams& params = {},
    const std::function<void(int, const std::vector<Canvas>&)>& snapshot = nullptr) {
  const int n = static_cast<int>(frames.size());
  std::vector<Canvas> canvases(n);
  for (int i = 0; i < n; ++i) canvases[i] = pad_frame(frames[i], params.pad);
  if (snapshot) snapshot(0, canvases);

  for (int k = 1; k <= iterations; ++k) {
    const std::vector<Canvas> prev = canvases;
    for (int i = 0; i < n; ++i) {
      for (const int j : {i - k, i + k}) {
        if (j < 0 || j >= n) continue;
        const uint64_t seed =
            params.seed ^ (static_cast<uint64_t>(i) * 0x9e3779b97f4a7c15ULL +
                           static_cast<uint64_t>(j) * 0xc2b2ae3d27d4eb4fULL + k);
        estimator.set_pair(i, j);
        const Canvas contribution = align_canvas(prev[i], prev[j], mode, estimator, params, seed);
        canvases[i] = composite(canvases[i], contribution);
      }
    }
    if (snapshot) snapshot(k, canvases);
  }
  return canvases;
}

}  // namespace ovs
