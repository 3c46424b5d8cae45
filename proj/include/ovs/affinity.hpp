#pragma once

#include <limits>
#include <stdexcept>
#include <vector>

#include "ovs/image.hpp"

namespace ovs {

// Per-pixel normalized neighborhood kernel of size (2r+1)^2. Weight k for
// offset (a,b), k = (a+r)*(2r+1)+(b+r), couples pixel (x,y) to its neighbor
// (x-b, y-a). Stored plane-major (one plane per offset) in double: kernel
// sums are asserted at 1e-12.
struct AffinityField {
  int width = 0, height = 0, r = 0;
  // Per-pixel kernels, kernel-contiguous: weights[i * kernel_size() + k].
  std::vector<double> weights;

  AffinityField() = default;
  AffinityField(int w, int h, int radius)
      : width(w), height(h), r(radius),
        weights(static_cast<size_t>(w) * h * kernel_size(), 0.0) {}

  int kernel_size() const { return (2 * r + 1) * (2 * r + 1); }
  int center_index() const { return r * (2 * r + 1) + r; }
  size_t npix() const { return static_cast<size_t>(width) * height; }

  double* kernel(size_t i) { return weights.data() + i * kernel_size(); }
  const double* kernel(size_t i) const { return weights.data() + i * kernel_size(); }

  double at(int x, int y, int k) const {
    return kernel(static_cast<size_t>(y) * width + x)[k];
  }
};

struct AffinityParams {
  int radius = 4;
  double sigma_color = 0.1;
  double sigma_edge = 0.2;
  double lambda_cap = 0.99;
};

// Handcrafted bilateral affinity from color + Sobel-edge similarity on the
// guide image (aligned content where available, reference elsewhere).
// Off-center weights are scaled so their sum lambda <= lambda_cap; the
// center weight is 1 - lambda.
inline AffinityField compute_affinity(const Canvas& ref, const Canvas& aligned,
                                      const EdgeMap& ref_edges, const EdgeMap& aligned_edges,
                                      const AffinityParams& params = {}) {
  if (!ref.color.same_dims(aligned.color) || ref_edges.width != ref.color.width ||
      aligned_edges.width != ref.color.width)
    throw DimensionMismatch("compute_affinity: raster sizes differ");
  if (params.radius < 1) throw std::invalid_argument("affinity radius must be >= 1");

  const int w = ref.color.width, h = ref.color.height, r = params.radius;
  const size_t npix = static_cast<size_t>(w) * h;

  // Guide image: aligned color/edges on the aligned support, reference elsewhere.
  std::vector<float> guide(npix * 3), guide_edge(npix);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t i = static_cast<size_t>(y) * w + x;
      const bool use_aligned = aligned.mask.at(x, y) >= 0.5f;
      const Image& src = use_aligned ? aligned.color : ref.color;
      for (int c = 0; c < 3; ++c) guide[i * 3 + c] = src.at(x, y, c);
      guide_edge[i] = use_aligned ? aligned_edges.at(x, y) : ref_edges.at(x, y);
    }

  AffinityField aff(w, h, r);
  const int side = 2 * r + 1;
  const int kc = aff.center_index();
  const double inv2sc = 1.0 / (2.0 * params.sigma_color * params.sigma_color);
  const double inv2sg = 1.0 / (2.0 * params.sigma_edge * params.sigma_edge);

  const int ks = aff.kernel_size();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t i = static_cast<size_t>(y) * w + x;
      double* kern = aff.kernel(i);
      double sum = 0;
      for (int a = -r; a <= r; ++a) {
        const int ny = std::clamp(y - a, 0, h - 1);
        for (int b = -r; b <= r; ++b) {
          const int k = (a + r) * side + (b + r);
          if (k == kc) continue;
          const int nx = std::clamp(x - b, 0, w - 1);
          const size_t j = static_cast<size_t>(ny) * w + nx;
          double dc2 = 0;
          for (int c = 0; c < 3; ++c) {
            const double d = guide[i * 3 + c] - guide[j * 3 + c];
            dc2 += d * d;
          }
          const double de = guide_edge[i] - guide_edge[j];
          const double wgt = std::exp(-(dc2 * inv2sc + de * de * inv2sg));
          kern[k] = wgt;
          sum += wgt;
        }
      }
      // Normalize: off-center sum becomes min(sum, lambda_cap), center the rest.
      const double lambda = std::min(sum, params.lambda_cap);
      const double scale = sum > 0 ? lambda / sum : 0.0;
      for (int k = 0; k < ks; ++k)
        if (k != kc) kern[k] *= scale;
      kern[kc] = 1.0 - lambda;
    }
  return aff;
}

struct EmptySharedView : std::runtime_error {
  explicit EmptySharedView(const std::string& what) : std::runtime_error(what) {}
};

// Anchor flow: reversed flow inside the shared view, nearest shared pixel
// (Euclidean, ties to the smaller linear index) elsewhere in the domain.
inline FlowField init_refined_flow(const FlowField& rev_flow, const Mask& shared,
                                   const Mask& domain) {
  const int w = rev_flow.width, h = rev_flow.height;
  if (shared.width != w || shared.height != h || domain.width != w || domain.height != h)
    throw DimensionMismatch("init_refined_flow: mask sizes differ");

  bool any = false;
  for (float v : shared.data)
    if (v >= 0.5f) {
      any = true;
      break;
    }
  if (!any) throw EmptySharedView("shared view has no valid pixel");

  const std::vector<size_t> witness = nearest_valid_map(shared);
  FlowField out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t i = static_cast<size_t>(y) * w + x;
      out.valid.at(x, y) = domain.at(x, y) >= 0.5f ? 1.f : 0.f;
      if (out.valid.at(x, y) < 0.5f) continue;
      const size_t src = shared.data[i] >= 0.5f ? i : witness[i];
      out.u[i] = rev_flow.u[src];
      out.v[i] = rev_flow.v[src];
    }
  return out;
}

struct PropagationParams {
  int max_sweeps = 200;
  double tolerance_px = 0.01;
  double anchor_ratio = 0.9;
};

struct PropagationDiag {
  int sweeps = 0;
  std::vector<double> delta_global;   // max per-pixel change per sweep
  std::vector<double> delta_outside;  // same, restricted outside the shared view
};

namespace detail {

// One Jacobi sweep of Eq. 6 for a single channel; out-of-raster neighbor
// reads clamp to the border. Interior pixels take the precomputed-offset fast
// path; kernels are contiguous per pixel so each weight is streamed once.
inline void propagate_sweep(const AffinityField& aff, const std::vector<double>& anchor,
                            const std::vector<double>& cur, std::vector<double>& next) {
  const int w = aff.width, h = aff.height, r = aff.r, side = 2 * r + 1;
  const int kc = aff.center_index();
  const int ks = aff.kernel_size();

  std::vector<long> off(ks);
  for (int a = -r; a <= r; ++a)
    for (int b = -r; b <= r; ++b) off[(a + r) * side + (b + r)] = -(static_cast<long>(a) * w + b);

  for (int y = 0; y < h; ++y) {
    const bool y_in = y >= r && y < h - r;
    for (int x = 0; x < w; ++x) {
      const size_t i = static_cast<size_t>(y) * w + x;
      const double* kern = aff.kernel(i);
      double acc = kern[kc] * anchor[i];
      if (y_in && x >= r && x < w - r) {
        for (int k = 0; k < ks; ++k)
          if (k != kc) acc += kern[k] * cur[i + off[k]];
      } else {
        for (int a = -r; a <= r; ++a) {
          const int ny = std::clamp(y - a, 0, h - 1);
          for (int b = -r; b <= r; ++b) {
            const int k = (a + r) * side + (b + r);
            if (k == kc) continue;
            const int nx = std::clamp(x - b, 0, w - 1);
            acc += kern[k] * cur[static_cast<size_t>(ny) * w + nx];
          }
        }
      }
      next[i] = acc;
    }
  }
}

// Fused two-channel sweep: identical arithmetic to propagate_sweep applied to
// (au,cu,nu) and (av,cv,nv), reading each kernel once.
inline void propagate_sweep_uv(const AffinityField& aff, const std::vector<double>& au,
                               const std::vector<double>& av, const std::vector<double>& cu,
                               const std::vector<double>& cv, std::vector<double>& nu,
                               std::vector<double>& nv) {
  const int w = aff.width, h = aff.height, r = aff.r, side = 2 * r + 1;
  const int kc = aff.center_index();
  const int ks = aff.kernel_size();

  std::vector<long> off(ks);
  for (int a = -r; a <= r; ++a)
    for (int b = -r; b <= r; ++b) off[(a + r) * side + (b + r)] = -(static_cast<long>(a) * w + b);

  for (int y = 0; y < h; ++y) {
    const bool y_in = y >= r && y < h - r;
    for (int x = 0; x < w; ++x) {
      const size_t i = static_cast<size_t>(y) * w + x;
      const double* kern = aff.kernel(i);
      double accu = kern[kc] * au[i];
      double accv = kern[kc] * av[i];
      if (y_in && x >= r && x < w - r) {
        for (int k = 0; k < ks; ++k) {
          if (k == kc) continue;
          accu += kern[k] * cu[i + off[k]];
          accv += kern[k] * cv[i + off[k]];
        }
      } else {
        for (int a = -r; a <= r; ++a) {
          const int ny = std::clamp(y - a, 0, h - 1);
          for (int b = -r; b <= r; ++b) {
            const int k = (a + r) * side + (b + r);
            if (k == kc) continue;
            const size_t j = static_cast<size_t>(ny) * w + std::clamp(x - b, 0, w - 1);
            accu += kern[k] * cu[j];
            accv += kern[k] * cv[j];
          }
        }
      }
      nu[i] = accu;
      nv[i] = accv;
    }
  }
}

}  // namespace detail

// Anchored Jacobi propagation (Eq. 6) with the slow-update blend on the
// shared view (Eq. 12). Early exit when the max per-pixel change drops
// below tolerance_px; hard cap max_sweeps.
inline FlowField propagate(const FlowField& b0, const Mask& shared, const AffinityField& aff,
                           const PropagationParams& params = {},
                           PropagationDiag* diag = nullptr) {
  const int w = aff.width, h = aff.height;
  if (b0.width != w || b0.height != h || shared.width != w || shared.height != h)
    throw DimensionMismatch("propagate: sizes differ");
  const size_t npix = aff.npix();

  std::vector<double> cu = b0.u, cv = b0.v, nu(npix), nv(npix);
  for (int t = 0; t < params.max_sweeps; ++t) {
    detail::propagate_sweep_uv(aff, b0.u, b0.v, cu, cv, nu, nv);

    // Slow update: keep the reliable shared-view flow close to its anchor.
    const double keep = 1.0 - params.anchor_ratio;
    for (size_t i = 0; i < npix; ++i) {
      if (shared.data[i] >= 0.5f) {
        nu[i] = keep * nu[i] + params.anchor_ratio * b0.u[i];
        nv[i] = keep * nv[i] + params.anchor_ratio * b0.v[i];
      }
    }

    double dmax = 0, dmax_out = 0;
    for (size_t i = 0; i < npix; ++i) {
      const double d = std::max(std::abs(nu[i] - cu[i]), std::abs(nv[i] - cv[i]));
      dmax = std::max(dmax, d);
      if (shared.data[i] < 0.5f) dmax_out = std::max(dmax_out, d);
    }
    cu.swap(nu);
    cv.swap(nv);
    if (diag) {
      diag->sweeps = t + 1;
      diag->delta_global.push_back(dmax);
      diag->delta_outside.push_back(dmax_out);
    }
    if (dmax < params.tolerance_px) break;
  }

  FlowField out(w, h);
  out.u = std::move(cu);
  out.v = std::move(cv);
  out.valid = b0.valid;
  return out;
}

}  // namespace ovs
