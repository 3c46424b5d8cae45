#pragma once

#include "ovs/image.hpp"

namespace ovs {

struct ReversedFlow {
  FlowField flow;   // displacement from the aligned frame back to the reference
  Mask shared;      // M-tilde: aligned pixels with a correspondence in the reference
};

// Flow-reverse layer (forward splatting): each masked source pixel p with
// displacement f(p) splats -f(p) at p + f(p) with bilinear weights; outputs
// the weighted average where accumulated weight >= 0.5. Deterministic:
// fixed row-major traversal.
inline ReversedFlow reverse_flow(const FlowField& flow, const Mask& mask) {
  if (flow.width != mask.width || flow.height != mask.height)
    throw DimensionMismatch("reverse_flow: mask size differs from flow");

  const int w = flow.width, h = flow.height;
  std::vector<double> wsum(static_cast<size_t>(w) * h, 0.0);
  std::vector<double> usum(wsum), vsum(wsum);

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (mask.at(x, y) < 0.5f || flow.valid.at(x, y) < 0.5f) continue;
      const double fu = flow.u[flow.idx(x, y)];
      const double fv = flow.v[flow.idx(x, y)];
      const double tx = x + fu, ty = y + fv;
      const int x0 = static_cast<int>(std::floor(tx));
      const int y0 = static_cast<int>(std::floor(ty));
      const double ax = tx - x0, ay = ty - y0;
      const double wgt[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
      const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
      const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
      for (int k = 0; k < 4; ++k) {
        if (xs[k] < 0 || ys[k] < 0 || xs[k] >= w || ys[k] >= h || wgt[k] <= 0.0) continue;
        const size_t i = static_cast<size_t>(ys[k]) * w + xs[k];
        wsum[i] += wgt[k];
        usum[i] -= wgt[k] * fu;
        vsum[i] -= wgt[k] * fv;
      }
    }

  ReversedFlow out;
  out.flow = FlowField(w, h);
  out.shared = make_mask(w, h, 0.f);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t i = static_cast<size_t>(y) * w + x;
      if (wsum[i] >= 0.5) {
        out.flow.u[i] = usum[i] / wsum[i];
        out.flow.v[i] = vsum[i] / wsum[i];
        out.flow.valid.at(x, y) = 1.f;
        out.shared.at(x, y) = 1.f;
      }
    }
  return out;
}

}  // namespace ovs
