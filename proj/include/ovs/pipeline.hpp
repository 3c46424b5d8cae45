#pragma once

#include <vector>

#include "ovs/expand.hpp"
#include "ovs/stabilize.hpp"

namespace ovs {

struct StabilizeOutput {
  std::vector<Image> frames;  // original frame size
  long hole_pixels = 0;       // invalid pixels before fill/crop
  Rect crop_rect;             // identity rect when fill != None
};

// Full stabilization pass over prepared source canvases (padded frames when
// OVS is off, expanded canvases when on). With fill=None the frames are
// cropped to the largest hole-free centered rectangle and resized back, so
// the cropping-ratio metric sees the effective zoom.
inline StabilizeOutput stabilize_pipeline(const std::vector<Image>& frames,
                                          const std::vector<Canvas>& sources, int window,
                                          HoleFill fill, int grid_size = 16,
                                          int max_keypoints = 1000, uint64_t seed = 0x5eed) {
  const Trajectory traj = estimate_trajectory(frames, grid_size, max_keypoints, seed);
  const Trajectory smoothed = smooth_trajectory(traj, window);
  StabilizedVideo sv = render_stabilized(sources, traj, smoothed, fill);

  StabilizeOutput out;
  out.hole_pixels = sv.hole_pixels;
  if (fill == HoleFill::None) {
    out.crop_rect = crop_rectangle(sv.valid);
    out.frames.reserve(sv.frames.size());
    for (const Image& f : sv.frames)
      out.frames.push_back(resize_bilinear(crop(f, out.crop_rect), traj.frame_w, traj.frame_h));
  } else {
    out.crop_rect = {0, 0, traj.frame_w, traj.frame_h};
    out.frames = std::move(sv.frames);
  }
  return out;
}

}  // namespace ovs
