#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "ovs/image.hpp"

namespace ovs {

struct SourceTooSmall : std::runtime_error {
  explicit SourceTooSmall(const std::string& what) : std::runtime_error(what) {}
};
struct PanoramaTooSmall : std::runtime_error {
  explicit PanoramaTooSmall(const std::string& what) : std::runtime_error(what) {}
};

// Multi-octave seeded value noise; corner-rich texture for trackability.
inline Image make_panorama(int width, int height, uint64_t seed = 1) {
  Image pano(width, height, 3, 0.f);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> uni(0.f, 1.f);

  // Finest octave is 8 px: features near the pixel scale are destroyed by
  // any resampling (warping, extrapolation, stabilization all interpolate),
  // so sub-Nyquist-scale noise would only measure interpolation bandwidth,
  // not alignment quality.
  const int octaves[] = {64, 32, 16, 8};
  const float amp[] = {0.38f, 0.27f, 0.22f, 0.13f};
  for (int o = 0; o < 4; ++o) {
    const int cell = octaves[o];
    const int gw = width / cell + 2, gh = height / cell + 2;
    std::vector<float> lattice(static_cast<size_t>(gw) * gh * 3);
    for (float& v : lattice) v = uni(rng);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double fx = static_cast<double>(x) / cell, fy = static_cast<double>(y) / cell;
        const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
        const double tx = fx - x0, ty = fy - y0;
        for (int c = 0; c < 3; ++c) {
          auto l = [&](int xi, int yi) {
            return lattice[(static_cast<size_t>(yi) * gw + xi) * 3 + c];
          };
          const double v = (1 - ty) * ((1 - tx) * l(x0, y0) + tx * l(x0 + 1, y0)) +
                           ty * ((1 - tx) * l(x0, y0 + 1) + tx * l(x0 + 1, y0 + 1));
          pano.at(x, y, c) += amp[o] * static_cast<float>(v);
        }
      }
  }
  for (float& v : pano.data) v = std::clamp(v, 0.f, 1.f);
  return pano;
}

struct CropProtocolResult {
  Image gt;      // ground-truth canvas (default 800x640)
  Image input;   // central crop (default 640x480)
  int offset_x = 0, offset_y = 0;              // gt origin inside the source
  int input_offset_x = 0, input_offset_y = 0;  // input origin inside gt
};

// Ground-truth construction by cropping: a random gt-sized crop of the
// source, with its centered input-sized sub-crop as the observed frame. The
// surrounding band of the gt crop is the true out-of-boundary view.
inline CropProtocolResult crop_protocol(const Image& source, uint64_t seed, int gt_w = 800,
                                        int gt_h = 640, int input_w = 640, int input_h = 480) {
  if (source.width < gt_w || source.height < gt_h)
    throw SourceTooSmall("source smaller than the ground-truth crop");
  std::mt19937_64 rng(seed);
  CropProtocolResult r;
  const int max_x = source.width - gt_w, max_y = source.height - gt_h;
  r.offset_x = max_x > 0 ? static_cast<int>(rng() % (max_x + 1)) : 0;
  r.offset_y = max_y > 0 ? static_cast<int>(rng() % (max_y + 1)) : 0;
  r.gt = crop(source, {r.offset_x, r.offset_y, gt_w, gt_h});
  r.input_offset_x = (gt_w - input_w) / 2;
  r.input_offset_y = (gt_h - input_h) / 2;
  r.input = crop(r.gt, {r.input_offset_x, r.input_offset_y, input_w, input_h});
  return r;
}

struct JitterSpec {
  int n_frames = 30;
  double smooth_amplitude = 60.0;  // px
  double smooth_period = 30.0;     // frames
  double jitter_sigma = 8.0;       // px
  double rotation_sigma = 0.5;     // degrees
  uint64_t seed = 7;
};

struct CameraPose {
  double cx = 0, cy = 0;  // window center in panorama coords
  double angle = 0;       // radians
};

struct JitterVideo {
  std::vector<Image> frames;       // input_w x input_h
  std::vector<Canvas> gt;          // canvas-sized ground-truth windows
  std::vector<CameraPose> poses;   // true trajectory
};

// Synthetic jittery sequence with exact ground truth: a sinusoidal pan plus
// seeded Gaussian translation/rotation jitter; each frame is the central
// crop of a canvas-sized window rendered from the panorama.
inline JitterVideo render_jitter_video(const Image& panorama, const JitterSpec& spec,
                                       int input_w = 640, int input_h = 480, int pad = -1) {
  if (spec.n_frames < 2) throw std::invalid_argument("need >= 2 frames");
  if (pad < 0) pad = default_pad(input_w);
  const int cw = input_w + 2 * pad, ch = input_h + 2 * pad;

  JitterVideo video;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> jitter(0.0, 1.0);
  const double rot_sigma = spec.rotation_sigma * M_PI / 180.0;

  for (int i = 0; i < spec.n_frames; ++i) {
    CameraPose pose;
    const double phase = 2.0 * M_PI * i / spec.smooth_period;
    pose.cx = panorama.width / 2.0 + spec.smooth_amplitude * std::sin(phase) +
              spec.jitter_sigma * jitter(rng);
    pose.cy = panorama.height / 2.0 + 0.5 * spec.smooth_amplitude * std::cos(phase) +
              spec.jitter_sigma * jitter(rng);
    pose.angle = rot_sigma * jitter(rng);
    video.poses.push_back(pose);
  }

  // Reject specs whose windows leave the panorama.
  for (const CameraPose& p : video.poses) {
    const double reach = 0.5 * std::hypot(cw, ch) + 2.0;
    if (p.cx - reach < 0 || p.cy - reach < 0 || p.cx + reach > panorama.width ||
        p.cy + reach > panorama.height)
      throw PanoramaTooSmall("trajectory excursion leaves the panorama");
  }

  for (const CameraPose& p : video.poses) {
    Canvas canvas;
    canvas.pad = pad;
    canvas.color = Image(cw, ch, 3, 0.f);
    canvas.mask = make_mask(cw, ch, 1.f);
    const double ca = std::cos(p.angle), sa = std::sin(p.angle);
    for (int y = 0; y < ch; ++y)
      for (int x = 0; x < cw; ++x) {
        const double dx = x - (cw - 1) / 2.0, dy = y - (ch - 1) / 2.0;
        const double sx = p.cx + ca * dx - sa * dy;
        const double sy = p.cy + sa * dx + ca * dy;
        for (int c = 0; c < 3; ++c)
          canvas.color.at(x, y, c) = sample_bilinear(panorama, sx, sy, c).value;
      }
    video.frames.push_back(crop(canvas.color, {pad, pad, input_w, input_h}));
    video.gt.push_back(std::move(canvas));
  }
  return video;
}

}  // namespace ovs
