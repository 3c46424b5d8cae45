#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "helpers.hpp"
#include "ovs/pipeline.hpp"
#include "ovs/stabilize.hpp"
#include "ovs/synth.hpp"

using namespace ovs;

TEST_CASE("gaussian smoothing kills Nyquist jitter: amplitude < 0.15a for window 31") {
  Trajectory t;
  t.rows = t.cols = 1;
  t.frame_w = t.frame_h = 100;
  t.cell_w = t.cell_h = 100;
  const int n = 120;
  const double a = 10.0;
  t.vertex.assign(n, std::vector<Vec2>(4, Vec2::Zero()));
  for (int i = 0; i < n; ++i)
    for (int v = 0; v < 4; ++v) t.vertex[i][v] = Vec2((i % 2 ? a : -a), 0.0);
  t.global.resize(n);
  const Trajectory s = smooth_trajectory(t, 31);
  for (int i = 20; i < n - 20; ++i)  // away from clipped ends
    REQUIRE(std::abs(s.vertex[i][0].x()) < 0.15 * a);
}

TEST_CASE("smoothing preserves a constant trajectory exactly") {
  Trajectory t;
  t.rows = t.cols = 1;
  t.frame_w = t.frame_h = 100;
  t.cell_w = t.cell_h = 100;
  t.vertex.assign(40, std::vector<Vec2>(4, Vec2(3.0, -2.0)));
  t.global.resize(40);
  const Trajectory s = smooth_trajectory(t, 31);
  for (int i = 0; i < 40; ++i) {
    REQUIRE(s.vertex[i][0].x() == Catch::Approx(3.0).margin(1e-12));
    REQUIRE(s.vertex[i][0].y() == Catch::Approx(-2.0).margin(1e-12));
  }
}

TEST_CASE("estimate_trajectory recovers a known translation path within 1 px RMS") {
  const Image pano = make_panorama(700, 560, 40);
  JitterSpec spec;
  spec.n_frames = 8;
  spec.smooth_amplitude = 12;
  spec.smooth_period = 8;
  spec.jitter_sigma = 2;
  spec.rotation_sigma = 0.0;  // translation-only
  spec.seed = 11;
  const JitterVideo video = render_jitter_video(pano, spec, 160, 120);
  const Trajectory traj = estimate_trajectory(video.frames, 8, 400);

  double se = 0;
  for (int i = 0; i < spec.n_frames; ++i) {
    // Content displacement is opposite the camera displacement.
    const double gx = -(video.poses[i].cx - video.poses[0].cx);
    const double gy = -(video.poses[i].cy - video.poses[0].cy);
    se += (traj.global[i].tx - gx) * (traj.global[i].tx - gx) +
          (traj.global[i].ty - gy) * (traj.global[i].ty - gy);
  }
  REQUIRE(std::sqrt(se / spec.n_frames) < 1.0);
}

TEST_CASE("identity stabilization reproduces the inner frame without holes") {
  const Image f = testutil::textured(96, 80, 41);
  Trajectory t;
  t.rows = t.cols = 4;
  t.frame_w = 96;
  t.frame_h = 80;
  t.cell_w = 96 / 4.0;
  t.cell_h = 80 / 4.0;
  t.vertex.assign(3, std::vector<Vec2>(25, Vec2::Zero()));
  t.global.resize(3);
  const std::vector<Canvas> sources(3, pad_frame(f, 12));
  const StabilizedVideo sv = render_stabilized(sources, t, t, HoleFill::None);
  REQUIRE(sv.hole_pixels == 0);
  for (const Image& out : sv.frames)
    for (size_t i = 0; i < out.data.size(); ++i)
      REQUIRE(std::abs(out.data[i] - f.data[i]) < 1e-5f);
}

TEST_CASE("nearest fill leaves no invalid pixels") {
  const Image f = testutil::textured(96, 80, 42);
  Trajectory t;
  t.rows = t.cols = 4;
  t.frame_w = 96;
  t.frame_h = 80;
  t.cell_w = 24;
  t.cell_h = 20;
  t.vertex.assign(2, std::vector<Vec2>(25, Vec2::Zero()));
  t.global.resize(2);
  Trajectory moved = t;
  for (auto& vs : moved.vertex)
    for (auto& v : vs) v = Vec2(30.0, 0.0);  // large correction forces holes
  const std::vector<Canvas> sources(2, pad_frame(f, 12));

  const StabilizedVideo holes = render_stabilized(sources, t, moved, HoleFill::None);
  REQUIRE(holes.hole_pixels > 0);

  const StabilizedVideo filled = render_stabilized(sources, t, moved, HoleFill::Nearest);
  REQUIRE(filled.hole_pixels == holes.hole_pixels);  // counted pre-fill
  for (const Mask& m : filled.valid) REQUIRE(mask_area(m) == m.pixels());
}

TEST_CASE("crop_rectangle matches a brute-force oracle") {
  std::mt19937 rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    const int w = 24, h = 18;
    Mask m = make_mask(w, h, 1.f);
    for (int i = 0; i < 30; ++i) {
      const int x = rng() % w, y = rng() % h;
      if (std::abs(x - w / 2) < 3 && std::abs(y - h / 2) < 3) continue;  // keep center valid
      m.at(x, y) = 0.f;
    }
    const Rect got = crop_rectangle({m});

    Rect expected{0, 0, 0, 0};
    for (int rw = w; rw >= 1; --rw) {
      const int rh = std::max(1, static_cast<int>(std::lround(static_cast<double>(rw) * h / w)));
      if (rh > h) continue;
      const Rect r{(w - rw) / 2, (h - rh) / 2, rw, rh};
      bool ok = true;
      for (int y = r.y; y < r.y + r.h && ok; ++y)
        for (int x = r.x; x < r.x + r.w; ++x)
          if (m.at(x, y) < 0.5f) {
            ok = false;
            break;
          }
      if (ok) {
        expected = r;
        break;
      }
    }
    REQUIRE(got.x == expected.x);
    REQUIRE(got.y == expected.y);
    REQUIRE(got.w == expected.w);
    REQUIRE(got.h == expected.h);
  }
}

TEST_CASE("crop_rectangle throws when the center pixel is never valid") {
  Mask m = make_mask(10, 10, 0.f);
  REQUIRE_THROWS_AS(crop_rectangle({m}), DegenerateCrop);
}
