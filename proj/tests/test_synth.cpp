#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "ovs/synth.hpp"

using namespace ovs;

TEST_CASE("make_panorama is deterministic and in range") {
  const Image a = make_panorama(64, 48, 5);
  const Image b = make_panorama(64, 48, 5);
  const Image c = make_panorama(64, 48, 6);
  REQUIRE(a.data == b.data);
  REQUIRE(a.data != c.data);
  for (float v : a.data) {
    REQUIRE(v >= 0.f);
    REQUIRE(v <= 1.f);
  }
}

TEST_CASE("crop_protocol produces the documented geometry") {
  const Image source = make_panorama(1280, 720, 7);
  const CropProtocolResult r = crop_protocol(source, 99);
  REQUIRE(r.gt.width == 800);
  REQUIRE(r.gt.height == 640);
  REQUIRE(r.input.width == 640);
  REQUIRE(r.input.height == 480);
  REQUIRE(r.input_offset_x == 80);
  REQUIRE(r.input_offset_y == 80);
  REQUIRE(r.offset_x >= 0);
  REQUIRE(r.offset_x <= 1280 - 800);

  // The input is exactly the centered crop of gt.
  const Image centered = crop(r.gt, {80, 80, 640, 480});
  REQUIRE(centered.data == r.input.data);

  // Determinism for a fixed seed.
  const CropProtocolResult r2 = crop_protocol(source, 99);
  REQUIRE(r2.offset_x == r.offset_x);
  REQUIRE(r2.offset_y == r.offset_y);
  REQUIRE(r2.gt.data == r.gt.data);

  // Exact-size source: forced placement.
  const Image snug = crop(source, {0, 0, 800, 640});
  const CropProtocolResult r3 = crop_protocol(snug, 1);
  REQUIRE(r3.offset_x == 0);
  REQUIRE(r3.offset_y == 0);
  REQUIRE(r3.gt.data == snug.data);

  REQUIRE_THROWS_AS(crop_protocol(make_panorama(700, 700, 1), 1), SourceTooSmall);
}

TEST_CASE("degenerate jitter spec renders identical frames") {
  const Image pano = make_panorama(520, 420, 8);
  JitterSpec spec;
  spec.n_frames = 4;
  spec.smooth_amplitude = 0;
  spec.jitter_sigma = 0;
  spec.rotation_sigma = 0;
  const JitterVideo v = render_jitter_video(pano, spec, 120, 90);
  for (int i = 1; i < 4; ++i) {
    REQUIRE(v.frames[i].data == v.frames[0].data);
    REQUIRE(v.poses[i].cx == v.poses[0].cx);
    REQUIRE(v.poses[i].cy == v.poses[0].cy);
    REQUIRE(v.poses[i].angle == 0.0);
  }
}

TEST_CASE("each frame is bit-identical to the center crop of its gt canvas") {
  const Image pano = make_panorama(520, 420, 9);
  JitterSpec spec;
  spec.n_frames = 3;
  spec.smooth_amplitude = 6;
  spec.jitter_sigma = 1;
  spec.rotation_sigma = 0.3;
  const JitterVideo v = render_jitter_video(pano, spec, 120, 90);
  for (int i = 0; i < 3; ++i) {
    const int pad = v.gt[i].pad;
    const Image inner = crop(v.gt[i].color, {pad, pad, 120, 90});
    REQUIRE(inner.data == v.frames[i].data);
  }
}

TEST_CASE("translation-only jitter is self-consistent under the known shift") {
  const Image pano = make_panorama(620, 500, 10);
  JitterSpec spec;
  spec.n_frames = 4;
  spec.smooth_amplitude = 10;
  spec.smooth_period = 4;
  spec.jitter_sigma = 2;
  spec.rotation_sigma = 0;
  const JitterVideo v = render_jitter_video(pano, spec, 160, 120);

  for (int j = 1; j < 4; ++j) {
    const double dx = v.poses[j].cx - v.poses[0].cx;
    const double dy = v.poses[j].cy - v.poses[0].cy;
    // frame_j(p) = frame_0(p + d) where d is the camera shift.
    Image resampled(160, 120, 3, 0.f);
    for (int y = 0; y < 120; ++y)
      for (int x = 0; x < 160; ++x)
        for (int c = 0; c < 3; ++c)
          resampled.at(x, y, c) = sample_bilinear(v.frames[0], x + dx, y + dy, c).value;
    // Compare on the interior overlap only.
    const int mx = static_cast<int>(std::ceil(std::abs(dx))) + 2;
    const int my = static_cast<int>(std::ceil(std::abs(dy))) + 2;
    const Image a = crop(resampled, {mx, my, 160 - 2 * mx, 120 - 2 * my});
    const Image b = crop(v.frames[j], {mx, my, 160 - 2 * mx, 120 - 2 * my});
    REQUIRE(testutil::psnr_full(a, b) >= 40.0);
  }
}

TEST_CASE("trajectory excursions beyond the panorama are rejected") {
  const Image pano = make_panorama(300, 300, 11);
  JitterSpec spec;
  spec.smooth_amplitude = 120;
  REQUIRE_THROWS_AS(render_jitter_video(pano, spec, 160, 120), PanoramaTooSmall);
  REQUIRE_THROWS_AS(render_jitter_video(pano, JitterSpec{.n_frames = 1}, 32, 32),
                    std::invalid_argument);
}
