#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "helpers.hpp"
#include "ovs/metrics.hpp"

using namespace ovs;

namespace {

// Output shows the central `zoom` fraction of the input, resized back.
Image zoom_render(const Image& src, double zoom_x, double zoom_y) {
  Image out(src.width, src.height, src.channels, 0.f);
  const double cx = (src.width - 1) / 2.0, cy = (src.height - 1) / 2.0;
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x)
      for (int c = 0; c < src.channels; ++c)
        out.at(x, y, c) = sample_bilinear(src, cx + zoom_x * (x - cx), cy + zoom_y * (y - cy),
                                          c).value;
  return out;
}

std::vector<Image> video(int n, int w, int h, uint64_t seed) {
  std::vector<Image> frames;
  for (int i = 0; i < n; ++i) frames.push_back(testutil::textured(w, h, seed + i));
  return frames;
}

}  // namespace

TEST_CASE("identity videos score cropping and distortion 1.0") {
  const auto frames = video(6, 160, 120, 50);
  REQUIRE(cropping_ratio(frames, frames) == Catch::Approx(1.0).margin(0.01));
  REQUIRE(distortion(frames, frames) == Catch::Approx(1.0).margin(0.01));
}

TEST_CASE("a 0.9 zoom scores cropping 0.9") {
  const auto frames = video(6, 160, 120, 51);
  std::vector<Image> zoomed;
  for (const Image& f : frames) zoomed.push_back(zoom_render(f, 0.9, 0.9));
  REQUIRE(cropping_ratio(frames, zoomed) == Catch::Approx(0.9).margin(0.02));
}

TEST_CASE("a (1.0, 0.8) stretch scores distortion 0.8") {
  const auto frames = video(6, 160, 120, 52);
  std::vector<Image> stretched;
  for (const Image& f : frames) stretched.push_back(zoom_render(f, 1.0, 0.8));
  REQUIRE(distortion(frames, stretched) == Catch::Approx(0.8).margin(0.02));
}

TEST_CASE("pure rotation keeps distortion near 1") {
  const auto frames = video(6, 160, 120, 53);
  std::vector<Image> rotated;
  for (const Image& f : frames) rotated.push_back(testutil::rotate_render(f, 0.03));
  REQUIRE(distortion(frames, rotated) == Catch::Approx(1.0).margin(0.02));
}

TEST_CASE("stability: static video scores 1.0; sinusoid bins behave") {
  const Image f = testutil::textured(120, 90, 54);
  const std::vector<Image> still(36, f);
  REQUIRE(stability(still) == 1.0);

  // Rigid trajectories rendered from a panorama window; translation and
  // rotation all carry their energy at one frequency bin so every similarity
  // component sees real signal.
  const Image pano = testutil::textured(400, 300, 55);
  auto render_traj = [&](int n, int bin) {
    std::vector<Image> frames;
    const double ccx = 100 + 80, ccy = 80 + 60;  // window center in panorama
    for (int i = 0; i < n; ++i) {
      const double phase = std::sin(2.0 * M_PI * i * bin / n);
      const double tx = 15.0 * phase, ty = 9.0 * phase, rot = 0.03 * phase;
      const double cr = std::cos(rot), sr = std::sin(rot);
      Image frame(160, 120, 3, 0.f);
      for (int y = 0; y < 120; ++y)
        for (int x = 0; x < 160; ++x) {
          const double dx = (100 + x) - ccx, dy = (80 + y) - ccy;
          const double sx = ccx + cr * dx - sr * dy + tx;
          const double sy = ccy + sr * dx + cr * dy + ty;
          for (int c = 0; c < 3; ++c)
            frame.at(x, y, c) = sample_bilinear(pano, sx, sy, c).value;
        }
      frames.push_back(std::move(frame));
    }
    return frames;
  };

  const int n = 64;
  // Bin 3 of 64 frames: all motion energy lands in the low band.
  REQUIRE(stability(render_traj(n, 3)) >= 0.95);
  // Bin 16 (N/4): outside bins 2..6.
  REQUIRE(stability(render_traj(n, 16)) <= 0.1);

  REQUIRE_THROWS_AS(stability(std::vector<Image>(10, f)), TooShort);
}

TEST_CASE("psnr: exact values and errors") {
  const Image a(8, 8, 3, 0.f);
  const Image b(8, 8, 3, 0.1f);
  const Mask full = make_mask(8, 8, 1.f);
  REQUIRE(psnr(a, a, full) == 99.0);
  REQUIRE(psnr(a, b, full) == Catch::Approx(20.0).margin(1e-4));
  REQUIRE_THROWS_AS(psnr(a, b, make_mask(8, 8, 0.f)), EmptyRegion);
}

TEST_CASE("ssim: identity is 1, negatives score below zero on texture") {
  // High-contrast checkerboard: anti-correlated windows must score negative.
  Image img(32, 32, 3, 0.f);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = ((x / 2 + y / 2) % 2) ? 1.f : 0.f;
  const Mask full = make_mask(32, 32, 1.f);
  REQUIRE(ssim(img, img, full) == Catch::Approx(1.0).margin(1e-9));
  Image neg = img;
  for (float& v : neg.data) v = 1.f - v;
  REQUIRE(ssim(img, neg, full) < 0.0);
  REQUIRE_THROWS_AS(ssim(img, neg, make_mask(32, 32, 0.f)), EmptyRegion);
}

TEST_CASE("eval_losses hand cases") {
  const int w = 4, h = 4;
  const Mask ones = make_mask(w, h, 1.f);

  // Perfect reconstruction: residuals collapse to epsilon.
  const Image img = to_luma(testutil::textured(w, h, 57));
  const EdgeMap edges = sobel_edges(img);
  const LossReport perfect = eval_losses(img, edges, ones, img, edges, ones);
  REQUIRE(perfect.l_image == Catch::Approx(1e-12).margin(1e-15));
  REQUIRE(perfect.l_edge == Catch::Approx(1e-12).margin(1e-15));
  REQUIRE(perfect.l_mask == 0.0);

  // One wrong pixel with delta 0.5 in one channel, mask all ones.
  Image wrong = img;
  wrong.at(1, 2, 0) += 0.5f;
  const LossReport one_off = eval_losses(wrong, edges, ones, img, edges, ones);
  REQUIRE(one_off.l_image == Catch::Approx(0.5 / 16.0).margin(1e-6));

  // All-zero extrapolated mask: full shrinkage penalty.
  Mask pre = make_mask(w, h, 0.f);
  pre.at(0, 0) = 1.f;
  pre.at(3, 3) = 1.f;
  const LossReport shrunk = eval_losses(img, edges, make_mask(w, h, 0.f), img, edges, pre);
  REQUIRE(shrunk.l_mask == Catch::Approx(2.0 / 16.0).margin(1e-12));

  REQUIRE(one_off.combined() ==
          Catch::Approx(one_off.l_image + 2 * one_off.l_edge + 2 * one_off.l_mask));
}
