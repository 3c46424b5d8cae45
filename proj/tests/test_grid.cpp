#include <catch2/catch_amalgamated.hpp>
#include <functional>
#include <random>

#include "helpers.hpp"
#include "ovs/grid.hpp"

using namespace ovs;

namespace {

std::vector<Keypoint> analytic_keypoints(int n, int w, int h, uint64_t seed,
                                         const std::function<Vec2(const Vec2&)>& map) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, w - 1.0), uy(0.0, h - 1.0);
  std::vector<Keypoint> kps;
  for (int i = 0; i < n; ++i) {
    Keypoint k;
    k.x = ux(rng);
    k.y = uy(rng);
    const Vec2 q = map(Vec2(k.x, k.y));
    k.dx = q.x() - k.x;
    k.dy = q.y() - k.y;
    kps.push_back(k);
  }
  return kps;
}

}  // namespace

TEST_CASE("translation keypoints yield a uniform translation grid") {
  const auto kps = analytic_keypoints(80, 320, 240, 1,
                                      [](const Vec2& p) { return Vec2(p.x() + 12, p.y() - 5); });
  const HomographyGrid g = propagate_to_grid(kps, 16, 16, 320, 240);
  for (const Vec2& m : g.vertex_motion) {
    REQUIRE(m.x() == Catch::Approx(12.0).margin(1e-6));
    REQUIRE(m.y() == Catch::Approx(-5.0).margin(1e-6));
  }
  const Vec2 q = apply_homography(g.cell_at(7, 7), Vec2(150.0, 120.0));
  REQUIRE(q.x() == Catch::Approx(162.0).margin(1e-6));
  REQUIRE(q.y() == Catch::Approx(115.0).margin(1e-6));
}

TEST_CASE("rotation keypoints recover per-cell rotation within 0.2 degrees") {
  const double angle = 2.0 * M_PI / 180.0;
  const double cx = 159.5, cy = 119.5;
  const auto rotmap = [&](const Vec2& p) {
    const double dx = p.x() - cx, dy = p.y() - cy;
    return Vec2(cx + std::cos(angle) * dx - std::sin(angle) * dy,
                cy + std::sin(angle) * dx + std::cos(angle) * dy);
  };
  const auto kps = analytic_keypoints(200, 320, 240, 2, rotmap);
  const HomographyGrid g = propagate_to_grid(kps, 16, 16, 320, 240);
  for (int cyi = 0; cyi < 16; ++cyi)
    for (int cxi = 0; cxi < 16; ++cxi) {
      const Mat3& h = g.cell_at(cxi, cyi);
      const double rot = std::atan2(h(1, 0), h(0, 0));
      REQUIRE(std::abs(rot - angle) < 0.2 * M_PI / 180.0);
    }
}

TEST_CASE("propagate_to_grid needs at least 8 keypoints") {
  const auto kps = analytic_keypoints(7, 100, 100, 3, [](const Vec2& p) { return p; });
  REQUIRE_THROWS_AS(propagate_to_grid(kps, 4, 4, 100, 100), DegenerateFit);
}

TEST_CASE("identity grid warp equals pad_frame") {
  const Image f = testutil::textured(64, 48, 4);
  const HomographyGrid g = HomographyGrid::identity(16, 16, 64, 48);
  const Canvas warped = warp_to_canvas(f, g, 8);
  const Canvas padded = pad_frame(f, 8);
  REQUIRE(warped.mask.data == padded.mask.data);
  for (size_t i = 0; i < warped.color.data.size(); ++i)
    REQUIRE(std::abs(warped.color.data[i] - padded.color.data[i]) < 1e-5f);
}

TEST_CASE("translated grid extends the mask into the padded band") {
  const int w = 64, h = 48, pad = 16, dx = 8;
  HomographyGrid g = HomographyGrid::identity(4, 4, w, h);
  for (Mat3& m : g.cell) m(0, 2) = dx;  // neighbor content moves +x by dx
  for (Vec2& v : g.vertex_motion) v = Vec2(dx, 0);
  const Image f = testutil::textured(w, h, 5);
  const Canvas c = warp_to_canvas(f, g, pad);
  // Valid support is the translated rectangle: x in [pad+dx, pad+dx+w).
  for (int y = pad; y < pad + h; ++y) {
    REQUIRE(c.mask.at(pad + dx + 2, y) == 1.f);
    REQUIRE(c.mask.at(pad + w + dx - 2, y) == 1.f);  // inside the shifted band
    REQUIRE(c.mask.at(pad + 2, y) == 0.f);           // vacated on the left
  }
  double band = 0;
  for (int y = pad; y < pad + h; ++y)
    for (int x = pad + w; x < pad + w + pad; ++x) band += c.mask.at(x, y);
  REQUIRE(band == Catch::Approx(static_cast<double>(dx * h)).margin(2.0 * h));
}

TEST_CASE("coarse_align_pass boundary conventions and static accuracy") {
  const Image f = testutil::textured(160, 120, 6);

  const std::vector<Image> single{f};
  const auto one = coarse_align_pass(single, PassDirection::Forward, 20);
  REQUIRE(one[0].mask.data == pad_frame(f, 20).mask.data);

  const std::vector<Image> three{f, f, f};
  for (auto dir : {PassDirection::Forward, PassDirection::Backward}) {
    const auto aligned = coarse_align_pass(three, dir, 20);
    const Canvas padded = pad_frame(f, 20);
    for (const Canvas& c : aligned) {
      const Image a = crop(c.color, c.inner_rect());
      const Image b = crop(padded.color, padded.inner_rect());
      REQUIRE(testutil::psnr_full(a, b) >= 45.0);
    }
  }
}
