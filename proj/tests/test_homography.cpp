#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "ovs/homography.hpp"

using namespace ovs;

namespace {

std::vector<Correspondence> from_matrix(const Mat3& h, int n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 100.0);
  std::vector<Correspondence> pts;
  for (int i = 0; i < n; ++i) {
    const Vec2 p(uni(rng), uni(rng));
    pts.push_back({p, apply_homography(h, p)});
  }
  return pts;
}

}  // namespace

TEST_CASE("DLT recovers a known projective transform") {
  Mat3 h;
  h << 1.1, 0.02, 3.0, -0.01, 0.95, -2.0, 1e-4, -2e-4, 1.0;
  const Mat3 fit = fit_homography_dlt(from_matrix(h, 12, 1));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) REQUIRE(fit(i, j) == Catch::Approx(h(i, j)).margin(1e-6));
  REQUIRE(fit(2, 2) == Catch::Approx(1.0));
}

TEST_CASE("DLT throws on underdetermined input") {
  REQUIRE_THROWS_AS(fit_homography_dlt(from_matrix(Mat3::Identity(), 3, 2)), DegenerateFit);
}

TEST_CASE("RANSAC rejects 30 percent outliers") {
  Mat3 h = Mat3::Identity();
  h(0, 2) = 7.0;
  h(1, 2) = -4.0;
  auto pts = from_matrix(h, 70, 3);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> uni(-60.0, 60.0);
  for (int i = 0; i < 30; ++i) pts.push_back({Vec2(uni(rng), uni(rng)), Vec2(uni(rng), uni(rng))});

  const RansacResult r = ransac_homography(pts, 1000, 2.0, 0x5eed);
  REQUIRE(r.inliers.size() >= 70);
  const Vec2 q = apply_homography(r.h, Vec2(10.0, 20.0));
  REQUIRE(q.x() == Catch::Approx(17.0).margin(1e-3));
  REQUIRE(q.y() == Catch::Approx(16.0).margin(1e-3));
}

TEST_CASE("RANSAC is deterministic for a fixed seed") {
  auto pts = from_matrix(Mat3::Identity(), 40, 5);
  const RansacResult a = ransac_homography(pts, 1000, 2.0, 42);
  const RansacResult b = ransac_homography(pts, 1000, 2.0, 42);
  REQUIRE(a.inliers == b.inliers);
  REQUIRE((a.h - b.h).norm() == 0.0);
}

TEST_CASE("similarity fit recovers scale, rotation, translation") {
  const double s = 1.3, th = 0.2, tx = 5.0, ty = -3.0;
  std::vector<Correspondence> pts;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> uni(0.0, 50.0);
  for (int i = 0; i < 20; ++i) {
    const Vec2 p(uni(rng), uni(rng));
    pts.push_back({p, Vec2(s * (std::cos(th) * p.x() - std::sin(th) * p.y()) + tx,
                           s * (std::sin(th) * p.x() + std::cos(th) * p.y()) + ty)});
  }
  const Similarity fit = fit_similarity(pts);
  REQUIRE(fit.scale == Catch::Approx(s).margin(1e-9));
  REQUIRE(fit.rotation == Catch::Approx(th).margin(1e-9));
  REQUIRE(fit.tx == Catch::Approx(tx).margin(1e-9));
  REQUIRE(fit.ty == Catch::Approx(ty).margin(1e-9));
}
