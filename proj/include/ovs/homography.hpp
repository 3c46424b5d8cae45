#pragma once

#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "ovs/image.hpp"

namespace ovs {

using Mat3 = Eigen::Matrix3d;
using Vec2 = Eigen::Vector2d;

struct Correspondence {
  Vec2 src;
  Vec2 dst;
};

struct DegenerateFit : std::runtime_error {
  explicit DegenerateFit(const std::string& what) : std::runtime_error(what) {}
};

inline Vec2 apply_homography(const Mat3& h, const Vec2& p) {
  const double w = h(2, 0) * p.x() + h(2, 1) * p.y() + h(2, 2);
  if (std::abs(w) < 1e-12) throw DegenerateFit("homography maps point to infinity");
  return {(h(0, 0) * p.x() + h(0, 1) * p.y() + h(0, 2)) / w,
          (h(1, 0) * p.x() + h(1, 1) * p.y() + h(1, 2)) / w};
}

// Normalized DLT from >= 4 correspondences; exact for 4, least squares above.
// Result scaled so h(2,2) = 1.
inline Mat3 fit_homography_dlt(const std::vector<Correspondence>& pts) {
  const size_t n = pts.size();
  if (n < 4) throw DegenerateFit("DLT needs >= 4 correspondences");

  auto normalize = [](const std::vector<Vec2>& p) {
    Vec2 mean = Vec2::Zero();
    for (const auto& q : p) mean += q;
    mean /= static_cast<double>(p.size());
    double scale = 0;
    for (const auto& q : p) scale += (q - mean).norm();
    scale /= static_cast<double>(p.size());
    if (scale < 1e-12) scale = 1.0;
    const double s = std::sqrt(2.0) / scale;
    Mat3 t;
    t << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
    return t;
  };

  std::vector<Vec2> src(n), dst(n);
  for (size_t i = 0; i < n; ++i) {
    src[i] = pts[i].src;
    dst[i] = pts[i].dst;
  }
  const Mat3 ts = normalize(src), td = normalize(dst);

  Eigen::MatrixXd a(2 * n, 9);
  for (size_t i = 0; i < n; ++i) {
    const Vec2 s = apply_homography(ts, src[i]);
    const Vec2 d = apply_homography(td, dst[i]);
    a.row(2 * i) << -s.x(), -s.y(), -1, 0, 0, 0, d.x() * s.x(), d.x() * s.y(), d.x();
    a.row(2 * i + 1) << 0, 0, 0, -s.x(), -s.y(), -1, d.y() * s.x(), d.y() * s.y(), d.y();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd hv = svd.matrixV().col(8);
  Mat3 hn;
  hn << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), hv(8);
  Mat3 h = td.inverse() * hn * ts;
  if (std::abs(h(2, 2)) < 1e-12) throw DegenerateFit("singular homography");
  h /= h(2, 2);
  return h;
}

struct RansacResult {
  Mat3 h = Mat3::Identity();
  std::vector<int> inliers;
};

// 4-point DLT hypotheses, fixed iteration count, least-squares refit on the
// best inlier set. Deterministic for a given seed.
inline RansacResult ransac_homography(const std::vector<Correspondence>& pts,
                                      int iterations = 1000, double inlier_px = 2.0,
                                      uint64_t seed = 0x5eed) {
  const int n = static_cast<int>(pts.size());
  if (n < 4) throw DegenerateFit("RANSAC needs >= 4 correspondences");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, n - 1);
  const double thresh2 = inlier_px * inlier_px;

  std::vector<int> best;
  for (int it = 0; it < iterations; ++it) {
    int idx[4];
    idx[0] = pick(rng);
    do idx[1] = pick(rng); while (idx[1] == idx[0]);
    do idx[2] = pick(rng); while (idx[2] == idx[0] || idx[2] == idx[1]);
    do idx[3] = pick(rng); while (idx[3] == idx[0] || idx[3] == idx[1] || idx[3] == idx[2]);
    Mat3 h;
    try {
      h = fit_homography_dlt({pts[idx[0]], pts[idx[1]], pts[idx[2]], pts[idx[3]]});
    } catch (const DegenerateFit&) {
      continue;
    }
    std::vector<int> inl;
    inl.reserve(n);
    for (int i = 0; i < n; ++i) {
      Vec2 proj;
      try {
        proj = apply_homography(h, pts[i].src);
      } catch (const DegenerateFit&) {
        continue;
      }
      if ((proj - pts[i].dst).squaredNorm() <= thresh2) inl.push_back(i);
    }
    if (inl.size() > best.size()) best = std::move(inl);
  }
  if (best.size() < 8) throw DegenerateFit("RANSAC found fewer than 8 inliers");

  std::vector<Correspondence> sel;
  sel.reserve(best.size());
  for (int i : best) sel.push_back(pts[i]);
  RansacResult r;
  r.h = fit_homography_dlt(sel);
  r.inliers = std::move(best);
  return r;
}

// Global similarity (tx, ty, scale, rotation) least-squares fit.
struct Similarity {
  double tx = 0, ty = 0, scale = 1, rotation = 0;  // rotation in radians
};

inline Similarity fit_similarity(const std::vector<Correspondence>& pts) {
  if (pts.size() < 2) throw DegenerateFit("similarity fit needs >= 2 points");
  // Model dst = s R src + t; linear in (a, b, tx, ty) with a = s cos, b = s sin.
  Eigen::Matrix4d ata = Eigen::Matrix4d::Zero();
  Eigen::Vector4d atb = Eigen::Vector4d::Zero();
  for (const auto& c : pts) {
    const double x = c.src.x(), y = c.src.y();
    Eigen::Matrix<double, 2, 4> j;
    j << x, -y, 1, 0, y, x, 0, 1;
    ata += j.transpose() * j;
    atb += j.transpose() * Eigen::Vector2d(c.dst.x(), c.dst.y());
  }
  const Eigen::Vector4d sol = ata.ldlt().solve(atb);
  Similarity s;
  s.scale = std::hypot(sol(0), sol(1));
  s.rotation = std::atan2(sol(1), sol(0));
  s.tx = sol(2);
  s.ty = sol(3);
  return s;
}

}  // namespace ovs
