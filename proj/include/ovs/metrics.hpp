#pragma once

#include <complex>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ovs/features.hpp"
#include "ovs/homography.hpp"
#include "ovs/image.hpp"

namespace ovs {

struct FitFailure : std::runtime_error {
  explicit FitFailure(const std::string& what) : std::runtime_error(what) {}
};
struct EmptyRegion : std::runtime_error {
  explicit EmptyRegion(const std::string& what) : std::runtime_error(what) {}
};
struct TooShort : std::runtime_error {
  explicit TooShort(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

// Global homography mapping input-frame coords to output-frame coords,
// or nullopt when the frame is untrackable.
inline std::optional<Mat3> frame_homography(const Image& input, const Image& output,
                                            uint64_t seed = 0x5eed) {
  try {
    // Keypoints in the input frame, tracked toward the output frame.
    const auto kps = detect_and_track(output, input, 1000);
    std::vector<Correspondence> corr;
    corr.reserve(kps.size());
    for (const auto& k : kps) corr.push_back({Vec2(k.x, k.y), Vec2(k.x + k.dx, k.y + k.dy)});
    return ransac_homography(corr, 1000, 2.0, seed).h;
  } catch (const TooFewKeypoints&) {
    return std::nullopt;
  } catch (const DegenerateFit&) {
    return std::nullopt;
  }
}

inline void affine_singular_values(const Mat3& h, double& s1, double& s2) {
  Eigen::Matrix2d a = h.topLeftCorner<2, 2>();
  const Eigen::JacobiSVD<Eigen::Matrix2d> svd(a);
  s1 = svd.singularValues()(0);
  s2 = svd.singularValues()(1);
}

template <typename PerFrame>
inline std::vector<double> per_frame_metric(const std::vector<Image>& input,
                                            const std::vector<Image>& output, PerFrame fn) {
  if (input.size() != output.size())
    throw DimensionMismatch("metric: frame counts differ");
  std::vector<double> values;
  size_t skipped = 0;
  for (size_t i = 0; i < input.size(); ++i) {
    const auto h = frame_homography(input[i], output[i]);
    if (!h) {
      ++skipped;
      continue;
    }
    values.push_back(fn(*h));
  }
  if (skipped * 2 > input.size())
    throw FitFailure("more than half of the frames were untrackable");
  if (values.empty()) throw FitFailure("no trackable frames");
  return values;
}

}  // namespace detail

// Mean over frames of 1/scale of the input->output transform; 1.0 means no
// effective cropping, < 1 means the output shows a magnified crop.
inline double cropping_ratio(const std::vector<Image>& input, const std::vector<Image>& output) {
  const auto values = detail::per_frame_metric(input, output, [](const Mat3& h) {
    const double det = h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0);
    const double s = std::sqrt(std::abs(det));
    const double ratio = s > 1e-12 ? 1.0 / s : 2.0;
    return std::clamp(ratio, 1e-9, 2.0);
  });
  double sum = 0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

// Worst-case anisotropy: minimum over frames of sigma2/sigma1 of the affine part.
inline double distortion(const std::vector<Image>& input, const std::vector<Image>& output) {
  const auto values = detail::per_frame_metric(input, output, [](const Mat3& h) {
    double s1, s2;
    detail::affine_singular_values(h, s1, s2);
    return s1 > 1e-12 ? s2 / s1 : 0.0;
  });
  double m = 1.0;
  for (double v : values) m = std::min(m, v);
  return m;
}

// Share of low-frequency energy (bins 2-6 of 2..N/2) in the output video's
// own global motion trajectory spectrum; per-component, averaged over
// (tx, ty, rotation). A zero-energy component counts as 1.
inline double stability(const std::vector<Image>& output) {
  const int n = static_cast<int>(output.size());
  if (n < 32) throw TooShort("stability needs >= 32 frames");

  std::vector<double> tx(n, 0.0), ty(n, 0.0), rot(n, 0.0);
  for (int i = 0; i + 1 < n; ++i) {
    double dx = 0, dy = 0, dr = 0;
    try {
      const auto kps = detect_and_track(output[i + 1], output[i], 1000);
      std::vector<Correspondence> corr;
      for (const auto& k : kps) corr.push_back({Vec2(k.x, k.y), Vec2(k.x + k.dx, k.y + k.dy)});
      const auto r = ransac_homography(corr, 1000, 2.0, 0x5eed + i);
      std::vector<Correspondence> inl;
      for (int j : r.inliers) inl.push_back(corr[j]);
      const Similarity s = fit_similarity(inl);
      dx = s.tx;
      dy = s.ty;
      dr = s.rotation;
    } catch (const TooFewKeypoints&) {
    } catch (const DegenerateFit&) {
    }
    tx[i + 1] = tx[i] + dx;
    ty[i + 1] = ty[i] + dy;
    rot[i + 1] = rot[i] + dr;
  }

  auto component_ratio = [n](const std::vector<double>& x) {
    std::vector<double> energy(n / 2 + 1, 0.0);
    for (int k = 0; k <= n / 2; ++k) {
      std::complex<double> acc(0, 0);
      for (int t = 0; t < n; ++t)
        acc += x[t] * std::polar(1.0, -2.0 * M_PI * k * t / n);
      energy[k] = std::norm(acc);
    }
    double low = 0, total = 0;
    for (int k = 2; k <= n / 2; ++k) {
      total += energy[k];
      if (k <= 6) low += energy[k];
    }
    return total < 1e-12 ? 1.0 : low / total;
  };
  return (component_ratio(tx) + component_ratio(ty) + component_ratio(rot)) / 3.0;
}

// 10*log10(1/MSE) over the region, identical inputs capped at 99 dB.
inline double psnr(const Image& a, const Image& b, const Mask& region) {
  if (!a.same_dims(b) || region.width != a.width || region.height != a.height)
    throw DimensionMismatch("psnr: dimensions differ");
  double mse = 0;
  long count = 0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      if (region.at(x, y) < 0.5f) continue;
      for (int c = 0; c < a.channels; ++c) {
        const double d = a.at(x, y, c) - b.at(x, y, c);
        mse += d * d;
        ++count;
      }
    }
  if (count == 0) throw EmptyRegion("psnr: empty region");
  mse /= static_cast<double>(count);
  if (mse <= 0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

// Standard SSIM: 11x11 Gaussian window (sigma 1.5), C1=0.01^2, C2=0.03^2 on
// [0,1] luminance; averaged over windows fully inside the region.
inline double ssim(const Image& a, const Image& b, const Mask& region) {
  if (!a.same_dims(b) || region.width != a.width || region.height != a.height)
    throw DimensionMismatch("ssim: dimensions differ");
  const Image ga = to_luma(a), gb = to_luma(b);
  constexpr int kWin = 11, kHalf = 5;
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

  double kernel[kWin][kWin];
  double ksum = 0;
  for (int i = 0; i < kWin; ++i)
    for (int j = 0; j < kWin; ++j) {
      const double di = i - kHalf, dj = j - kHalf;
      kernel[i][j] = std::exp(-(di * di + dj * dj) / (2 * 1.5 * 1.5));
      ksum += kernel[i][j];
    }
  for (auto& row : kernel)
    for (double& v : row) v /= ksum;

  double total = 0;
  long windows = 0;
  for (int y = kHalf; y < a.height - kHalf; ++y)
    for (int x = kHalf; x < a.width - kHalf; ++x) {
      bool inside = true;
      for (int i = -kHalf; i <= kHalf && inside; ++i)
        for (int j = -kHalf; j <= kHalf; ++j)
          if (region.at(x + j, y + i) < 0.5f) {
            inside = false;
            break;
          }
      if (!inside) continue;
      double ma = 0, mb = 0;
      for (int i = -kHalf; i <= kHalf; ++i)
        for (int j = -kHalf; j <= kHalf; ++j) {
          ma += kernel[i + kHalf][j + kHalf] * ga.at(x + j, y + i);
          mb += kernel[i + kHalf][j + kHalf] * gb.at(x + j, y + i);
        }
      double va = 0, vb = 0, cov = 0;
      for (int i = -kHalf; i <= kHalf; ++i)
        for (int j = -kHalf; j <= kHalf; ++j) {
          const double da = ga.at(x + j, y + i) - ma;
          const double db = gb.at(x + j, y + i) - mb;
          const double w = kernel[i + kHalf][j + kHalf];
          va += w * da * da;
          vb += w * db * db;
          cov += w * da * db;
        }
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++windows;
    }
  if (windows == 0) throw EmptyRegion("ssim: no window fits inside the region");
  return total / static_cast<double>(windows);
}

struct LossReport {
  double l_image = 0;  // robust L1 on extrapolated color
  double l_edge = 0;   // robust L1 on extrapolated edges
  double l_mask = 0;   // shrinkage penalty on the extrapolated mask
  double combined() const { return l_image + 2 * l_edge + 2 * l_mask; }
};

// Alignment-quality measures: masked robust-L1 image/edge errors and the
// mask-shrinkage MSE.
inline LossReport eval_losses(const Image& extrap_frame, const EdgeMap& extrap_edges,
                              const Mask& extrap_mask, const Image& gt_frame,
                              const EdgeMap& gt_edges, const Mask& pre_mask,
                              double epsilon = 1e-12) {
  if (!extrap_frame.same_dims(gt_frame) || extrap_edges.width != extrap_frame.width ||
      extrap_mask.width != extrap_frame.width || pre_mask.width != extrap_frame.width)
    throw DimensionMismatch("eval_losses: dimensions differ");
  LossReport r;
  long n_img = 0, n_edge = 0, n_mask = 0;
  for (int y = 0; y < extrap_frame.height; ++y)
    for (int x = 0; x < extrap_frame.width; ++x) {
      const double m = extrap_mask.at(x, y);
      for (int c = 0; c < extrap_frame.channels; ++c) {
        r.l_image += std::abs(extrap_frame.at(x, y, c) - gt_frame.at(x, y, c) + epsilon) * m;
        ++n_img;
      }
      r.l_edge += std::abs(extrap_edges.at(x, y) - gt_edges.at(x, y) + epsilon) * m;
      ++n_edge;
      const double pm = pre_mask.at(x, y);
      const double d = pm * m - pm;
      r.l_mask += d * d;
      ++n_mask;
    }
  r.l_image /= static_cast<double>(n_img);
  r.l_edge /= static_cast<double>(n_edge);
  r.l_mask /= static_cast<double>(n_mask);
  return r;
}

}  // namespace ovs
