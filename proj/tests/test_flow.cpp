#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>

#include "helpers.hpp"
#include "ovs/flow.hpp"

using namespace ovs;

TEST_CASE("baseline flow recovers an integer translation") {
  const Image ref = testutil::textured(160, 120, 10);
  const double dx = 5, dy = -3;
  // tgt(p + d) = ref(p): flow from ref to tgt is +d.
  const Image tgt = testutil::translate_render(ref, dx, dy);
  const FlowField flow = baseline_flow(ref, tgt);
  std::vector<double> eu, ev;
  for (int y = 20; y < 100; ++y)
    for (int x = 20; x < 140; ++x) {
      eu.push_back(flow.u[flow.idx(x, y)]);
      ev.push_back(flow.v[flow.idx(x, y)]);
    }
  std::nth_element(eu.begin(), eu.begin() + eu.size() / 2, eu.end());
  std::nth_element(ev.begin(), ev.begin() + ev.size() / 2, ev.end());
  REQUIRE(eu[eu.size() / 2] == Catch::Approx(dx).margin(0.5));
  REQUIRE(ev[ev.size() / 2] == Catch::Approx(dy).margin(0.5));
}

TEST_CASE("consistent flow recovers a translation through missing data") {
  const Image ref = testutil::textured(160, 120, 12);
  const double dx = 6, dy = 4;
  Image tgt = testutil::translate_render(ref, dx, dy);
  // Zero out a band of the target: exact-zero pixels are missing data, so
  // correspondences landing there are unobservable and must come from the
  // parametric fill of the consistency-gated field.
  for (int y = 0; y < tgt.height; ++y)
    for (int x = 0; x < 48; ++x)
      for (int c = 0; c < tgt.channels; ++c) tgt.at(x, y, c) = 0.f;
  const FlowField flow = consistent_flow(ref, tgt);
  long good = 0, total = 0;
  for (int y = 10; y < 110; ++y)
    for (int x = 10; x < 150; ++x) {
      ++total;
      const std::size_t i = flow.idx(x, y);
      if (std::abs(flow.u[i] - dx) < 1.0 && std::abs(flow.v[i] - dy) < 1.0) ++good;
    }
  REQUIRE(static_cast<double>(good) / total > 0.95);
  // Spot-check inside the region whose match fell in the zeroed band.
  const std::size_t i = flow.idx(20, 60);
  REQUIRE(flow.u[i] == Catch::Approx(dx).margin(1.0));
  REQUIRE(flow.v[i] == Catch::Approx(dy).margin(1.0));
}

TEST_CASE("estimate_masked_flow zeroes and invalidates outside the reference mask") {
  const Image f = testutil::textured(64, 48, 11);
  Canvas ref = pad_frame(f, 8);
  Canvas aligned = pad_frame(testutil::translate_render(f, 1.0, 0.0), 8);
  const BaselineFlowEstimator est;
  const FlowField flow = estimate_masked_flow(est, ref, aligned);
  for (int y = 0; y < flow.height; ++y)
    for (int x = 0; x < flow.width; ++x) {
      if (ref.mask.at(x, y) >= 0.5f) continue;
      REQUIRE(flow.u[flow.idx(x, y)] == 0.0);
      REQUIRE(flow.v[flow.idx(x, y)] == 0.0);
      REQUIRE(flow.valid.at(x, y) == 0.f);
    }
}

TEST_CASE("FileFlowEstimator reads per-pair flow files") {
  const auto dir = std::filesystem::temp_directory_path() / "ovs_flow_files";
  std::filesystem::create_directories(dir);
  FlowField f(16, 12);
  for (size_t i = 0; i < f.u.size(); ++i) {
    f.u[i] = 2.5;
    f.v[i] = -1.25;
  }
  write_flo((dir / "flow_000003_000007.flo").string(), f);

  const FileFlowEstimator est(dir.string());
  est.set_pair(3, 7);
  const Image ref(16, 12, 3, 0.f);
  const FlowField got = est.estimate(ref, ref);
  REQUIRE(got.u[0] == 2.5);
  REQUIRE(got.v[0] == -1.25);
  est.set_pair(1, 2);
  REQUIRE_THROWS_AS(est.estimate(ref, ref), IoError);
  std::filesystem::remove_all(dir);
}
