#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "ovs/config.hpp"

using namespace ovs;

TEST_CASE("empty config yields documented defaults") {
  std::istringstream in("");
  const Config cfg = parse_config(in);
  REQUIRE(cfg.affinity.radius == 4);
  REQUIRE(cfg.affinity.sigma_color == Catch::Approx(0.1));
  REQUIRE(cfg.affinity.sigma_edge == Catch::Approx(0.2));
  REQUIRE(cfg.affinity.lambda_cap == Catch::Approx(0.99));
  REQUIRE(cfg.propagation.max_sweeps == 200);
  REQUIRE(cfg.propagation.tolerance_px == Catch::Approx(0.01));
  REQUIRE(cfg.propagation.anchor_ratio == Catch::Approx(0.9));
  REQUIRE(cfg.pad == 80);
  REQUIRE(cfg.grid_size == 16);
  REQUIRE(cfg.max_keypoints == 1000);
  REQUIRE(cfg.iterations == 10);
  REQUIRE(cfg.window == 31);
  REQUIRE(cfg.fill == "nearest");
}

TEST_CASE("section headers and dotted keys are equivalent") {
  std::istringstream a("[affinity]\nradius = 2\nsigma_color = 0.25\n");
  std::istringstream b("affinity.radius = 2\naffinity.sigma_color = 0.25\n");
  const Config ca = parse_config(a);
  const Config cb = parse_config(b);
  REQUIRE(ca.affinity.radius == 2);
  REQUIRE(cb.affinity.radius == 2);
  REQUIRE(ca.affinity.sigma_color == Catch::Approx(0.25));
  REQUIRE(cb.affinity.sigma_color == Catch::Approx(0.25));
}

TEST_CASE("comments and blank lines are ignored; later values win") {
  std::istringstream in(
      "# leading comment\n"
      "\n"
      "expand.iterations = 3   # trailing comment\n"
      "expand.iterations = 7\n"
      "[stabilize]\n"
      "fill = none\n");
  const Config cfg = parse_config(in);
  REQUIRE(cfg.iterations == 7);
  REQUIRE(cfg.fill == "none");
}

TEST_CASE("errors carry line numbers and are descriptive") {
  {
    std::istringstream in("\nexpand.bogus = 1\n");
    REQUIRE_THROWS_WITH(parse_config(in), Catch::Matchers::ContainsSubstring("line 2"));
  }
  {
    std::istringstream in("expand.pad = seven\n");
    REQUIRE_THROWS_AS(parse_config(in), ConfigError);
  }
  {
    std::istringstream in("expand.pad\n");
    REQUIRE_THROWS_AS(parse_config(in), ConfigError);
  }
  {
    std::istringstream in("[expand\npad = 4\n");
    REQUIRE_THROWS_AS(parse_config(in), ConfigError);
  }
  {
    std::istringstream in("stabilize.fill = sideways\n");
    REQUIRE_THROWS_AS(parse_config(in), ConfigError);
  }
  REQUIRE_THROWS_AS(load_config("/nonexistent/path/ovs.cfg"), ConfigError);
}

TEST_CASE("dump_config round-trips through parse_config") {
  Config cfg;
  cfg.affinity.radius = 3;
  cfg.affinity.sigma_color = 0.15;
  cfg.propagation.max_sweeps = 55;
  cfg.propagation.anchor_ratio = 0.8;
  cfg.pad = 64;
  cfg.iterations = 12;
  cfg.seed = 42;
  cfg.window = 21;
  cfg.fill = "none";
  cfg.jitter.n_frames = 17;
  cfg.jitter.rotation_sigma = 0.75;

  std::istringstream in(dump_config(cfg));
  const Config back = parse_config(in);
  REQUIRE(back.affinity.radius == 3);
  REQUIRE(back.affinity.sigma_color == Catch::Approx(0.15));
  REQUIRE(back.propagation.max_sweeps == 55);
  REQUIRE(back.propagation.anchor_ratio == Catch::Approx(0.8));
  REQUIRE(back.pad == 64);
  REQUIRE(back.iterations == 12);
  REQUIRE(back.seed == 42);
  REQUIRE(back.window == 21);
  REQUIRE(back.fill == "none");
  REQUIRE(back.jitter.n_frames == 17);
  REQUIRE(back.jitter.rotation_sigma == Catch::Approx(0.75));
}
