// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "evflow/config.hpp"
#include "evflow/error.hpp"

using namespace evflow;

TEST_CASE("defaults") {
  const RunConfig c;
  CHECK(c.model.num_targets == 5);
  CHECK(c.model.bins == 15);
  CHECK(c.model.radius == 4);
  CHECK(c.model.gamma == 0.85);
  CHECK(c.model.iters == 6);
  CHECK(c.model.feat_dim == 32);
  CHECK(c.model.ctx_dim == 32);
  CHECK(c.model.hidden_dim == 48);
  CHECK(c.model.stride == 8);
  CHECK(c.model.cost_channels() == 81);
  CHECK(c.model.guide_channels() == 4);
  CHECK(c.model.fusion == FusionMode::Guided);
  CHECK(c.model.context == ContextMode::SpatioTemporal);
  CHECK(c.model.guidance == GuidanceMode::Ice);
  CHECK(c.synth.threshold == 0.15);
  CHECK(c.synth.substeps == 32);
}

TEST_CASE("parse, override and round trip") {
  RunConfig c = RunConfig::parse("# comment\nfusion = concat\ncontext=frame\n\nradius=3  # inline\nlr=0.0002\n");
  CHECK(c.model.fusion == FusionMode::Concat);
  CHECK(c.model.context == ContextMode::Frame);
  CHECK(c.model.radius == 3);
  CHECK(c.train.lr == 0.0002);
  c.set("num_targets", "4");
  CHECK(c.synth.num_targets == 4);
  c.set("aggregate_ice", "false");
  CHECK_FALSE(c.model.aggregate_ice);

  const RunConfig back = RunConfig::parse(c.to_text());
  CHECK(back.to_text() == c.to_text());
  CHECK(RunConfig::keys().size() >= 30);

  const auto path = std::filesystem::temp_directory_path() / "evflow_test_config.txt";
  std::ofstream(path) << "guidance=frame\nsteps=7\n";
  const RunConfig f = RunConfig::load(path.string());
  CHECK(f.model.guidance == GuidanceMode::Frame);
  CHECK(f.train.steps == 7);
}

TEST_CASE("rejections") {
  RunConfig c;
  CHECK_THROWS_AS(c.set("no_such_key", "1"), ArgumentError);
  CHECK_THROWS_AS(c.set("radius", "four"), ArgumentError);
  CHECK_THROWS_AS(c.set("gamma", "0.5x"), ArgumentError);
  CHECK_THROWS_AS(c.set("fusion", "sum"), ArgumentError);
  CHECK_THROWS_AS(c.set("aggregate_ice", "maybe"), ArgumentError);
  CHECK_THROWS_AS(RunConfig::parse("radius\n"), ParseError);
  CHECK_THROWS_AS(RunConfig::parse("gamma=1.5\n"), ArgumentError);
  CHECK_THROWS_AS(RunConfig::parse("stride=6\n"), ArgumentError);
  CHECK_THROWS_AS(RunConfig::parse("iters=0\n"), ArgumentError);
  CHECK_THROWS_AS(RunConfig::load("/nonexistent/evflow.cfg"), ArgumentError);
}
