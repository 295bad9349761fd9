#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "maxfusion/scenario.hpp"

using namespace maxfusion;
using namespace maxfusion::sim;
using nlohmann::json;

TEST_CASE("presets") {
  for (const auto& name : preset_names()) {
    const auto sc = make_preset(name);
    CHECK_NOTHROW(sc.validate());
    CHECK(sc.height == 16);
    CHECK(sc.channels == 8);
    CHECK(sc.schedule.steps() == 50);
    CHECK(sc.guidance_weight == 1.5);
    CHECK(sc.fusion.delta == 0.7);
  }

  const auto contra = make_preset("contradictory");
  REQUIRE(contra.branches.size() == 2);
  CHECK((contra.branches[0].mask * contra.branches[1].mask).sum() == 0.0);
  CHECK((contra.branches[0].mask + contra.branches[1].mask).sum() == 256.0);

  const auto comp = make_preset("complementary");
  const Field overlap = comp.branches[0].mask * comp.branches[1].mask;
  CHECK(overlap.sum() == 49.0);
  const auto& w0 = comp.branches[0].embedding;
  const auto& w1 = comp.branches[1].embedding;
  CHECK(w0.dot(w1) / (w0.norm() * w1.norm()) >= 0.7);

  CHECK(make_preset("three_way").branches.size() == 3);

  CHECK_THROWS_WITH_AS(make_preset("nope"), doctest::Contains("contradictory, complementary, three_way"), InputError);
}

TEST_CASE("scenario JSON overrides a preset") {
  const auto doc = json::parse(R"({
    "preset": "contradictory", "height": 8, "width": 10, "steps": 20,
    "guidance_weight": 2.0, "seed": 9, "strategy": "naive",
    "fusion": {"delta": 0.75, "renormalize": false}
  })");
  const auto sc = scenario_from_json(doc);
  CHECK(sc.height == 8);
  CHECK(sc.width == 10);
  CHECK(sc.schedule.steps() == 20);
  CHECK(sc.guidance_weight == 2.0);
  CHECK(sc.seed == 9);
  CHECK(sc.strategy.kind == StrategyKind::Naive);
  CHECK(sc.fusion.delta == 0.75);
  CHECK_FALSE(sc.fusion.renormalize);
  CHECK(sc.branches[0].mask.cols() == 10);
  CHECK(sc.branches[0].mask.sum() == 40.0);
}

TEST_CASE("scenario JSON with explicit branches") {
  const auto doc = json::parse(R"({
    "height": 2, "width": 2, "channels": 2,
    "branches": [
      {"mask": [[1, 0], [0, 0]], "target": [[1, 2], [3, 4]], "embedding": [1.6, 0.4], "strength": 2},
      {"mask": {"rect": [1, 0, 2, 2]}, "target": -1}
    ]
  })");
  const auto sc = scenario_from_json(doc);
  REQUIRE(sc.branches.size() == 2);
  CHECK(sc.branches[0].target(1, 0) == 3.0);
  CHECK(sc.branches[0].strength == 2.0);
  CHECK(sc.branches[1].mask.row(1).sum() == 2.0);
  CHECK(sc.branches[1].target(0, 0) == -1.0);
}

TEST_CASE("scenario JSON errors name the field") {
  auto fails_with = [](const char* text, const char* what) {
    CHECK_THROWS_WITH_AS(scenario_from_json(json::parse(text)), doctest::Contains(what), InputError);
  };
  fails_with(R"({"preset": "contradictory", "bogus": 1})", "unknown field 'bogus'");
  fails_with(R"({"preset": "contradictory", "guidance_weight": "high"})", "guidance_weight");
  fails_with(R"({"channels": 2, "branches": [{"mask": {"rect": [0,0,1,1]}, "target": 1, "embedding": [1, 2]}]})",
             "branches[0].embedding");
  fails_with(R"({"height": 2, "width": 2, "branches": [{"mask": [[0, 2], [0, 0]], "target": 1}]})",
             "branches[0].mask");
  fails_with(R"J({"preset": "contradictory", "strategy": "single(5)"})J", "single(5)");
  fails_with(R"({"preset": "contradictory", "fusion": {"delta": "x"}})", "fusion.delta");
}

TEST_CASE("load_scenario reports JSON syntax position") {
  const auto path = std::filesystem::temp_directory_path() / "maxfusion_bad_scenario.json";
  {
    std::ofstream out(path);
    out << "{\n  \"preset\": \"contradictory\",\n  oops\n}\n";
  }
  CHECK_THROWS_WITH_AS(load_scenario(path), doctest::Contains("line 3"), InputError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), InputError);
}
