#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "maxfusion/simulator.hpp"

namespace maxfusion::sim {

struct PresetShape {
  Index height = 16;
  Index width = 16;
  Index channels = 8;
};

const std::vector<std::string>& preset_names();

/// "contradictory": two disjoint half-plane masks with opposite targets.
/// "complementary": two overlapping squares sharing one target, correlated embeddings.
/// "three_way": three vertical strips, one per branch.
Scenario make_preset(std::string_view name, const PresetShape& shape = {});

/// Builds a scenario from a JSON document. An optional "preset" key seeds the
/// defaults; every other key overrides. Errors name the offending field.
Scenario scenario_from_json(const nlohmann::json& doc);
Scenario load_scenario(const std::filesystem::path& path);

/// Rectangle [row0, row1) x [col0, col1) set to 1, clipped to the grid.
Field rect_mask(Index height, Index width, Index row0, Index col0, Index row1, Index col1);

}  // namespace maxfusion::sim
