#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace maxfusion::cli {

/// Options shared by the scenario-driven subcommands. Unset optionals leave
/// the scenario's own value in place.
struct ScenarioArgs {
  std::optional<std::string> preset;
  std::optional<std::filesystem::path> scenario;
  std::optional<std::uint64_t> seed;
  std::optional<double> delta;
  std::optional<double> guidance_weight;
  std::optional<std::string> strategy;
  bool no_renorm = false;
};

int cmd_stats(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& out_dir);
int cmd_fuse(const std::vector<std::filesystem::path>& inputs, double delta, bool renormalize,
             const std::filesystem::path& out_dir);
int cmd_simulate(const ScenarioArgs& args, const std::filesystem::path& out_dir);
int cmd_ablate(const ScenarioArgs& args, const std::string& deltas, const std::filesystem::path& out_dir);
int cmd_compare(const ScenarioArgs& args, const std::filesystem::path& out_dir);

/// Parses "a,b,c" into reals; throws InputError on empty or malformed input.
std::vector<double> parse_deltas(const std::string& text);

}  // namespace maxfusion::cli
