// maxfusion: statistics, fusion and toy-diffusion experiments from the shell.
//
// Exit status: 0 success, 2 usage or input error, 1 internal failure.

#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "maxfusion/tensor.hpp"

namespace fs = std::filesystem;
using namespace maxfusion::cli;

namespace {

void add_scenario_options(CLI::App* cmd, ScenarioArgs& args) {
  cmd->add_option("--preset", args.preset, "contradictory | complementary | three_way");
  cmd->add_option("--scenario", args.scenario, "Scenario JSON file");
  cmd->add_option("--seed", args.seed, "RNG seed (default 42)");
  cmd->add_option("--delta", args.delta, "Correlation threshold (default 0.7)");
  cmd->add_option("--lambda", args.guidance_weight, "Guidance weight");
  cmd->add_option("--strategy", args.strategy, "maxfusion | naive | max_select | single(b) | unconditional");
  cmd->add_flag("--no-renorm", args.no_renorm, "Skip variance renormalization in unmerge");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MaxFusion feature fusion toolkit"};
  app.require_subcommand(1);

  fs::path out_dir = "./out";
  std::vector<fs::path> inputs;
  double delta = 0.7;
  bool no_renorm = false;
  std::string deltas;
  ScenarioArgs scenario_args;

  auto* stats = app.add_subcommand("stats", "Per-location sigma, normalized sigma and correlation maps");
  stats->add_option("inputs", inputs, "One or two MXFT tensors")->required()->expected(1, 2);
  stats->add_option("--out", out_dir, "Output directory");

  auto* fuse = app.add_subcommand("fuse", "Merge and unmerge two or more MXFT tensors");
  fuse->add_option("inputs", inputs, "MXFT tensors, folded left to right")->required()->expected(2, -1);
  fuse->add_option("--delta", delta, "Correlation threshold");
  fuse->add_flag("--no-renorm", no_renorm, "Skip variance renormalization in unmerge");
  fuse->add_option("--out", out_dir, "Output directory");

  auto* simulate = app.add_subcommand("simulate", "Run one toy-diffusion scenario");
  add_scenario_options(simulate, scenario_args);
  simulate->add_option("--out", out_dir, "Output directory");

  auto* ablate = app.add_subcommand("ablate", "Sweep the correlation threshold");
  add_scenario_options(ablate, scenario_args);
  ablate->add_option("--deltas", deltas, "Comma-separated thresholds")->required();
  ablate->add_option("--out", out_dir, "Output directory");

  auto* compare = app.add_subcommand("compare", "Run every fusion strategy on identical noise");
  add_scenario_options(compare, scenario_args);
  compare->add_option("--out", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*stats) return cmd_stats(inputs, out_dir);
    if (*fuse) return cmd_fuse(inputs, delta, !no_renorm, out_dir);
    if (*simulate) return cmd_simulate(scenario_args, out_dir);
    if (*ablate) return cmd_ablate(scenario_args, deltas, out_dir);
    if (*compare) return cmd_compare(scenario_args, out_dir);
  } catch (const maxfusion::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
