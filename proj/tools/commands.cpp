#include "commands.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "maxfusion/fusion.hpp"
#include "maxfusion/io.hpp"
#include "maxfusion/scenario.hpp"
#include "maxfusion/simulator.hpp"
#include "maxfusion/stats.hpp"

namespace maxfusion::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCsvHeader = "strategy,delta,branch,mse,averaged_fraction,seed\n";

std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// Rounds to 9 significant digits so JSON output is as stable as the CSV.
double round9(double v) { return std::strtod(fmt9(v).c_str(), nullptr); }

json round9(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(round9(x));
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  out << text;
}

std::vector<FeatureMapf> read_inputs(const std::vector<fs::path>& inputs) {
  std::vector<FeatureMapf> maps;
  for (const auto& p : inputs) maps.push_back(read_tensor_file(p));
  for (std::size_t i = 1; i < maps.size(); ++i) {
    if (!maps[i].same_shape(maps[0])) {
      throw InputError("shape mismatch: " + inputs[0].string() + " is " + maps[0].shape() + ", " +
                       inputs[i].string() + " is " + maps[i].shape());
    }
  }
  return maps;
}

void write_map(const fs::path& dir, const std::string& stem, const SpatialMap& map, bool pgm) {
  write_tensor_file(to_feature_map(map), dir / (stem + ".mxft"));
  if (pgm) write_pgm_file(dir / (stem + ".pgm"), map.array());
}

sim::Scenario resolve_scenario(const ScenarioArgs& args) {
  if (args.preset && args.scenario) throw InputError("--preset and --scenario are mutually exclusive");
  sim::Scenario sc = args.scenario ? sim::load_scenario(*args.scenario)
                                   : sim::make_preset(args.preset.value_or("contradictory"));
  if (args.seed) sc.seed = *args.seed;
  if (args.delta) sc.fusion.delta = *args.delta;
  if (args.no_renorm) sc.fusion.renormalize = false;
  if (args.guidance_weight) sc.guidance_weight = *args.guidance_weight;
  if (args.strategy) sc.strategy = sim::Strategy::parse(*args.strategy);
  sc.validate();
  return sc;
}

void append_rows(std::string& csv, const std::string& strategy, const std::string& delta, const std::vector<double>& mse,
                 double averaged_fraction, std::uint64_t seed) {
  for (std::size_t b = 0; b < mse.size(); ++b) {
    csv += strategy + "," + delta + "," + std::to_string(b) + "," + fmt9(mse[b]) + "," + fmt9(averaged_fraction) +
           "," + std::to_string(seed) + "\n";
  }
}

}  // namespace

std::vector<double> parse_deltas(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw InputError("empty entry in delta list '" + text + "'");
    const std::string tok = item.substr(b, e - b + 1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
      throw InputError("malformed delta '" + tok + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw InputError("delta list is empty");
  return out;
}

int cmd_stats(const std::vector<fs::path>& inputs, const fs::path& out_dir) {
  if (inputs.empty() || inputs.size() > 2) throw InputError("stats takes one or two tensors");
  const auto maps = read_inputs(inputs);
  ensure_dir(out_dir);

  json summary{{"command", "stats"}, {"shape", {maps[0].channels(), maps[0].height(), maps[0].width()}}};
  json mean_sigma = json::array();
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const std::string suffix = maps.size() == 1 ? "" : "_" + std::to_string(i);
    const SpatialMap sigma = channel_std_map(maps[i]);
    write_map(out_dir, "sigma" + suffix, sigma, false);
    write_map(out_dir, "sigma_hat" + suffix, normalize_spatial(sigma), true);
    mean_sigma.push_back(round9(sigma.array().mean()));
  }
  summary["mean_sigma"] = mean_sigma;
  if (maps.size() == 2) {
    const SpatialMap rho = correlation_map(maps[0], maps[1]);
    write_map(out_dir, "rho", rho, true);
    summary["mean_rho"] = round9(rho.array().mean());
  }
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_fuse(const std::vector<fs::path>& inputs, double delta, bool renormalize, const fs::path& out_dir) {
  if (inputs.size() < 2) throw InputError("fuse needs at least two tensors");
  FusionConfig cfg;
  cfg.delta = delta;
  cfg.renormalize = renormalize;
  cfg.validate();
  const auto maps = read_inputs(inputs);
  ensure_dir(out_dir);

  const auto fold = maxfusion_fold(maps, cfg);
  write_tensor_file(fold.f_eff, out_dir / "f_eff.mxft");
  const SelectionMask& last = fold.steps.back().selection;
  write_tensor_file(to_feature_map(last), out_dir / "selection.mxft");
  write_pgm_file(out_dir / "selection.pgm", last);
  if (fold.steps.size() > 1) {
    for (std::size_t k = 0; k < fold.steps.size(); ++k) {
      const auto stem = "selection_step" + std::to_string(k + 1);
      write_tensor_file(to_feature_map(fold.steps[k].selection), out_dir / (stem + ".mxft"));
      write_pgm_file(out_dir / (stem + ".pgm"), fold.steps[k].selection);
    }
  }
  for (std::size_t i = 0; i < fold.updated.size(); ++i) {
    write_tensor_file(fold.updated[i], out_dir / ("branch_" + std::to_string(i) + "_unmerged.mxft"));
  }

  std::vector<double> wins;
  const auto locations = static_cast<double>(fold.provenance.size());
  for (std::size_t b = 0; b < maps.size(); ++b) {
    wins.push_back(static_cast<double>((fold.provenance == static_cast<std::int32_t>(b)).count()) / locations);
  }
  const json summary{{"command", "fuse"},
                     {"branches", maps.size()},
                     {"delta", round9(delta)},
                     {"renormalize", renormalize},
                     {"averaged_fraction", round9(fold.averaged_fraction())},
                     {"win_fraction", round9(wins)}};
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_simulate(const ScenarioArgs& args, const fs::path& out_dir) {
  const auto sc = resolve_scenario(args);
  ensure_dir(out_dir);
  const auto report = sim::sample(sc);

  write_tensor_file(to_feature_map(report.sample), out_dir / "sample.mxft");
  write_pgm_file(out_dir / "sample.pgm", report.sample);

  std::string csv = kCsvHeader;
  const bool gated = sc.strategy.kind == sim::StrategyKind::MaxFusion || sc.strategy.kind == sim::StrategyKind::MaxSelect;
  append_rows(csv, report.strategy.name(), gated ? fmt9(report.delta) : "", report.mse, report.averaged_fraction(),
              report.seed);
  write_text(out_dir / "metrics.csv", csv);

  std::string trace;
  for (const auto& step : report.steps) {
    trace += json{{"t", step.t},
                  {"averaged_fraction", round9(step.averaged_fraction)},
                  {"win_fraction", round9(step.win_fraction)}}
                 .dump() +
             "\n";
  }
  write_text(out_dir / "trace.json", trace);

  const json summary{{"command", "simulate"},
                     {"strategy", report.strategy.name()},
                     {"seed", report.seed},
                     {"mse", round9(report.mse)},
                     {"averaged_fraction", round9(report.averaged_fraction())}};
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_ablate(const ScenarioArgs& args, const std::string& deltas_text, const fs::path& out_dir) {
  const auto deltas = parse_deltas(deltas_text);
  const auto sc = resolve_scenario(args);
  ensure_dir(out_dir);
  const auto rows = sim::run_ablation(sc, deltas);

  std::string csv = kCsvHeader;
  json fractions = json::array();
  for (const auto& row : rows) {
    append_rows(csv, "maxfusion", fmt9(row.delta), row.mse, row.averaged_fraction, sc.seed);
    fractions.push_back(round9(row.averaged_fraction));
  }
  write_text(out_dir / "ablation.csv", csv);

  const bool monotone = sim::averaged_fraction_non_increasing(rows);
  const json summary{{"command", "ablate"},
                     {"deltas", round9(deltas)},
                     {"averaged_fraction", fractions},
                     {"non_increasing", monotone}};
  std::cout << summary.dump() << "\n";
  if (!monotone) {
    std::cerr << "error: averaged fraction increased with delta\n";
    return 1;
  }
  return 0;
}

int cmd_compare(const ScenarioArgs& args, const fs::path& out_dir) {
  const auto base = resolve_scenario(args);
  ensure_dir(out_dir);

  struct Arm {
    std::string label;
    sim::Scenario scenario;
    std::string delta;
  };
  std::vector<Arm> arms;
  auto arm = [&](std::string label, sim::Strategy strategy, bool renormalize, std::string delta) {
    sim::Scenario sc = base;
    sc.strategy = strategy;
    sc.fusion.renormalize = renormalize;
    arms.push_back({std::move(label), std::move(sc), std::move(delta)});
  };
  using sim::StrategyKind;
  arm("naive", {StrategyKind::Naive, 0}, true, "");
  arm("max_select", {StrategyKind::MaxSelect, 0}, true, fmt9(2.0));
  arm("maxfusion", {StrategyKind::MaxFusion, 0}, true, fmt9(base.fusion.delta));
  arm("maxfusion-no-renorm", {StrategyKind::MaxFusion, 0}, false, fmt9(base.fusion.delta));
  for (std::size_t b = 0; b < base.branches.size(); ++b) {
    const sim::Strategy single{StrategyKind::Single, static_cast<int>(b)};
    arm(single.name(), single, true, "");
  }
  arm("unconditional", {StrategyKind::Unconditional, 0}, true, "");

  std::string csv = kCsvHeader;
  std::string md = "| strategy |";
  std::string rule = "|---|";
  for (std::size_t b = 0; b < base.branches.size(); ++b) {
    md += " mse(" + std::to_string(b) + ") |";
    rule += "---|";
  }
  md += " max mse | averaged fraction |\n" + rule + "---|---|\n";

  for (const auto& a : arms) {
    const auto r = sim::sample(a.scenario);
    append_rows(csv, a.label, a.delta, r.mse, r.averaged_fraction(), r.seed);
    md += "| " + a.label + " |";
    for (double m : r.mse) md += " " + fmt9(m) + " |";
    md += " " + fmt9(r.max_mse()) + " | " + fmt9(r.averaged_fraction()) + " |\n";
  }
  write_text(out_dir / "compare.csv", csv);
  write_text(out_dir / "compare.md", md);
  std::cout << json{{"command", "compare"}, {"strategies", arms.size()}, {"seed", base.seed}}.dump() << "\n";
  return 0;
}

}  // namespace maxfusion::cli
