#include "maxfusion/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace maxfusion::sim {
namespace {

using nlohmann::json;

template <typename T>
T field_as(const json& value, const std::string& where) {
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    throw InputError(where + ": wrong type (" + std::string(value.type_name()) + ")");
  }
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) throw InputError(where + ": unknown field '" + key + "'");
  }
}

Field grid_from_json(const json& value, Index height, Index width, const std::string& where) {
  if (!value.is_array() || static_cast<Index>(value.size()) != height) {
    throw InputError(where + ": expected " + std::to_string(height) + " rows");
  }
  Field out(height, width);
  for (Index j = 0; j < height; ++j) {
    const json& row = value[static_cast<std::size_t>(j)];
    const std::string rw = where + "[" + std::to_string(j) + "]";
    if (!row.is_array() || static_cast<Index>(row.size()) != width) {
      throw InputError(rw + ": expected " + std::to_string(width) + " columns");
    }
    for (Index k = 0; k < width; ++k) out(j, k) = field_as<double>(row[static_cast<std::size_t>(k)], rw);
  }
  return out;
}

Branch branch_from_json(const json& obj, std::size_t index, const Scenario& sc) {
  const std::string where = "branches[" + std::to_string(index) + "]";
  if (!obj.is_object()) throw InputError(where + ": expected an object");
  reject_unknown(obj, {"mask", "target", "embedding", "strength"}, where);

  Branch br;
  if (!obj.contains("mask")) throw InputError(where + ".mask: required");
  const json& mask = obj["mask"];
  if (mask.is_object()) {
    reject_unknown(mask, {"rect"}, where + ".mask");
    const auto r = field_as<std::vector<Index>>(mask.value("rect", json::array()), where + ".mask.rect");
    if (r.size() != 4) throw InputError(where + ".mask.rect: expected [row0, col0, row1, col1]");
    br.mask = rect_mask(sc.height, sc.width, r[0], r[1], r[2], r[3]);
  } else {
    br.mask = grid_from_json(mask, sc.height, sc.width, where + ".mask");
  }

  if (!obj.contains("target")) throw InputError(where + ".target: required");
  const json& target = obj["target"];
  if (target.is_number()) {
    br.target = Field::Constant(sc.height, sc.width, target.get<double>());
  } else {
    br.target = grid_from_json(target, sc.height, sc.width, where + ".target");
  }

  if (obj.contains("embedding")) {
    const auto e = field_as<std::vector<double>>(obj["embedding"], where + ".embedding");
    br.embedding = Eigen::Map<const Eigen::VectorXd>(e.data(), static_cast<Index>(e.size()));
  } else {
    br.embedding = default_embedding(sc.channels, static_cast<int>(index));
  }
  if (obj.contains("strength")) br.strength = field_as<double>(obj["strength"], where + ".strength");
  return br;
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"contradictory", "complementary", "three_way"};
  return names;
}

Field rect_mask(Index height, Index width, Index row0, Index col0, Index row1, Index col1) {
  Field m = Field::Zero(height, width);
  row0 = std::clamp<Index>(row0, 0, height);
  row1 = std::clamp<Index>(row1, 0, height);
  col0 = std::clamp<Index>(col0, 0, width);
  col1 = std::clamp<Index>(col1, 0, width);
  if (row1 > row0 && col1 > col0) m.block(row0, col0, row1 - row0, col1 - col0).setOnes();
  return m;
}

Scenario make_preset(std::string_view name, const PresetShape& shape) {
  Scenario sc;
  sc.height = shape.height;
  sc.width = shape.width;
  sc.channels = shape.channels;
  const Index h = sc.height;
  const Index w = sc.width;

  auto branch = [&](Field mask, double target, int index) {
    return Branch{std::move(mask), Field::Constant(h, w, target), default_embedding(sc.channels, index), 1.0};
  };

  if (name == "contradictory") {
    sc.branches.push_back(branch(rect_mask(h, w, 0, 0, h, w / 2), 1.5, 0));
    sc.branches.push_back(branch(rect_mask(h, w, 0, w / 2, h, w), -1.5, 1));
  } else if (name == "complementary") {
    sc.branches.push_back(branch(rect_mask(h, w, h / 8, w / 8, 3 * h / 4, 3 * w / 4), 1.5, 0));
    sc.branches.push_back(branch(rect_mask(h, w, 5 * h / 16, 5 * w / 16, 15 * h / 16, 15 * w / 16), 1.5, 1));
  } else if (name == "three_way") {
    sc.branches.push_back(branch(rect_mask(h, w, 0, 0, h, w / 3), 1.5, 0));
    sc.branches.push_back(branch(rect_mask(h, w, 0, w / 3, h, 2 * w / 3), -1.5, 1));
    sc.branches.push_back(branch(rect_mask(h, w, 0, 2 * w / 3, h, w), 0.75, 2));
  } else {
    std::string valid;
    for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw InputError("unknown preset '" + std::string(name) + "' (valid presets: " + valid + ")");
  }
  return sc;
}

Scenario scenario_from_json(const json& doc) {
  if (!doc.is_object()) throw InputError("scenario: expected a JSON object");
  reject_unknown(doc,
                 {"preset", "height", "width", "channels", "steps", "beta_start", "beta_end", "guidance_weight",
                  "prior_mean", "prior_std", "seed", "strategy", "fusion", "branches"},
                 "scenario");

  PresetShape shape;
  if (doc.contains("height")) shape.height = field_as<Index>(doc["height"], "height");
  if (doc.contains("width")) shape.width = field_as<Index>(doc["width"], "width");
  if (doc.contains("channels")) shape.channels = field_as<Index>(doc["channels"], "channels");
  if (shape.height < 1 || shape.width < 1 || shape.channels < 1) {
    throw InputError("height, width and channels must be >= 1");
  }

  Scenario sc;
  if (doc.contains("preset")) {
    sc = make_preset(field_as<std::string>(doc["preset"], "preset"), shape);
  } else {
    sc.height = shape.height;
    sc.width = shape.width;
    sc.channels = shape.channels;
  }

  if (doc.contains("steps") || doc.contains("beta_start") || doc.contains("beta_end")) {
    const int steps = doc.contains("steps") ? field_as<int>(doc["steps"], "steps") : sc.schedule.steps();
    const double b0 = doc.contains("beta_start") ? field_as<double>(doc["beta_start"], "beta_start") : sc.schedule.beta_start();
    const double b1 = doc.contains("beta_end") ? field_as<double>(doc["beta_end"], "beta_end") : sc.schedule.beta_end();
    sc.schedule = NoiseSchedule::linear(steps, b0, b1);
  }
  if (doc.contains("guidance_weight")) sc.guidance_weight = field_as<double>(doc["guidance_weight"], "guidance_weight");
  if (doc.contains("prior_mean")) sc.prior.mean = field_as<double>(doc["prior_mean"], "prior_mean");
  if (doc.contains("prior_std")) sc.prior.std = field_as<double>(doc["prior_std"], "prior_std");
  if (doc.contains("seed")) sc.seed = field_as<std::uint64_t>(doc["seed"], "seed");
  if (doc.contains("strategy")) sc.strategy = Strategy::parse(field_as<std::string>(doc["strategy"], "strategy"));

  if (doc.contains("fusion")) {
    const json& f = doc["fusion"];
    if (!f.is_object()) throw InputError("fusion: expected an object");
    reject_unknown(f, {"delta", "renormalize", "epsilon_norm"}, "fusion");
    if (f.contains("delta")) sc.fusion.delta = field_as<double>(f["delta"], "fusion.delta");
    if (f.contains("renormalize")) sc.fusion.renormalize = field_as<bool>(f["renormalize"], "fusion.renormalize");
    if (f.contains("epsilon_norm")) sc.fusion.stats.epsilon_norm = field_as<double>(f["epsilon_norm"], "fusion.epsilon_norm");
  }

  if (doc.contains("branches")) {
    const json& bs = doc["branches"];
    if (!bs.is_array()) throw InputError("branches: expected an array");
    sc.branches.clear();
    for (std::size_t i = 0; i < bs.size(); ++i) sc.branches.push_back(branch_from_json(bs[i], i, sc));
  }

  sc.validate();
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": invalid JSON: " + e.what());
  }
  return scenario_from_json(doc);
}

}  // namespace maxfusion::sim
