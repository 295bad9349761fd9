#include "maxfusion/simulator.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace maxfusion::sim {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  alpha_bars_.reserve(betas_.size());
  double prod = 1.0;
  for (double b : betas_) {
    prod *= 1.0 - b;
    alpha_bars_.push_back(prod);
  }
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw InputError("schedule steps must be >= 1");
  if (!(beta_start > 0.0 && beta_start < 1.0 && beta_end > 0.0 && beta_end < 1.0)) {
    throw InputError("schedule betas must lie in (0, 1)");
  }
  std::vector<double> betas(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(t) / static_cast<double>(steps - 1);
    betas[static_cast<std::size_t>(t)] = beta_start + (beta_end - beta_start) * frac;
  }
  return NoiseSchedule(std::move(betas));
}

Strategy Strategy::parse(std::string_view text) {
  if (text == "maxfusion") return {StrategyKind::MaxFusion, 0};
  if (text == "naive") return {StrategyKind::Naive, 0};
  if (text == "max_select") return {StrategyKind::MaxSelect, 0};
  if (text == "unconditional") return {StrategyKind::Unconditional, 0};

  std::string_view digits;
  if (text.starts_with("single(") && text.ends_with(")")) {
    digits = text.substr(7, text.size() - 8);
  } else if (text.starts_with("single:")) {
    digits = text.substr(7);
  }
  int b = -1;
  if (!digits.empty()) {
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), b);
    if (ec == std::errc() && ptr == digits.data() + digits.size() && b >= 0) {
      return {StrategyKind::Single, b};
    }
  }
  throw InputError("unknown strategy '" + std::string(text) +
                   "' (expected maxfusion, naive, max_select, single(b), unconditional)");
}

std::string Strategy::name() const {
  switch (kind) {
    case StrategyKind::MaxFusion: return "maxfusion";
    case StrategyKind::Naive: return "naive";
    case StrategyKind::MaxSelect: return "max_select";
    case StrategyKind::Single: return "single(" + std::to_string(branch) + ")";
    case StrategyKind::Unconditional: return "unconditional";
  }
  return "unknown";
}

Eigen::VectorXd Scenario::readout() const {
  return Eigen::VectorXd::Constant(channels, 1.0 / static_cast<double>(channels));
}

void Scenario::validate() const {
  if (height < 1 || width < 1 || channels < 1) {
    throw InputError("height, width and channels must be >= 1");
  }
  if (!std::isfinite(guidance_weight) || guidance_weight < 0.0) {
    throw InputError("guidance_weight must be finite and >= 0");
  }
  if (!std::isfinite(prior.mean)) throw InputError("prior_mean must be finite");
  if (!std::isfinite(prior.std) || prior.std < 0.0) throw InputError("prior_std must be finite and >= 0");
  fusion.validate();

  const Eigen::VectorXd u = readout();
  for (std::size_t b = 0; b < branches.size(); ++b) {
    const auto& br = branches[b];
    const std::string where = "branches[" + std::to_string(b) + "]";
    if (br.mask.rows() != height || br.mask.cols() != width) {
      throw InputError(where + ".mask must be " + std::to_string(height) + "x" + std::to_string(width));
    }
    if (br.target.rows() != height || br.target.cols() != width) {
      throw InputError(where + ".target must be " + std::to_string(height) + "x" + std::to_string(width));
    }
    if (!br.mask.allFinite() || (br.mask < 0.0).any() || (br.mask > 1.0).any()) {
      throw InputError(where + ".mask values must lie in [0, 1]");
    }
    if (!br.target.allFinite()) throw InputError(where + ".target must be finite");
    if (br.embedding.size() != channels) {
      throw InputError(where + ".embedding must have " + std::to_string(channels) + " entries");
    }
    if (!br.embedding.allFinite() || std::abs(u.dot(br.embedding) - 1.0) > 1e-6) {
      throw InputError(where + ".embedding must have mean 1 (unit read-out)");
    }
    if (!std::isfinite(br.strength) || br.strength <= 0.0) {
      throw InputError(where + ".strength must be positive");
    }
  }
  if (strategy.kind == StrategyKind::Single &&
      (strategy.branch < 0 || static_cast<std::size_t>(strategy.branch) >= branches.size())) {
    throw InputError("strategy " + strategy.name() + " refers to a missing branch");
  }
}

Eigen::VectorXd default_embedding(Index channels, int branch_index, double amplitude) {
  if (channels < 2) return Eigen::VectorXd::Ones(std::max<Index>(channels, 1));
  const Index harmonics = std::max<Index>(1, channels / 2);
  const double m = static_cast<double>(1 + branch_index % harmonics);
  Eigen::VectorXd d(channels);
  for (Index c = 0; c < channels; ++c) {
    d[c] = amplitude * std::cos(2.0 * std::numbers::pi * m * static_cast<double>(c) / static_cast<double>(channels));
  }
  return Eigen::VectorXd::Ones(channels) + (d.array() - d.mean()).matrix();
}

Field analytic_score(const Field& x, int t, const NoiseSchedule& schedule, const GaussianPrior& prior) {
  if (t < 0 || t >= schedule.steps()) {
    throw InputError("step " + std::to_string(t) + " out of range [0, " + std::to_string(schedule.steps()) + ")");
  }
  const double ab = schedule.alpha_bar(t);
  const double mean = std::sqrt(ab) * prior.mean;
  return -(x - mean) / prior.marginal_variance(ab);
}

Field posterior_mean(const Field& x, const Field& score, int t, const NoiseSchedule& schedule) {
  const double ab = schedule.alpha_bar(t);
  return (x + (1.0 - ab) * score) / std::sqrt(ab);
}

FeatureMapf branch_encode(const Scenario& scenario, int branch, const Field& x0_hat) {
  const Branch& br = scenario.branches.at(static_cast<std::size_t>(branch));
  const Field residual = br.strength * br.mask * (br.target - x0_hat);
  const Eigen::RowVectorXd flat = residual.reshaped<Eigen::RowMajor>().transpose();
  FeatureMapf::Storage s = (br.embedding * flat).cast<float>();
  return FeatureMapf(scenario.height, scenario.width, std::move(s));
}

Field decode_guidance(const FeatureMapf& f_eff, const Eigen::VectorXd& readout) {
  if (readout.size() != f_eff.channels()) {
    throw InputError("read-out has " + std::to_string(readout.size()) + " channels, features have " +
                     std::to_string(f_eff.channels()));
  }
  const Eigen::RowVectorXd d = readout.transpose() * f_eff.matrix().cast<double>();
  return d.reshaped<Eigen::RowMajor>(f_eff.height(), f_eff.width());
}

std::vector<double> condition_error(const Field& sample, const Scenario& scenario) {
  std::vector<double> out;
  out.reserve(scenario.branches.size());
  for (const auto& br : scenario.branches) {
    if (br.mask.rows() != sample.rows() || br.mask.cols() != sample.cols()) {
      throw InputError("condition_error: sample shape does not match branch mask");
    }
    const double weight = br.mask.sum();
    out.push_back(weight == 0.0 ? 0.0 : (br.mask * (sample - br.target).square()).sum() / weight);
  }
  return out;
}

double RunReport::max_mse() const {
  return mse.empty() ? 0.0 : *std::max_element(mse.begin(), mse.end());
}

bool RunReport::same_outputs(const RunReport& o) const {
  if (!(strategy == o.strategy) || delta != o.delta || seed != o.seed) return false;
  if (sample.rows() != o.sample.rows() || sample.cols() != o.sample.cols() || !(sample == o.sample).all()) {
    return false;
  }
  if (mse != o.mse || averaged_entries != o.averaged_entries || selection_entries != o.selection_entries) {
    return false;
  }
  if (steps.size() != o.steps.size()) return false;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& a = steps[i];
    const auto& b = o.steps[i];
    if (a.t != b.t || a.averaged_fraction != b.averaged_fraction || a.win_fraction != b.win_fraction ||
        a.selections != b.selections || a.encodings != b.encodings || a.unmerged != b.unmerged) {
      return false;
    }
  }
  return true;
}

namespace {

struct Guidance {
  Field field;
  std::vector<SelectionMask> selections;
  std::vector<FeatureMapf> unmerged;
  std::vector<double> win_fraction;
};

Guidance fuse_guidance(const Scenario& sc, const std::vector<FeatureMapf>& enc, const Eigen::VectorXd& u) {
  const auto n = enc.size();
  Guidance g{Field::Zero(sc.height, sc.width), {}, {}, std::vector<double>(n, 0.0)};
  const double hw = static_cast<double>(sc.height * sc.width);

  switch (sc.strategy.kind) {
    case StrategyKind::Unconditional:
      break;
    case StrategyKind::Single:
      g.field = decode_guidance(enc[static_cast<std::size_t>(sc.strategy.branch)], u);
      break;
    case StrategyKind::Naive: {
      FeatureMapf avg = naive_average(enc);
      g.field = decode_guidance(avg, u);
      for (std::size_t k = 1; k < n; ++k) {
        g.selections.emplace_back(SelectionMask::Tags::Constant(sc.height, sc.width, SelectionMask::kAveraged), 2);
      }
      g.unmerged.assign(n, avg);
      break;
    }
    case StrategyKind::MaxFusion:
    case StrategyKind::MaxSelect: {
      if (n == 1) {
        g.field = decode_guidance(enc[0], u);
        g.unmerged = enc;
        g.win_fraction[0] = 1.0;
        break;
      }
      FusionConfig cfg = sc.fusion;
      if (sc.strategy.kind == StrategyKind::MaxSelect) cfg.delta = 2.0;
      auto fold = maxfusion_fold(enc, cfg);
      g.field = decode_guidance(fold.f_eff, u);
      for (auto& step : fold.steps) g.selections.push_back(std::move(step.selection));
      for (std::size_t b = 0; b < n; ++b) {
        g.win_fraction[b] = static_cast<double>((fold.provenance == static_cast<std::int32_t>(b)).count()) / hw;
      }
      g.unmerged = std::move(fold.updated);
      break;
    }
  }
  return g;
}

}  // namespace

RunReport sample(const Scenario& sc, const SampleOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  sc.validate();

  RunReport report;
  report.strategy = sc.strategy;
  report.delta = sc.strategy.kind == StrategyKind::MaxSelect ? 2.0 : sc.fusion.delta;
  report.seed = sc.seed;

  std::mt19937_64 rng(sc.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto& schedule = sc.schedule;
  const int steps = schedule.steps();
  const Eigen::VectorXd u = sc.readout();
  const bool conditioned = sc.strategy.kind != StrategyKind::Unconditional && !sc.branches.empty();

  // x_{T-1} drawn exactly from the diffused prior.
  Field x(sc.height, sc.width);
  {
    const double ab = schedule.alpha_bar(steps - 1);
    const double mean = std::sqrt(ab) * sc.prior.mean;
    const double sd = std::sqrt(sc.prior.marginal_variance(ab));
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = mean + sd * normal(rng);
  }

  report.steps.reserve(static_cast<std::size_t>(steps));
  for (int t = steps - 1; t >= 0; --t) {
    const Field score = analytic_score(x, t, schedule, sc.prior);
    StepTrace trace;
    trace.t = t;
    trace.win_fraction.assign(sc.branches.size(), 0.0);

    Field guidance = Field::Zero(sc.height, sc.width);
    if (conditioned) {
      const Field x0_hat = posterior_mean(x, score, t, schedule);
      std::vector<FeatureMapf> enc;
      enc.reserve(sc.branches.size());
      for (std::size_t b = 0; b < sc.branches.size(); ++b) enc.push_back(branch_encode(sc, static_cast<int>(b), x0_hat));

      Guidance g = fuse_guidance(sc, enc, u);
      guidance = std::move(g.field);
      Index averaged = 0;
      Index total = 0;
      for (const auto& s : g.selections) {
        averaged += s.count_averaged();
        total += s.tags().size();
      }
      trace.averaged_fraction = total == 0 ? 0.0 : static_cast<double>(averaged) / static_cast<double>(total);
      report.averaged_entries += averaged;
      report.selection_entries += total;
      trace.selections = std::move(g.selections);
      trace.win_fraction = std::move(g.win_fraction);
      if (options.record_features) {
        trace.encodings = std::move(enc);
        trace.unmerged = std::move(g.unmerged);
      }
    }

    const Field effective = score + sc.guidance_weight * guidance;
    const double beta = schedule.beta(t);
    x = (x + beta * effective) / std::sqrt(schedule.alpha(t));
    if (t > 0) {
      // Exact reverse-step variance for the Gaussian prior; equals beta_t when prior.std == 1.
      const double v_prev = sc.prior.marginal_variance(schedule.alpha_bar(t - 1));
      const double v_now = sc.prior.marginal_variance(schedule.alpha_bar(t));
      const double sd = std::sqrt(beta * v_prev / v_now);
      for (Index i = 0; i < x.size(); ++i) x.data()[i] += sd * normal(rng);
    }
    report.steps.push_back(std::move(trace));
  }

  report.sample = std::move(x);
  report.mse = condition_error(report.sample, sc);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::vector<AblationRow> run_ablation(const Scenario& scenario, std::span<const double> deltas) {
  if (deltas.empty()) throw InputError("ablation needs at least one delta");
  std::vector<AblationRow> rows;
  rows.reserve(deltas.size());
  for (double delta : deltas) {
    Scenario sc = scenario;
    sc.strategy = {StrategyKind::MaxFusion, 0};
    sc.fusion.delta = delta;
    const RunReport r = sample(sc);
    rows.push_back({delta, r.mse, r.averaged_fraction()});
  }
  return rows;
}

bool averaged_fraction_non_increasing(std::span<const AblationRow> rows) {
  std::vector<const AblationRow*> sorted;
  for (const auto& r : rows) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->delta < b->delta; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i]->averaged_fraction > sorted[i - 1]->averaged_fraction) return false;
  }
  return true;
}

}  // namespace maxfusion::sim
