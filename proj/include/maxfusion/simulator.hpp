#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "maxfusion/fusion.hpp"
#include "maxfusion/tensor.hpp"

namespace maxfusion::sim {

/// Linear-beta DDPM schedule. Step t has noise level alpha_bar[t] = prod_{s<=t} (1 - beta[s]).
class NoiseSchedule {
 public:
  static NoiseSchedule linear(int steps = 50, double beta_start = 1e-4, double beta_end = 0.02);

  int steps() const { return static_cast<int>(betas_.size()); }
  double beta(int t) const { return betas_.at(static_cast<std::size_t>(t)); }
  double alpha(int t) const { return 1.0 - beta(t); }
  double alpha_bar(int t) const { return alpha_bars_.at(static_cast<std::size_t>(t)); }
  double beta_start() const { return betas_.front(); }
  double beta_end() const { return betas_.back(); }

 private:
  explicit NoiseSchedule(std::vector<double> betas);

  std::vector<double> betas_;
  std::vector<double> alpha_bars_;
};

/// Independent per-pixel Gaussian prior on clean samples.
struct GaussianPrior {
  double mean = 0.0;
  double std = 1.0;

  /// Variance of the prior after diffusing to noise level alpha_bar.
  double marginal_variance(double alpha_bar) const { return alpha_bar * std * std + 1.0 - alpha_bar; }
};

struct Branch {
  Field mask;                 ///< support of the condition, values in [0, 1]
  Field target;               ///< desired content inside the mask
  Eigen::VectorXd embedding;  ///< channel direction, <readout, embedding> = 1
  double strength = 1.0;
};

enum class StrategyKind { MaxFusion, Naive, MaxSelect, Single, Unconditional };

struct Strategy {
  StrategyKind kind = StrategyKind::MaxFusion;
  int branch = 0;  ///< only for Single

  /// "maxfusion", "naive", "max_select", "single(b)" (or "single:b"), "unconditional".
  static Strategy parse(std::string_view text);
  std::string name() const;

  friend bool operator==(const Strategy&, const Strategy&) = default;
};

struct Scenario {
  Index height = 16;
  Index width = 16;
  Index channels = 8;
  NoiseSchedule schedule = NoiseSchedule::linear();
  std::vector<Branch> branches;
  double guidance_weight = 1.5;
  GaussianPrior prior;
  std::uint64_t seed = 42;
  FusionConfig fusion;
  Strategy strategy;

  /// Shared read-out vector u = (1/C, ..., 1/C).
  Eigen::VectorXd readout() const;
  /// Throws InputError naming the offending field.
  void validate() const;
};

/// Deterministic zero-mean cosine direction added to the all-ones vector, so
/// the result has mean 1 (unit read-out) and nonzero spread when C >= 2.
Eigen::VectorXd default_embedding(Index channels, int branch_index, double amplitude = 0.8);

/// Exact score of the diffused Gaussian prior at step t.
Field analytic_score(const Field& x, int t, const NoiseSchedule& schedule, const GaussianPrior& prior);

/// Posterior mean E[x0 | x_t] via Tweedie's identity.
Field posterior_mean(const Field& x, const Field& score, int t, const NoiseSchedule& schedule);

/// strength * mask * (target - x0_hat) along the branch embedding.
FeatureMapf branch_encode(const Scenario& scenario, int branch, const Field& x0_hat);

/// Projects every channel vector onto the read-out.
Field decode_guidance(const FeatureMapf& f_eff, const Eigen::VectorXd& readout);

/// Masked mean squared error per branch; empty masks report 0.
std::vector<double> condition_error(const Field& sample, const Scenario& scenario);

struct StepTrace {
  int t = 0;
  /// One mask per pairwise merge at this step (N - 1 for N fused branches).
  std::vector<SelectionMask> selections;
  double averaged_fraction = 0.0;
  /// Fraction of locations whose guidance vector came from exactly one branch.
  std::vector<double> win_fraction;
  /// Filled only when SampleOptions::record_features is set.
  std::vector<FeatureMapf> encodings;
  std::vector<FeatureMapf> unmerged;
};

struct RunReport {
  Strategy strategy;
  double delta = 0.0;
  std::uint64_t seed = 0;
  Field sample;
  std::vector<double> mse;
  std::vector<StepTrace> steps;
  Index averaged_entries = 0;
  Index selection_entries = 0;
  double wall_seconds = 0.0;

  double averaged_fraction() const {
    return selection_entries == 0 ? 0.0
                                  : static_cast<double>(averaged_entries) / static_cast<double>(selection_entries);
  }
  double max_mse() const;

  /// Bitwise comparison of everything except wall-clock time.
  bool same_outputs(const RunReport& other) const;
};

struct SampleOptions {
  bool record_features = false;
};

/// Ancestral sampling from x_{T-1} down to x_0 with the fused guidance added
/// to the analytic score at every step. Deterministic in scenario.seed.
RunReport sample(const Scenario& scenario, const SampleOptions& options = {});

struct AblationRow {
  double delta = 0.0;
  std::vector<double> mse;
  double averaged_fraction = 0.0;
};

/// One maxfusion run per delta, all on the scenario's seed. Rows follow input order.
std::vector<AblationRow> run_ablation(const Scenario& scenario, std::span<const double> deltas);

/// True when averaged_fraction never increases as delta increases.
bool averaged_fraction_non_increasing(std::span<const AblationRow> rows);

}  // namespace maxfusion::sim
