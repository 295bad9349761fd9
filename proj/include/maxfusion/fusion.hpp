#pragma once

#include <array>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "maxfusion/stats.hpp"
#include "maxfusion/tensor.hpp"

namespace maxfusion {

enum class TieBreak { LowestIndex };

struct FusionConfig {
  /// Correlation threshold. Locations with rho >= delta are averaged.
  /// Values outside [-1, 1] force one path everywhere.
  double delta = 0.7;
  /// false selects the variant whose unmerge leaves losing branches untouched.
  bool renormalize = true;
  TieBreak tie_break = TieBreak::LowestIndex;
  StatsConfig stats;

  void validate() const {
    if (!std::isfinite(delta)) throw InputError("delta must be finite");
    stats.validate();
  }
};

template <typename Scalar>
struct PairFusionResult {
  FeatureMap<Scalar> f_eff;
  SelectionMask selection;
  SpatialMap rho;
  std::array<SpatialMap, 2> sigma_hat;
  /// Raw per-location standard deviations.
  std::array<SpatialMap, 2> sigma;
};

namespace detail {

template <typename Scalar>
void require_same_shape(const FeatureMap<Scalar>& a, const FeatureMap<Scalar>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw InputError(std::string(what) + " shape mismatch: " + a.shape() + " vs " + b.shape());
  }
}

}  // namespace detail

/// Elementwise mean across branches, accumulated left to right in Scalar.
template <typename Scalar>
FeatureMap<Scalar> naive_average(std::span<const FeatureMap<Scalar>> branches) {
  if (branches.empty()) throw InputError("naive_average needs at least one branch");
  typename FeatureMap<Scalar>::Storage sum = branches[0].matrix();
  for (std::size_t i = 1; i < branches.size(); ++i) {
    detail::require_same_shape(branches[0], branches[i], "naive_average");
    sum += branches[i].matrix();
  }
  sum /= static_cast<Scalar>(branches.size());
  return FeatureMap<Scalar>(branches[0].height(), branches[0].width(), std::move(sum));
}

template <typename Scalar>
FeatureMap<Scalar> naive_average(const std::vector<FeatureMap<Scalar>>& branches) {
  return naive_average(std::span<const FeatureMap<Scalar>>(branches));
}

/// Two-branch merge. Correlated locations (rho >= delta) take the mean of both
/// channel vectors; elsewhere the branch with the larger normalized standard
/// deviation contributes its whole channel vector, ties going to branch 0.
template <typename Scalar>
PairFusionResult<Scalar> merge_pair(const FeatureMap<Scalar>& f1, const FeatureMap<Scalar>& f2,
                                    const FusionConfig& cfg = {}) {
  cfg.validate();
  detail::require_same_shape(f1, f2, "merge_pair");

  SpatialMap rho = correlation_map(f1, f2, cfg.stats);
  SpatialMap sigma1 = channel_std_map(f1);
  SpatialMap sigma2 = channel_std_map(f2);
  SpatialMap hat1 = normalize_spatial(sigma1, cfg.stats);
  SpatialMap hat2 = normalize_spatial(sigma2, cfg.stats);

  typename FeatureMap<Scalar>::Storage out(f1.channels(), f1.locations());
  SelectionMask::Tags tags(f1.height(), f1.width());
  for (Index p = 0; p < f1.locations(); ++p) {
    if (rho[p] >= cfg.delta) {
      out.col(p) = (f1.location(p) + f2.location(p)) / Scalar(2);
      tags.data()[p] = SelectionMask::kAveraged;
    } else {
      const int winner = hat2[p] > hat1[p] ? 1 : 0;
      out.col(p) = winner == 0 ? f1.location(p) : f2.location(p);
      tags.data()[p] = winner;
    }
  }

  return {FeatureMap<Scalar>(f1.height(), f1.width(), std::move(out)),
          SelectionMask(std::move(tags), 2),
          std::move(rho),
          {std::move(hat1), std::move(hat2)},
          {std::move(sigma1), std::move(sigma2)}};
}

/// merge_pair with the correlation gate closed everywhere.
template <typename Scalar>
PairFusionResult<Scalar> pure_max_select(const FeatureMap<Scalar>& f1, const FeatureMap<Scalar>& f2,
                                         const FusionConfig& cfg = {}) {
  FusionConfig forced = cfg;
  forced.delta = 2.0;
  return merge_pair(f1, f2, forced);
}

/// Produces the per-branch features passed on after a merge.
///
/// Averaged locations hand f_eff to both branches. At a Winner(b) location the
/// winner keeps its own vector. With renormalization the loser receives the
/// winner's vector rescaled by sigma_loser / sigma_winner, so its channel
/// standard deviation is unchanged; if the winner's sigma is below epsilon the
/// loser keeps its own vector. Without renormalization the loser is untouched.
template <typename Scalar>
std::pair<FeatureMap<Scalar>, FeatureMap<Scalar>> unmerge_pair(const FeatureMap<Scalar>& f1,
                                                               const FeatureMap<Scalar>& f2,
                                                               const PairFusionResult<Scalar>& result,
                                                               const FusionConfig& cfg = {}) {
  cfg.validate();
  detail::require_same_shape(f1, f2, "unmerge_pair");
  detail::require_same_shape(f1, result.f_eff, "unmerge_pair");
  const SelectionMask& sel = result.selection;
  if (sel.height() != f1.height() || sel.width() != f1.width() || sel.branches() != 2) {
    throw InputError("unmerge_pair selection mask does not match " + f1.shape());
  }

  const std::array<const FeatureMap<Scalar>*, 2> in{&f1, &f2};
  const std::array<SpatialMap, 2> sigma{channel_std_map(f1), channel_std_map(f2)};
  std::array<typename FeatureMap<Scalar>::Storage, 2> out{f1.matrix(), f2.matrix()};

  for (Index p = 0; p < f1.locations(); ++p) {
    const auto winner = sel.winner(p);
    if (!winner) {
      out[0].col(p) = result.f_eff.location(p);
      out[1].col(p) = result.f_eff.location(p);
      continue;
    }
    const int w = *winner;
    const int loser = 1 - w;
    if (!cfg.renormalize) continue;
    const double sigma_max = sigma[w][p];
    if (sigma_max < cfg.stats.epsilon_norm) continue;
    const double scale = sigma[loser][p] / sigma_max;
    out[loser].col(p) = (in[w]->location(p).template cast<double>() * scale).template cast<Scalar>();
  }

  return {FeatureMap<Scalar>(f1.height(), f1.width(), std::move(out[0])),
          FeatureMap<Scalar>(f1.height(), f1.width(), std::move(out[1]))};
}

template <typename Scalar>
struct FoldResult {
  FeatureMap<Scalar> f_eff;
  /// Post-unmerge feature per input branch.
  std::vector<FeatureMap<Scalar>> updated;
  /// One pair result per fold step; step k merges the running feature with branch k + 1.
  std::vector<PairFusionResult<Scalar>> steps;
  /// Per location: index of the single branch f_eff was copied from, or -1 if any averaging happened.
  SelectionMask::Tags provenance;

  Index averaged_entries() const {
    Index n = 0;
    for (const auto& s : steps) n += s.selection.count_averaged();
    return n;
  }
  Index total_entries() const {
    return steps.empty() ? 0 : static_cast<Index>(steps.size()) * steps.front().selection.tags().size();
  }
  double averaged_fraction() const {
    const Index total = total_entries();
    return total == 0 ? 0.0 : static_cast<double>(averaged_entries()) / static_cast<double>(total);
  }
};

/// Incremental N-branch fusion: merge branch 0 with branch 1, then the result
/// with branch 2, and so on. updated[0] follows the running side of every
/// step (later steps overwrite it); updated[k] for k >= 1 is branch k's
/// unmerged feature from the step it joined.
template <typename Scalar>
FoldResult<Scalar> maxfusion_fold(std::span<const FeatureMap<Scalar>> branches, const FusionConfig& cfg = {}) {
  if (branches.size() < 2) throw InputError("maxfusion_fold needs at least two branches");
  for (std::size_t i = 1; i < branches.size(); ++i) {
    detail::require_same_shape(branches[0], branches[i], "maxfusion_fold");
  }

  std::vector<FeatureMap<Scalar>> updated(branches.begin(), branches.end());
  std::vector<PairFusionResult<Scalar>> steps;
  steps.reserve(branches.size() - 1);
  SelectionMask::Tags provenance = SelectionMask::Tags::Zero(branches[0].height(), branches[0].width());

  FeatureMap<Scalar> running = branches[0];
  for (std::size_t k = 1; k < branches.size(); ++k) {
    auto pair = merge_pair(running, branches[k], cfg);
    auto [running_out, branch_out] = unmerge_pair(running, branches[k], pair, cfg);
    updated[0] = std::move(running_out);
    updated[k] = std::move(branch_out);

    for (Index p = 0; p < provenance.size(); ++p) {
      const auto t = pair.selection.tag(p);
      if (t == SelectionMask::kAveraged) {
        provenance.data()[p] = SelectionMask::kAveraged;
      } else if (t == 1) {
        provenance.data()[p] = static_cast<std::int32_t>(k);
      }
    }
    running = pair.f_eff;
    steps.push_back(std::move(pair));
  }

  return {std::move(running), std::move(updated), std::move(steps), std::move(provenance)};
}

template <typename Scalar>
FoldResult<Scalar> maxfusion_fold(const std::vector<FeatureMap<Scalar>>& branches, const FusionConfig& cfg = {}) {
  return maxfusion_fold(std::span<const FeatureMap<Scalar>>(branches), cfg);
}

}  // namespace maxfusion
