#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "fairadapt/quantile.hpp"

namespace fairadapt {

/// Quantile regression forest (Meinshausen 2006).
///
/// Trees are CART regression trees grown on half-samples drawn without
/// replacement, with `mtry` candidate predictors per node and at least
/// `min_leaf` sampled rows per leaf. Categorical predictors split on level subsets, found by ordering the
/// levels present in a node by their mean target. After growing, every training
/// row is dropped down every tree; the conditional distribution at x puts
/// weight (1 / n_trees) * sum_t 1{i in leaf_t(x)} / |leaf_t(x)| on row i.
///
/// Tree t uses seed derive_seed(seed, t), so results are independent of how
/// many threads grow the trees.
class QuantileForest final : public DistributionModel {
 public:
  static std::unique_ptr<QuantileForest> grow(const FitData& data, const ForestConfig& config,
                                              std::uint64_t seed);

  ConditionalDistribution distribution(std::span<const double> predictors) const override;
  void save(BinaryWriter& out) const override;
  static std::unique_ptr<QuantileForest> load(BinaryReader& in);

  std::size_t n_trees() const noexcept { return trees_.size(); }
  /// Meinshausen weights over the distinct training targets, summing to 1.
  std::vector<double> weights(std::span<const double> predictors) const;
  const std::vector<double>& support() const noexcept { return support_; }

 private:
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    std::uint32_t left = 0;     // leaf index when feature == -1
    std::uint32_t right = 0;
    std::uint32_t mask_offset = 0;
    double threshold = 0.0;
  };
  struct Tree {
    std::vector<Node> nodes;
    std::vector<std::uint8_t> masks;  // left-going levels of categorical splits
    std::vector<std::uint32_t> leaf_start;
    std::vector<std::uint32_t> leaf_bins;
  };

  std::uint32_t leaf_of(const Tree& tree, std::span<const double> x) const;
  ConditionalDistribution distribution_from(const std::vector<double>& w) const;
  // Without predictors every query lands in the same leaves.
  void cache_if_constant();
  static Tree grow_tree(const FitData& data, const std::vector<std::uint32_t>& row_bin,
                        std::size_t n_bins, const ForestConfig& config, std::size_t mtry,
                        std::uint64_t seed);

  std::vector<PredictorInfo> info_;
  bool discrete_ = false;
  std::vector<double> support_;
  std::vector<Tree> trees_;
  std::optional<ConditionalDistribution> fixed_;
};

class ForestBackend final : public QuantileBackend {
 public:
  std::string name() const override { return "forest"; }
  std::unique_ptr<ConditionalModel> fit(const FitData& data, const BackendConfig& config,
                                        std::uint64_t seed) const override;
  std::unique_ptr<ConditionalModel> load(BinaryReader& in) const override;
};

}  // namespace fairadapt
