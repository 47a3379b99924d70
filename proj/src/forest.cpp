#include "fairadapt/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fairadapt/error.hpp"
#include "fairadapt/parallel.hpp"
#include "fairadapt/random.hpp"

namespace fairadapt {

namespace {

struct Split {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  std::vector<std::uint8_t> left_levels;
  double gain = 0.0;
};

struct WorkItem {
  std::size_t begin;
  std::size_t end;
  std::uint32_t node;
};

}  // namespace

QuantileForest::Tree QuantileForest::grow_tree(const FitData& data,
                                                const std::vector<std::uint32_t>& row_bin,
                                                std::size_t n_bins, const ForestConfig& config,
                                                std::size_t mtry, std::uint64_t seed) {
  const std::size_t n = data.n_rows();
  const std::size_t p = data.predictors.size();
  SplitMix rng(seed);

  // half-sample without replacement
  std::vector<std::uint32_t> samples(n);
  std::iota(samples.begin(), samples.end(), 0u);
  const std::size_t drawn = std::max<std::size_t>(1, n / 2);
  for (std::size_t i = 0; i < drawn; ++i) std::swap(samples[i], samples[i + rng.below(n - i)]);
  samples.resize(drawn);
  std::sort(samples.begin(), samples.end());

  Tree tree;
  tree.nodes.emplace_back();
  std::vector<WorkItem> stack{{0, drawn, 0}};
  std::vector<std::size_t> features(p);
  std::vector<std::pair<double, double>> pairs;
  std::uint32_t n_leaves = 0;
  const std::size_t min_leaf = std::max<std::size_t>(1, config.min_leaf);

  while (!stack.empty()) {
    const WorkItem item = stack.back();
    stack.pop_back();
    const std::size_t m = item.end - item.begin;

    auto make_leaf = [&] {
      tree.nodes[item.node].feature = -1;
      tree.nodes[item.node].left = n_leaves++;
    };
    if (m < 2 * min_leaf || p == 0) {
      make_leaf();
      continue;
    }

    double mean = 0.0;
    for (std::size_t k = item.begin; k < item.end; ++k) mean += data.target[samples[k]];
    mean /= static_cast<double>(m);
    double total_ss = 0.0;
    for (std::size_t k = item.begin; k < item.end; ++k) {
      const double d = data.target[samples[k]] - mean;
      total_ss += d * d;
    }
    if (total_ss <= 0.0) {
      make_leaf();
      continue;
    }

    std::iota(features.begin(), features.end(), std::size_t{0});
    for (std::size_t k = 0; k < mtry; ++k) {
      const std::size_t j = k + rng.below(p - k);
      std::swap(features[k], features[j]);
    }

    Split best;
    for (std::size_t k = 0; k < mtry; ++k) {
      const std::size_t f = features[k];
      const auto& x = data.predictors[f];
      if (data.info[f].categorical) {
        const std::size_t levels = data.info[f].n_levels;
        std::vector<double> sum(levels, 0.0);
        std::vector<std::size_t> count(levels, 0);
        for (std::size_t s = item.begin; s < item.end; ++s) {
          const auto code = static_cast<std::size_t>(x[samples[s]]);
          sum[code] += data.target[samples[s]] - mean;
          ++count[code];
        }
        std::vector<std::size_t> present;
        for (std::size_t l = 0; l < levels; ++l)
          if (count[l] > 0) present.push_back(l);
        if (present.size() < 2) continue;
        std::stable_sort(present.begin(), present.end(), [&](std::size_t a, std::size_t b) {
          return sum[a] / static_cast<double>(count[a]) < sum[b] / static_cast<double>(count[b]);
        });
        double s_left = 0.0;
        std::size_t n_left = 0;
        for (std::size_t i = 0; i + 1 < present.size(); ++i) {
          s_left += sum[present[i]];
          n_left += count[present[i]];
          const std::size_t n_right = m - n_left;
          if (n_left < min_leaf || n_right < min_leaf) continue;
          const double s_right = -s_left;
          const double gain = s_left * s_left / static_cast<double>(n_left) +
                              s_right * s_right / static_cast<double>(n_right);
          if (gain > best.gain) {
            best.found = true;
            best.feature = f;
            best.gain = gain;
            best.left_levels.assign(levels, 0);
            for (std::size_t t = 0; t <= i; ++t) best.left_levels[present[t]] = 1;
          }
        }
      } else {
        pairs.clear();
        for (std::size_t s = item.begin; s < item.end; ++s) {
          pairs.emplace_back(x[samples[s]], data.target[samples[s]] - mean);
        }
        std::sort(pairs.begin(), pairs.end());
        double s_left = 0.0;
        for (std::size_t i = 1; i < m; ++i) {
          s_left += pairs[i - 1].second;
          if (i < min_leaf || m - i < min_leaf) continue;
          if (!(pairs[i - 1].first < pairs[i].first)) continue;
          const double s_right = -s_left;
          const double gain = s_left * s_left / static_cast<double>(i) +
                              s_right * s_right / static_cast<double>(m - i);
          if (gain > best.gain) {
            best.found = true;
            best.feature = f;
            best.gain = gain;
            best.left_levels.clear();
            const double lo = pairs[i - 1].first;
            const double hi = pairs[i].first;
            double mid = lo + (hi - lo) / 2.0;
            if (!(mid < hi)) mid = lo;
            best.threshold = mid;
          }
        }
      }
    }

    if (!best.found || best.gain <= 1e-12 * total_ss) {
      make_leaf();
      continue;
    }

    Node& node = tree.nodes[item.node];
    node.feature = static_cast<std::int32_t>(best.feature);
    node.threshold = best.threshold;
    const bool categorical = data.info[best.feature].categorical;
    if (categorical) {
      node.mask_offset = static_cast<std::uint32_t>(tree.masks.size());
      tree.masks.insert(tree.masks.end(), best.left_levels.begin(), best.left_levels.end());
    }
    const auto& x = data.predictors[best.feature];
    auto goes_left = [&](std::uint32_t row) {
      if (categorical) return best.left_levels[static_cast<std::size_t>(x[row])] != 0;
      return x[row] <= best.threshold;
    };
    auto mid_it = std::stable_partition(samples.begin() + static_cast<std::ptrdiff_t>(item.begin),
                                        samples.begin() + static_cast<std::ptrdiff_t>(item.end), goes_left);
    const std::size_t mid = static_cast<std::size_t>(mid_it - samples.begin());

    const auto left = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    const auto right = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[item.node].left = left;
    tree.nodes[item.node].right = right;
    stack.push_back({mid, item.end, right});
    stack.push_back({item.begin, mid, left});
  }

  // Leaf membership uses every training row, not only the bootstrap sample.
  std::vector<std::uint32_t> row_leaf(n);
  std::vector<double> row(p);
  std::vector<std::uint32_t> leaf_count(n_leaves, 0);
  QuantileForest helper;
  helper.info_ = data.info;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < p; ++f) row[f] = data.predictors[f][i];
    row_leaf[i] = helper.leaf_of(tree, row);
    ++leaf_count[row_leaf[i]];
  }
  tree.leaf_start.assign(n_leaves + 1, 0);
  for (std::uint32_t l = 0; l < n_leaves; ++l) tree.leaf_start[l + 1] = tree.leaf_start[l] + leaf_count[l];
  tree.leaf_bins.resize(n);
  std::vector<std::uint32_t> fill(tree.leaf_start.begin(), tree.leaf_start.end() - 1);
  for (std::size_t i = 0; i < n; ++i) tree.leaf_bins[fill[row_leaf[i]]++] = row_bin[i];
  (void)n_bins;
  return tree;
}

std::unique_ptr<QuantileForest> QuantileForest::grow(const FitData& data, const ForestConfig& config,
                                                     std::uint64_t seed) {
  if (data.n_rows() == 0) throw Error(ErrorCode::Degenerate, "cannot grow a forest on zero rows");
  if (config.n_trees == 0) throw Error(ErrorCode::Usage, "forest needs at least one tree");
  auto forest = std::make_unique<QuantileForest>();
  forest->info_ = data.info;
  forest->discrete_ = data.discrete_target;

  forest->support_ = data.target;
  std::sort(forest->support_.begin(), forest->support_.end());
  forest->support_.erase(std::unique(forest->support_.begin(), forest->support_.end()),
                         forest->support_.end());
  std::vector<std::uint32_t> row_bin(data.n_rows());
  for (std::size_t i = 0; i < data.n_rows(); ++i) {
    row_bin[i] = static_cast<std::uint32_t>(
        std::lower_bound(forest->support_.begin(), forest->support_.end(), data.target[i]) -
        forest->support_.begin());
  }

  const std::size_t p = data.predictors.size();
  std::size_t mtry = config.mtry;
  if (mtry == 0) mtry = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))));
  mtry = std::clamp<std::size_t>(mtry, p == 0 ? 0 : 1, p);

  forest->trees_.resize(config.n_trees);
  parallel_for(config.n_trees, [&](std::size_t t) {
    forest->trees_[t] = grow_tree(data, row_bin, forest->support_.size(), config, mtry, derive_seed(seed, t));
  });
  forest->cache_if_constant();
  return forest;
}

std::uint32_t QuantileForest::leaf_of(const Tree& tree, std::span<const double> x) const {
  std::uint32_t id = 0;
  while (true) {
    const Node& node = tree.nodes[id];
    if (node.feature < 0) return node.left;
    const auto f = static_cast<std::size_t>(node.feature);
    bool left;
    if (info_[f].categorical) {
      const double code = x[f];
      left = code >= 0 && code < static_cast<double>(info_[f].n_levels) &&
             tree.masks[node.mask_offset + static_cast<std::size_t>(code)] != 0;
    } else {
      left = x[f] <= node.threshold;
    }
    id = left ? node.left : node.right;
  }
}

std::vector<double> QuantileForest::weights(std::span<const double> predictors) const {
  if (predictors.size() != info_.size()) {
    throw Error(ErrorCode::SchemaMismatch, "forest expects " + std::to_string(info_.size()) + " predictors");
  }
  std::vector<double> w(support_.size(), 0.0);
  for (const auto& tree : trees_) {
    const auto leaf = leaf_of(tree, predictors);
    const auto begin = tree.leaf_start[leaf];
    const auto end = tree.leaf_start[leaf + 1];
    const double share = 1.0 / static_cast<double>(end - begin);
    for (auto k = begin; k < end; ++k) w[tree.leaf_bins[k]] += share;
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) v /= total;
  return w;
}

ConditionalDistribution QuantileForest::distribution(std::span<const double> predictors) const {
  if (fixed_) return *fixed_;
  return distribution_from(weights(predictors));
}

// Discrete targets: step CDF over the weighted support. Continuous targets:
// knots at the weighted order statistics with midpoint plotting positions
// (cumulative weight minus half the point's own weight), except that the
// smallest and largest support points sit at 0 and 1.
ConditionalDistribution QuantileForest::distribution_from(const std::vector<double>& w) const {
  std::vector<double> x;
  std::vector<double> mass;
  double total = 0.0;
  for (std::size_t b = 0; b < w.size(); ++b) {
    if (w[b] <= 0.0) continue;
    x.push_back(support_[b]);
    mass.push_back(w[b]);
    total += w[b];
  }
  std::vector<double> p(x.size());
  if (discrete_) {
    double cum = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      cum += mass[k];
      p[k] = std::min(1.0, cum / total);
    }
    p.back() = 1.0;
    return ConditionalDistribution::discrete(std::move(x), std::move(p));
  }
  if (x.size() == 1) return ConditionalDistribution::continuous(std::move(x), {1.0});

  double cum = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    p[k] = (cum + mass[k] / 2.0) / total;
    cum += mass[k];
  }
  p.front() = 0.0;
  p.back() = 1.0;
  return ConditionalDistribution::continuous(std::move(x), std::move(p));
}

void QuantileForest::cache_if_constant() {
  if (!info_.empty()) return;
  fixed_.reset();
  fixed_ = distribution_from(weights({}));
}

void QuantileForest::save(BinaryWriter& out) const {
  out.u64(info_.size());
  for (const auto& i : info_) {
    out.str(i.name);
    out.u8(i.categorical ? 1 : 0);
    out.u64(i.n_levels);
  }
  out.u8(discrete_ ? 1 : 0);
  out.f64s(support_);
  out.u64(trees_.size());
  for (const auto& tree : trees_) {
    out.u64(tree.nodes.size());
    for (const auto& node : tree.nodes) {
      out.u32(static_cast<std::uint32_t>(node.feature));
      out.u32(node.left);
      out.u32(node.right);
      out.u32(node.mask_offset);
      out.f64(node.threshold);
    }
    out.u64(tree.masks.size());
    for (auto m : tree.masks) out.u8(m);
    out.u32s(tree.leaf_start);
    out.u32s(tree.leaf_bins);
  }
}

std::unique_ptr<QuantileForest> QuantileForest::load(BinaryReader& in) {
  auto forest = std::make_unique<QuantileForest>();
  const auto p = in.u64();
  for (std::uint64_t k = 0; k < p; ++k) {
    PredictorInfo info;
    info.name = in.str();
    info.categorical = in.u8() != 0;
    info.n_levels = in.u64();
    forest->info_.push_back(std::move(info));
  }
  forest->discrete_ = in.u8() != 0;
  forest->support_ = in.f64s();
  const auto n_trees = in.u64();
  forest->trees_.resize(n_trees);
  for (auto& tree : forest->trees_) {
    const auto n_nodes = in.u64();
    tree.nodes.resize(n_nodes);
    for (auto& node : tree.nodes) {
      node.feature = static_cast<std::int32_t>(in.u32());
      node.left = in.u32();
      node.right = in.u32();
      node.mask_offset = in.u32();
      node.threshold = in.f64();
    }
    const auto n_masks = in.u64();
    tree.masks.resize(n_masks);
    for (auto& m : tree.masks) m = in.u8();
    tree.leaf_start = in.u32s();
    tree.leaf_bins = in.u32s();
    for (auto b : tree.leaf_bins) {
      if (b >= forest->support_.size()) throw Error(ErrorCode::Format, "corrupt forest leaf");
    }
  }
  forest->cache_if_constant();
  return forest;
}

std::unique_ptr<ConditionalModel> ForestBackend::fit(const FitData& data, const BackendConfig& config,
                                                     std::uint64_t seed) const {
  return QuantileForest::grow(data, config.forest, seed);
}

std::unique_ptr<ConditionalModel> ForestBackend::load(BinaryReader& in) const {
  return QuantileForest::load(in);
}

}  // namespace fairadapt
