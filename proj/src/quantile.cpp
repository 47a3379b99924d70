#include "fairadapt/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include "fairadapt/error.hpp"
#include "fairadapt/forest.hpp"
#include "fairadapt/linear_quantile.hpp"
#include "fairadapt/random.hpp"

namespace fairadapt {

ConditionalDistribution ConditionalDistribution::continuous(std::vector<double> x, std::vector<double> p) {
  if (x.empty() || x.size() != p.size()) throw Error(ErrorCode::Degenerate, "empty conditional distribution");
  ConditionalDistribution d;
  d.x_ = std::move(x);
  d.p_ = std::move(p);
  return d;
}

ConditionalDistribution ConditionalDistribution::discrete(std::vector<double> support,
                                                          std::vector<double> cumulative) {
  if (support.empty() || support.size() != cumulative.size()) {
    throw Error(ErrorCode::Degenerate, "empty conditional distribution");
  }
  ConditionalDistribution d;
  d.discrete_ = true;
  double prev = 0.0;
  for (std::size_t k = 0; k < support.size(); ++k) {
    if (cumulative[k] > prev || (k + 1 == support.size() && d.x_.empty())) {
      d.x_.push_back(support[k]);
      d.p_.push_back(cumulative[k]);
      prev = cumulative[k];
    }
  }
  return d;
}

double ConditionalDistribution::cdf(double v) const {
  const auto it = std::upper_bound(x_.begin(), x_.end(), v);
  if (it == x_.begin()) return 0.0;
  const auto k = static_cast<std::size_t>(it - x_.begin()) - 1;
  if (discrete_ || k + 1 == x_.size()) return p_[k];
  const double t = (v - x_[k]) / (x_[k + 1] - x_[k]);
  return std::clamp(p_[k] + t * (p_[k + 1] - p_[k]), 0.0, 1.0);
}

double ConditionalDistribution::cdf_left(double v) const {
  if (!discrete_) return cdf(v);
  const auto it = std::lower_bound(x_.begin(), x_.end(), v);
  if (it == x_.begin()) return 0.0;
  return p_[static_cast<std::size_t>(it - x_.begin()) - 1];
}

double ConditionalDistribution::quantile(double u) const {
  u = std::clamp(u, 0.0, 1.0);
  if (u <= p_.front()) return x_.front();
  const auto it = std::lower_bound(p_.begin(), p_.end(), u);
  if (it == p_.end()) return x_.back();
  const auto k = static_cast<std::size_t>(it - p_.begin());
  if (discrete_) return x_[k];
  const double t = (u - p_[k - 1]) / (p_[k] - p_[k - 1]);
  return x_[k - 1] + t * (x_[k] - x_[k - 1]);
}

double ConditionalDistribution::latent_quantile(double v, double jitter) const {
  const double hi = cdf(v);
  if (!discrete_) return hi;
  const double lo = cdf_left(v);
  return std::clamp(hi - jitter * (hi - lo), 0.0, 1.0);
}

std::vector<double> LinearConfig::grid() const {
  if (!taus.empty()) return taus;
  std::vector<double> g;
  for (int k = 0; k < 100; ++k) g.push_back(0.005 + 0.01 * k);
  return g;
}

void BackendConfig::validate() const {
  if (!find_backend(kind)) throw Error(ErrorCode::Usage, "unknown quantile backend '" + kind + "'");
  if (forest.n_trees == 0) throw Error(ErrorCode::Usage, "n_trees must be at least 1");
  const auto g = linear.grid();
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!(g[k] > 0.0 && g[k] < 1.0)) throw Error(ErrorCode::Usage, "tau grid values must lie in (0, 1)");
    if (k > 0 && !(g[k] > g[k - 1])) throw Error(ErrorCode::Usage, "tau grid must be strictly increasing");
  }
  if (!(linear.smoothing > 0.0)) throw Error(ErrorCode::Usage, "smoothing must be positive");
  if (linear.max_iterations == 0) throw Error(ErrorCode::Usage, "max_iterations must be at least 1");
}

namespace {

struct Registry {
  std::mutex mutex;
  std::map<std::string, std::shared_ptr<const QuantileBackend>> backends;

  Registry() {
    backends["forest"] = std::make_shared<ForestBackend>();
    backends["linear"] = std::make_shared<LinearBackend>();
  }
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

void register_backend(std::shared_ptr<const QuantileBackend> backend) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  const auto name = backend->name();
  r.backends[name] = std::move(backend);
}

std::shared_ptr<const QuantileBackend> find_backend(const std::string& name) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  auto it = r.backends.find(name);
  return it == r.backends.end() ? nullptr : it->second;
}

std::vector<std::string> backend_names() {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  std::vector<std::string> names;
  for (const auto& [name, _] : r.backends) names.push_back(name);
  return names;
}

FitData make_fit_data(const Dataset& data, const std::string& target, const std::vector<std::string>& parents,
                      const std::vector<std::size_t>& rows) {
  const Column& y = data.column(target);
  std::vector<const Column*> cols;
  for (const auto& p : parents) cols.push_back(&data.column(p));

  std::vector<std::size_t> order = rows;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    for (const Column* c : cols) {
      if (c->values[a] != c->values[b]) return c->values[a] < c->values[b];
    }
    if (y.values[a] != y.values[b]) return y.values[a] < y.values[b];
    return false;
  });

  FitData fd;
  fd.discrete_target = y.is_discrete();
  fd.target.reserve(order.size());
  for (auto r : order) fd.target.push_back(y.values[r]);
  for (const Column* c : cols) {
    PredictorInfo info;
    info.name = c->name;
    info.categorical = c->kind == ColumnKind::Categorical && c->has_labels();
    info.n_levels = info.categorical ? c->levels.size() : 0;
    fd.info.push_back(std::move(info));
    std::vector<double> values;
    values.reserve(order.size());
    for (auto r : order) values.push_back(c->values[r]);
    fd.predictors.push_back(std::move(values));
  }
  return fd;
}

QuantileModel QuantileModel::fit(const Dataset& data, const std::string& target,
                                 const std::vector<std::string>& parents, const BackendConfig& config,
                                 const FitOptions& options) {
  config.validate();
  const auto backend = find_backend(config.kind);
  if (data.n_rows() == 0) throw Error(ErrorCode::Degenerate, "cannot fit " + target + " on zero rows");
  data.column(target);
  for (const auto& p : parents) data.column(p);

  QuantileModel m;
  m.target_ = target;
  m.parents_ = parents;
  m.backend_ = config.kind;
  m.seed_ = options.seed;
  m.discrete_ = data.column(target).is_discrete();

  const auto prot_it = std::find(parents.begin(), parents.end(), options.protected_attr);
  if (options.attr_is_root && !options.protected_attr.empty() && prot_it != parents.end()) {
    if (options.baseline_mask.size() != data.n_rows()) {
      throw Error(ErrorCode::SchemaMismatch, "baseline mask has " + std::to_string(options.baseline_mask.size()) +
                                                 " entries for " + std::to_string(data.n_rows()) + " rows");
    }
    std::vector<std::size_t> base_rows;
    std::vector<std::size_t> other_rows;
    for (std::size_t r = 0; r < data.n_rows(); ++r) (options.baseline_mask[r] ? base_rows : other_rows).push_back(r);
    if (!base_rows.empty() && !other_rows.empty()) {
      std::vector<std::string> reduced = parents;
      reduced.erase(reduced.begin() + (prot_it - parents.begin()));
      m.split_position_ = static_cast<std::size_t>(prot_it - parents.begin());
      m.baseline_value_ = data.column(options.protected_attr).values[base_rows.front()];
      m.baseline_group_ = backend->fit(make_fit_data(data, target, reduced, base_rows), config,
                                       derive_seed(options.seed, 1));
      m.other_group_ = backend->fit(make_fit_data(data, target, reduced, other_rows), config,
                                    derive_seed(options.seed, 2));
      return m;
    }
  }
  std::vector<std::size_t> all(data.n_rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  m.pooled_ = backend->fit(make_fit_data(data, target, parents, all), config, derive_seed(options.seed, 0));
  return m;
}

const ConditionalModel& QuantileModel::pick(std::span<const double> parents_row, std::vector<double>& reduced) const {
  if (parents_row.size() != parents_.size()) {
    throw Error(ErrorCode::SchemaMismatch, "model for " + target_ + " expects " + std::to_string(parents_.size()) +
                                               " parent values");
  }
  if (!split_position_) {
    reduced.assign(parents_row.begin(), parents_row.end());
    return *pooled_;
  }
  const auto pos = *split_position_;
  reduced.clear();
  for (std::size_t k = 0; k < parents_row.size(); ++k)
    if (k != pos) reduced.push_back(parents_row[k]);
  return parents_row[pos] == baseline_value_ ? *baseline_group_ : *other_group_;
}

double QuantileModel::quantile_of(double v, std::span<const double> parents_row, double jitter) const {
  std::vector<double> reduced;
  const auto& model = pick(parents_row, reduced);
  return std::clamp(model.quantile_of(v, reduced, jitter), 0.0, 1.0);
}

double QuantileModel::inverse_quantile(double u, std::span<const double> parents_row) const {
  std::vector<double> reduced;
  const auto& model = pick(parents_row, reduced);
  return model.inverse_quantile(std::clamp(u, 0.0, 1.0), reduced);
}

void QuantileModel::save(BinaryWriter& out) const {
  out.str(target_);
  out.u64(parents_.size());
  for (const auto& p : parents_) out.str(p);
  out.str(backend_);
  out.u64(seed_);
  out.u8(discrete_ ? 1 : 0);
  out.u8(split_position_ ? 1 : 0);
  auto nested = [&](const ConditionalModel& model) {
    BinaryWriter inner;
    model.save(inner);
    out.str(inner.bytes());
  };
  if (split_position_) {
    out.u64(*split_position_);
    out.f64(baseline_value_);
    nested(*baseline_group_);
    nested(*other_group_);
  } else {
    nested(*pooled_);
  }
}

QuantileModel QuantileModel::load(BinaryReader& in) {
  QuantileModel m;
  m.target_ = in.str();
  const auto n_parents = in.u64();
  for (std::uint64_t k = 0; k < n_parents; ++k) m.parents_.push_back(in.str());
  m.backend_ = in.str();
  m.seed_ = in.u64();
  m.discrete_ = in.u8() != 0;
  const bool split = in.u8() != 0;
  const auto backend = find_backend(m.backend_);
  if (!backend) throw Error(ErrorCode::Format, "model uses unregistered backend '" + m.backend_ + "'");
  auto nested = [&] {
    const std::string bytes = in.str();
    BinaryReader inner(bytes);
    auto model = backend->load(inner);
    if (!inner.done()) throw Error(ErrorCode::Format, "trailing bytes in model for " + m.target_);
    return model;
  };
  if (split) {
    m.split_position_ = static_cast<std::size_t>(in.u64());
    if (*m.split_position_ >= m.parents_.size()) throw Error(ErrorCode::Format, "corrupt group split");
    m.baseline_value_ = in.f64();
    m.baseline_group_ = nested();
    m.other_group_ = nested();
  } else {
    m.pooled_ = nested();
  }
  return m;
}

}  // namespace fairadapt
