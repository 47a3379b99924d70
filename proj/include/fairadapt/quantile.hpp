#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairadapt/binary_io.hpp"
#include "fairadapt/dataset.hpp"

namespace fairadapt {

/// Estimated distribution of a target at one predictor configuration.
///
/// Continuous form: piecewise-linear CDF through knots (x_k, p_k), zero left
/// of x_0 and one from the last knot on. Discrete form: step CDF with mass on
/// `support`, `cumulative[k]` = F(support[k]).
class ConditionalDistribution {
 public:
  static ConditionalDistribution continuous(std::vector<double> x, std::vector<double> p);
  static ConditionalDistribution discrete(std::vector<double> support, std::vector<double> cumulative);

  bool is_discrete() const noexcept { return discrete_; }
  const std::vector<double>& x() const noexcept { return x_; }
  const std::vector<double>& p() const noexcept { return p_; }

  /// F(v), right-continuous.
  double cdf(double v) const;
  /// F(v-), the left limit; equals cdf(v) for the continuous form.
  double cdf_left(double v) const;
  /// Generalised inverse: smallest x with F(x) >= u (interpolated between
  /// knots for the continuous form).
  double quantile(double u) const;

  /// Latent quantile of v. Continuous: F(v). Discrete: the randomized value
  /// F(v) - jitter * (F(v) - F(v-)), i.e. uniform on (F(v-), F(v)] when jitter
  /// is uniform on [0, 1).
  double latent_quantile(double v, double jitter) const;

 private:
  bool discrete_ = false;
  std::vector<double> x_;
  std::vector<double> p_;
};

struct ForestConfig {
  std::size_t n_trees = 500;
  std::size_t mtry = 0;  // 0 means ceil(sqrt(p))
  std::size_t min_leaf = 5;
};

struct LinearConfig {
  std::vector<double> taus;  // empty means 0.005, 0.015, ..., 0.995
  double smoothing = 1e-6;
  std::size_t max_iterations = 200;

  std::vector<double> grid() const;
};

struct BackendConfig {
  std::string kind = "forest";
  ForestConfig forest;
  LinearConfig linear;

  /// Throws Error(Usage) on n_trees == 0 or a tau grid that is not strictly
  /// increasing inside (0, 1).
  void validate() const;
};

/// What a backend sees when fitting: rows are in canonical order, predictors
/// column-major.
struct PredictorInfo {
  std::string name;
  bool categorical = false;
  std::size_t n_levels = 0;
};

struct FitData {
  std::vector<double> target;
  std::vector<std::vector<double>> predictors;
  std::vector<PredictorInfo> info;
  bool discrete_target = false;

  std::size_t n_rows() const noexcept { return target.size(); }
};

/// A fitted conditional model. Backends either implement the two queries
/// directly or derive from DistributionModel.
class ConditionalModel {
 public:
  virtual ~ConditionalModel() = default;
  virtual double quantile_of(double v, std::span<const double> predictors, double jitter) const = 0;
  virtual double inverse_quantile(double u, std::span<const double> predictors) const = 0;
  virtual void save(BinaryWriter& out) const = 0;
};

class DistributionModel : public ConditionalModel {
 public:
  virtual ConditionalDistribution distribution(std::span<const double> predictors) const = 0;

  double quantile_of(double v, std::span<const double> predictors, double jitter) const override {
    return distribution(predictors).latent_quantile(v, jitter);
  }
  double inverse_quantile(double u, std::span<const double> predictors) const override {
    return distribution(predictors).quantile(u);
  }
};

/// Quantile-learning method, looked up by name from BackendConfig::kind.
class QuantileBackend {
 public:
  virtual ~QuantileBackend() = default;
  virtual std::string name() const = 0;
  virtual std::unique_ptr<ConditionalModel> fit(const FitData& data, const BackendConfig& config,
                                                std::uint64_t seed) const = 0;
  virtual std::unique_ptr<ConditionalModel> load(BinaryReader& in) const = 0;
};

/// Registers or replaces a backend under backend->name(). "forest" and
/// "linear" are registered on first use.
void register_backend(std::shared_ptr<const QuantileBackend> backend);
std::shared_ptr<const QuantileBackend> find_backend(const std::string& name);
std::vector<std::string> backend_names();

/// Everything `QuantileModel::fit` needs besides data and config.
struct FitOptions {
  /// Protected attribute name; only consulted when it is among the parents.
  std::string protected_attr;
  /// The protected attribute has no parents, so conditioning on it equals
  /// intervening on it; fit one model per protected group.
  bool attr_is_root = false;
  /// Per data row, true where the protected attribute is at baseline.
  std::vector<bool> baseline_mask;
  std::uint64_t seed = 2022;
};

/// Conditional distribution of one variable given its (extended) parents.
class QuantileModel {
 public:
  QuantileModel() = default;
  QuantileModel(QuantileModel&&) noexcept = default;
  QuantileModel& operator=(QuantileModel&&) noexcept = default;

  /// Throws Error(Degenerate) on zero rows, Error(SchemaMismatch) for unknown
  /// columns or a mask of the wrong length.
  static QuantileModel fit(const Dataset& data, const std::string& target,
                           const std::vector<std::string>& parents, const BackendConfig& config,
                           const FitOptions& options);

  const std::string& target() const noexcept { return target_; }
  const std::vector<std::string>& parents() const noexcept { return parents_; }
  const std::string& backend() const noexcept { return backend_; }
  std::uint64_t seed() const noexcept { return seed_; }
  bool discrete() const noexcept { return discrete_; }
  bool group_split() const noexcept { return split_position_.has_value(); }

  /// u in [0, 1]. `parents_row` follows parents(); `jitter` in [0, 1) is only
  /// used for discrete targets.
  double quantile_of(double v, std::span<const double> parents_row, double jitter = 0.0) const;
  double inverse_quantile(double u, std::span<const double> parents_row) const;

  void save(BinaryWriter& out) const;
  static QuantileModel load(BinaryReader& in);

 private:
  const ConditionalModel& pick(std::span<const double> parents_row, std::vector<double>& reduced) const;

  std::string target_;
  std::vector<std::string> parents_;
  std::string backend_;
  std::uint64_t seed_ = 0;
  bool discrete_ = false;
  std::optional<std::size_t> split_position_;
  double baseline_value_ = 0.0;
  std::unique_ptr<ConditionalModel> pooled_;
  std::unique_ptr<ConditionalModel> baseline_group_;
  std::unique_ptr<ConditionalModel> other_group_;
};

/// Builds FitData for `target` given `parents` from `rows` of `data`, sorting
/// rows lexicographically by (parents, target) so the result does not depend
/// on input row order.
FitData make_fit_data(const Dataset& data, const std::string& target,
                      const std::vector<std::string>& parents, const std::vector<std::size_t>& rows);

}  // namespace fairadapt
