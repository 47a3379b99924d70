#pragma once

#include <memory>
#include <span>
#include <vector>

#include "fairadapt/quantile.hpp"

namespace fairadapt {

/// Linear quantile regression on a fixed tau grid.
///
/// Each tau is fitted separately by iteratively reweighted least squares on
/// the pinball loss, with residuals floored at `smoothing * sd(target)`.
/// Categorical predictors enter as treatment-coded dummies. Predicted
/// quantiles are sorted per query (monotone rearrangement) and joined into a
/// piecewise-linear CDF, extended linearly to probability 0 and 1 beyond the
/// outermost taus. For discrete targets the CDF is read off at midpoints
/// between consecutive training support values.
class LinearQuantileModel final : public DistributionModel {
 public:
  static std::unique_ptr<LinearQuantileModel> fit(const FitData& data, const LinearConfig& config);

  ConditionalDistribution distribution(std::span<const double> predictors) const override;
  void save(BinaryWriter& out) const override;
  static std::unique_ptr<LinearQuantileModel> load(BinaryReader& in);

  const std::vector<double>& taus() const noexcept { return taus_; }
  /// Coefficients for tau index k in original units: intercept first, then one
  /// entry per numeric predictor, then one per non-reference level of each
  /// categorical predictor.
  const std::vector<double>& coefficients(std::size_t k) const { return coefs_[k]; }
  /// Raw per-tau predictions before rearrangement.
  std::vector<double> predict(std::span<const double> predictors) const;

 private:
  std::vector<double> design_row(std::span<const double> predictors) const;

  std::vector<PredictorInfo> info_;
  bool discrete_ = false;
  std::vector<double> support_;
  std::vector<double> taus_;
  std::vector<std::vector<double>> coefs_;
};

class LinearBackend final : public QuantileBackend {
 public:
  std::string name() const override { return "linear"; }
  std::unique_ptr<ConditionalModel> fit(const FitData& data, const BackendConfig& config,
                                        std::uint64_t seed) const override;
  std::unique_ptr<ConditionalModel> load(BinaryReader& in) const override;
};

/// Minimises sum_i w_i * rho_tau(y_i - x_i' beta) by IRLS. `design` is
/// row-major n x d. Exposed for tests.
std::vector<double> fit_pinball_irls(const std::vector<double>& design, std::size_t d,
                                     const std::vector<double>& y, double tau, double smoothing,
                                     std::size_t max_iterations);

}  // namespace fairadapt
