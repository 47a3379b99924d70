#include "fairadapt/linear_quantile.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "fairadapt/error.hpp"
#include "fairadapt/parallel.hpp"

namespace fairadapt {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::VectorXd solve_weighted(const Eigen::Ref<const RowMatrix>& x, const Eigen::VectorXd& w,
                               const Eigen::VectorXd& y) {
  const Eigen::Index d = x.cols();
  Eigen::MatrixXd a = x.transpose() * w.asDiagonal() * x;
  Eigen::VectorXd b = x.transpose() * w.cwiseProduct(y);
  const double ridge = 1e-12 * std::max(1.0, a.trace() / static_cast<double>(d));
  a.diagonal().array() += ridge;
  return a.ldlt().solve(b);
}

}  // namespace

std::vector<double> fit_pinball_irls(const std::vector<double>& design, std::size_t d,
                                     const std::vector<double>& y, double tau, double smoothing,
                                     std::size_t max_iterations) {
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::Map<const RowMatrix> x(design.data(), n, static_cast<Eigen::Index>(d));
  Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  Eigen::VectorXd target = yv;

  Eigen::VectorXd beta = solve_weighted(x, Eigen::VectorXd::Ones(n), target);
  Eigen::VectorXd w(n);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd r = target - x * beta;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double side = r[i] >= 0.0 ? tau : 1.0 - tau;
      w[i] = side / std::max(std::abs(r[i]), smoothing);
    }
    const Eigen::VectorXd next = solve_weighted(x, w, target);
    const double step = (next - beta).cwiseAbs().maxCoeff();
    const double scale = 1.0 + next.cwiseAbs().maxCoeff();
    beta = next;
    if (step <= 1e-10 * scale) break;
  }
  return std::vector<double>(beta.data(), beta.data() + beta.size());
}

std::unique_ptr<LinearQuantileModel> LinearQuantileModel::fit(const FitData& data, const LinearConfig& config) {
  const std::size_t n = data.n_rows();
  if (n == 0) throw Error(ErrorCode::Degenerate, "cannot fit quantile regression on zero rows");
  auto model = std::make_unique<LinearQuantileModel>();
  model->info_ = data.info;
  model->discrete_ = data.discrete_target;
  model->taus_ = config.grid();

  model->support_ = data.target;
  std::sort(model->support_.begin(), model->support_.end());
  model->support_.erase(std::unique(model->support_.begin(), model->support_.end()), model->support_.end());

  // Expanded design: which raw predictor and (for dummies) which level each
  // column encodes; standardisation of numeric columns for conditioning.
  struct DesignColumn {
    std::size_t predictor;
    std::size_t level;  // 0 for numeric
    double mean;
    double sd;
  };
  std::vector<DesignColumn> full;
  for (std::size_t j = 0; j < data.predictors.size(); ++j) {
    const auto& col = data.predictors[j];
    if (data.info[j].categorical) {
      for (std::size_t l = 1; l < data.info[j].n_levels; ++l) full.push_back({j, l, 0.0, 1.0});
    } else {
      double mean = 0.0;
      for (double v : col) mean += v;
      mean /= static_cast<double>(n);
      double ss = 0.0;
      for (double v : col) ss += (v - mean) * (v - mean);
      full.push_back({j, 0, mean, std::sqrt(ss / static_cast<double>(n))});
    }
  }
  auto value = [&](const DesignColumn& c, std::size_t i) {
    const double raw = data.predictors[c.predictor][i];
    if (data.info[c.predictor].categorical) return raw == static_cast<double>(c.level) ? 1.0 : 0.0;
    return (raw - c.mean) / c.sd;
  };
  std::vector<std::size_t> active;  // indices into `full` that vary
  for (std::size_t c = 0; c < full.size(); ++c) {
    if (!data.info[full[c].predictor].categorical) {
      if (full[c].sd > 0.0) active.push_back(c);
      continue;
    }
    const double first = value(full[c], 0);
    for (std::size_t i = 1; i < n; ++i) {
      if (value(full[c], i) != first) {
        active.push_back(c);
        break;
      }
    }
  }

  const std::size_t d = active.size() + 1;
  std::vector<double> design(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    design[i * d] = 1.0;
    for (std::size_t a = 0; a < active.size(); ++a) design[i * d + a + 1] = value(full[active[a]], i);
  }

  double mean_y = 0.0;
  for (double v : data.target) mean_y += v;
  mean_y /= static_cast<double>(n);
  double ss_y = 0.0;
  for (double v : data.target) ss_y += (v - mean_y) * (v - mean_y);
  const double sd_y = std::sqrt(ss_y / static_cast<double>(n));
  const double floor = config.smoothing * (sd_y > 0.0 ? sd_y : 1.0);

  model->coefs_.assign(model->taus_.size(), std::vector<double>(full.size() + 1, 0.0));
  parallel_for(model->taus_.size(), [&](std::size_t k) {
    const auto beta = fit_pinball_irls(design, d, data.target, model->taus_[k], floor, config.max_iterations);
    auto& coef = model->coefs_[k];
    coef[0] = beta[0];
    for (std::size_t a = 0; a < active.size(); ++a) {
      const auto& c = full[active[a]];
      const double b = beta[a + 1];
      if (data.info[c.predictor].categorical) {
        coef[active[a] + 1] = b;
      } else {
        coef[active[a] + 1] = b / c.sd;
        coef[0] -= b * c.mean / c.sd;
      }
    }
  });
  return model;
}

std::vector<double> LinearQuantileModel::design_row(std::span<const double> predictors) const {
  if (predictors.size() != info_.size()) {
    throw Error(ErrorCode::SchemaMismatch, "linear model expects " + std::to_string(info_.size()) + " predictors");
  }
  std::vector<double> row{1.0};
  for (std::size_t j = 0; j < info_.size(); ++j) {
    if (info_[j].categorical) {
      for (std::size_t l = 1; l < info_[j].n_levels; ++l) row.push_back(predictors[j] == static_cast<double>(l) ? 1.0 : 0.0);
    } else {
      row.push_back(predictors[j]);
    }
  }
  return row;
}

std::vector<double> LinearQuantileModel::predict(std::span<const double> predictors) const {
  const auto row = design_row(predictors);
  std::vector<double> q(taus_.size());
  for (std::size_t k = 0; k < taus_.size(); ++k) {
    double s = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) s += coefs_[k][c] * row[c];
    q[k] = s;
  }
  return q;
}

ConditionalDistribution LinearQuantileModel::distribution(std::span<const double> predictors) const {
  if (support_.size() == 1) return ConditionalDistribution::continuous(support_, {1.0});
  auto q = predict(predictors);
  std::sort(q.begin(), q.end());
  const std::size_t k = q.size();
  std::vector<double> x;
  std::vector<double> p;
  x.reserve(k + 2);
  p.reserve(k + 2);
  const double lo_slope = k > 1 ? (q[1] - q[0]) / (taus_[1] - taus_[0]) : 0.0;
  const double hi_slope = k > 1 ? (q[k - 1] - q[k - 2]) / (taus_[k - 1] - taus_[k - 2]) : 0.0;
  x.push_back(q[0] - taus_[0] * lo_slope);
  p.push_back(0.0);
  for (std::size_t i = 0; i < k; ++i) {
    x.push_back(q[i]);
    p.push_back(taus_[i]);
  }
  x.push_back(q[k - 1] + (1.0 - taus_[k - 1]) * hi_slope);
  p.push_back(1.0);
  auto continuous = ConditionalDistribution::continuous(std::move(x), std::move(p));
  if (!discrete_) return continuous;

  std::vector<double> cum(support_.size());
  for (std::size_t j = 0; j + 1 < support_.size(); ++j) {
    cum[j] = continuous.cdf(support_[j] + (support_[j + 1] - support_[j]) / 2.0);
  }
  cum.back() = 1.0;
  return ConditionalDistribution::discrete(support_, std::move(cum));
}

void LinearQuantileModel::save(BinaryWriter& out) const {
  out.u64(info_.size());
  for (const auto& i : info_) {
    out.str(i.name);
    out.u8(i.categorical ? 1 : 0);
    out.u64(i.n_levels);
  }
  out.u8(discrete_ ? 1 : 0);
  out.f64s(support_);
  out.f64s(taus_);
  for (const auto& c : coefs_) out.f64s(c);
}

std::unique_ptr<LinearQuantileModel> LinearQuantileModel::load(BinaryReader& in) {
  auto model = std::make_unique<LinearQuantileModel>();
  const auto p = in.u64();
  std::size_t width = 1;
  for (std::uint64_t k = 0; k < p; ++k) {
    PredictorInfo info;
    info.name = in.str();
    info.categorical = in.u8() != 0;
    info.n_levels = in.u64();
    width += info.categorical ? (info.n_levels > 0 ? info.n_levels - 1 : 0) : 1;
    model->info_.push_back(std::move(info));
  }
  model->discrete_ = in.u8() != 0;
  model->support_ = in.f64s();
  model->taus_ = in.f64s();
  if (model->taus_.empty() || model->support_.empty()) throw Error(ErrorCode::Format, "corrupt linear model");
  for (std::size_t k = 0; k < model->taus_.size(); ++k) {
    model->coefs_.push_back(in.f64s());
    if (model->coefs_.back().size() != width) throw Error(ErrorCode::Format, "corrupt linear model coefficients");
  }
  return model;
}

std::unique_ptr<ConditionalModel> LinearBackend::fit(const FitData& data, const BackendConfig& config,
                                                     std::uint64_t) const {
  return LinearQuantileModel::fit(data, config.linear);
}

std::unique_ptr<ConditionalModel> LinearBackend::load(BinaryReader& in) const {
  return LinearQuantileModel::load(in);
}

}  // namespace fairadapt
