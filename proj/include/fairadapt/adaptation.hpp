#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fairadapt/dataset.hpp"
#include "fairadapt/graph.hpp"
#include "fairadapt/quantile.hpp"

namespace fairadapt {

inline constexpr std::uint64_t kDefaultSeed = 2022;

/// "y ~ ." or "y ~ a + b". The right-hand side limits which variables the
/// outcome's own model may condition on; the protected attribute is always
/// kept. An empty predictor list means every variable.
struct Formula {
  std::string outcome;
  std::vector<std::string> predictors;

  static Formula parse(const std::string& text);
  std::string to_string() const;
};

/// Causal structure given as adjacency (+ optional confounding) matrices.
struct GraphMode {
  NamedMatrix adjacency;
  std::optional<NamedMatrix> confounding;
};

/// Causal structure given only as a topological ordering of all variables;
/// every earlier variable counts as a parent of every later one.
struct TopOrderMode {
  std::vector<std::string> ordering;
};

struct AdaptSpec {
  Formula formula;
  std::string protected_attr;
  std::optional<std::string> baseline;
  std::vector<std::string> resolving;
  std::variant<GraphMode, TopOrderMode> mode;
  BackendConfig backend;
  std::uint64_t seed = kDefaultSeed;

  bool uses_top_order() const noexcept { return std::holds_alternative<TopOrderMode>(mode); }
  /// Validated graph with roles; throws the graph_core errors.
  CausalGraph build_graph() const;
};

struct AdaptationResult {
  AdaptSpec spec;
  CausalGraph graph;
  Schema schema;
  AdaptedDataset train;
  std::optional<AdaptedDataset> test;
  /// Adapted variables in processing (topological) order.
  std::vector<std::string> adapt_order;
  std::map<std::string, QuantileModel> models;
  double tv_before = 0.0;
  double tv_after = 0.0;
  std::optional<double> tv_before_test;
  std::optional<double> tv_after_test;

  std::vector<std::string> levels() const;
};

/// Fair data adaptation. The protected attribute is set to its baseline for
/// everyone; each descendant that is not resolving is visited in topological
/// order, its conditional distribution given its extended parents is learned,
/// each row's latent quantile is inferred, and the value is re-drawn at that
/// quantile under the counterfactual parents (baseline protected level,
/// already adapted ancestors, natural values elsewhere).
///
/// When `test` is given, models are fitted on train and test rows together
/// and both are adapted. The identifiability gate runs before any fitting.
/// Throws Error(NotIdentifiable), Error(SchemaMismatch), Error(Level) and the
/// graph construction errors.
AdaptationResult adapt(const Dataset& train, const std::optional<Dataset>& test, const AdaptSpec& spec);

/// Adapts new rows with the stored models. The outcome column may be absent.
/// Throws Error(SchemaMismatch) for missing columns or mismatched levels and
/// Error(ModelMissing) if a variable to adapt has no model.
AdaptedDataset predict(const AdaptationResult& result, const Dataset& newdata);

/// mean(outcome | protected = baseline) - mean(outcome | protected = other).
/// Throws Error(EmptyGroup) and Error(NonNumericOutcome).
double total_variation(const Dataset& ds, const std::string& outcome, const std::string& protected_attr,
                       double baseline);

enum class When { Before, After };

/// Gaussian kernel density of the outcome per protected group on a shared
/// 64-point grid (Silverman bandwidth per group). Columns: group, x, density.
/// A constant outcome yields one row per group at that value with density 1.
Dataset density_summary(const AdaptationResult& result, When when);

/// Same as density_summary, for an arbitrary dataset with roles set.
Dataset density_table(const Dataset& ds, const std::string& outcome);

/// fair_twins on the training data of a result. Row ids are 0-based.
Dataset fair_twins(const AdaptationResult& result, const std::vector<std::size_t>& row_ids,
                   const std::vector<std::string>& cols = {});

}  // namespace fairadapt
