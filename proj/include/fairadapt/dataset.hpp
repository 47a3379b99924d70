#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fairadapt {

enum class ColumnKind { Numeric, Ordered, Categorical };

std::string to_string(ColumnKind kind);
ColumnKind parse_column_kind(const std::string& text);

/// One named column. Values are stored as doubles; when `levels` is non-empty
/// the values are integer codes into it (level order is the column's total
/// order, used for quantiles of discrete targets).
struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  std::vector<double> values;
  std::vector<std::string> levels;

  bool has_labels() const noexcept { return !levels.empty(); }
  bool is_discrete() const noexcept { return kind != ColumnKind::Numeric; }
  std::string format(std::size_t row) const;
  /// Code or numeric value for a cell's text; throws Error(Level/Parse).
  double encode(const std::string& text) const;
};

/// Column table with optional roles. Every column has `n_rows` values and no
/// missing cells. Once a protected attribute is selected its column has exactly
/// two distinct values, one of which is the baseline.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Column> columns);

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_cols() const noexcept { return columns_.size(); }
  const std::vector<Column>& columns() const noexcept { return columns_; }
  std::vector<std::string> names() const;

  std::optional<std::size_t> find(const std::string& name) const;
  const Column& column(const std::string& name) const;
  Column& column(const std::string& name);
  const Column& column(std::size_t i) const { return columns_[i]; }
  Column& column(std::size_t i) { return columns_[i]; }

  const std::string& protected_attr() const noexcept { return protected_; }
  double baseline() const noexcept { return baseline_; }
  double other_level() const noexcept { return other_; }
  bool has_protected() const noexcept { return !protected_.empty(); }
  bool is_baseline_row(std::size_t row) const;

  /// Rows `ids` in the given order, roles preserved.
  Dataset select_rows(const std::vector<std::size_t>& ids) const;
  /// Row-bind; `tail` must carry the same columns (any order) except that
  /// columns missing from `tail` are rejected.
  Dataset append(const Dataset& tail) const;
  Dataset without_column(const std::string& name) const;
  /// Copy carrying the protected attribute and baseline of `reference`, without
  /// requiring both levels to be present here.
  Dataset with_roles_of(const Dataset& reference) const;

  friend Dataset select_baseline(Dataset ds, const std::string& protected_attr,
                                 const std::optional<std::string>& level);

 private:
  std::vector<Column> columns_;
  std::size_t n_rows_ = 0;
  std::string protected_;
  double baseline_ = 0.0;
  double other_ = 0.0;
};

/// Records the protected column and its baseline level. Without `level` the
/// smallest level in the column's natural order is used. Throws Error(Level)
/// if the column is not binary or `level` is not one of its two levels.
Dataset select_baseline(Dataset ds, const std::string& protected_attr,
                        const std::optional<std::string>& level);

struct ColumnSchema {
  ColumnKind kind = ColumnKind::Numeric;
  std::vector<std::string> levels;
};

/// Explicit column kinds, overriding inference. JSON text, either
/// {"col": "numeric"} or {"col": {"kind": "categorical", "levels": [...]}},
/// optionally wrapped as {"columns": {...}}.
struct Schema {
  std::map<std::string, ColumnSchema> columns;

  static Schema parse(const std::string& json_text);
  static Schema load(const std::string& path);
  static Schema of(const Dataset& ds);
  std::string to_json() const;
};

struct LoadOptions {
  std::optional<Schema> schema;
  /// Integer-valued numeric columns with at most this many distinct values are
  /// loaded as ordered-discrete. 0 disables the rule.
  std::size_t discrete_max_levels = 0;
  /// When set, this column must have exactly two levels.
  std::optional<std::string> protected_attr;
};

Dataset parse_dataset(const std::string& csv_text, const LoadOptions& options = {});
Dataset load_csv(const std::string& path, const LoadOptions& options = {});
std::string to_csv(const Dataset& ds);
void write_csv(const std::string& path, const Dataset& ds);

/// Original and adapted data of identical shape.
struct AdaptedDataset {
  Dataset original;
  Dataset adapted;

  /// changed[c][r] is true where column c, row r differs.
  std::vector<std::vector<bool>> changed_mask() const;
};

/// Paired original/adapted values for selected rows. Output columns are
/// "row" (1-based), then for each requested column "<name>" and, except for the
/// protected attribute, "<name>_adapted". Default column list: protected,
/// outcome, then the remaining columns in data order. Throws Error(Index) for
/// out-of-range rows and Error(Name) for unknown columns.
Dataset fair_twins(const AdaptedDataset& data, const std::string& outcome,
                   const std::vector<std::size_t>& row_ids,
                   const std::vector<std::string>& cols = {});

}  // namespace fairadapt
