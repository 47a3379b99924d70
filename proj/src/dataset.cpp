#include "fairadapt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "fairadapt/csv.hpp"
#include "fairadapt/error.hpp"

namespace fairadapt {

std::string to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::Numeric: return "numeric";
    case ColumnKind::Ordered: return "ordered";
    case ColumnKind::Categorical: return "categorical";
  }
  return "numeric";
}

ColumnKind parse_column_kind(const std::string& text) {
  if (text == "numeric" || text == "continuous") return ColumnKind::Numeric;
  if (text == "ordered" || text == "discrete" || text == "ordinal") return ColumnKind::Ordered;
  if (text == "categorical" || text == "factor") return ColumnKind::Categorical;
  throw Error(ErrorCode::Parse, "unknown column kind '" + text + "'");
}

std::string Column::format(std::size_t row) const {
  const double v = values[row];
  if (has_labels()) return levels.at(static_cast<std::size_t>(v));
  return format_double(v);
}

double Column::encode(const std::string& text) const {
  if (has_labels()) {
    auto it = std::find(levels.begin(), levels.end(), text);
    if (it == levels.end()) {
      throw Error(ErrorCode::Level, "value '" + text + "' is not a level of column " + name);
    }
    return static_cast<double>(it - levels.begin());
  }
  if (auto v = parse_double(text)) return *v;
  throw Error(ErrorCode::Parse, "value '" + text + "' is not numeric in column " + name);
}

Dataset::Dataset(std::vector<Column> columns) : columns_(std::move(columns)) {
  n_rows_ = columns_.empty() ? 0 : columns_.front().values.size();
  std::set<std::string> seen;
  for (const auto& c : columns_) {
    if (!seen.insert(c.name).second) throw Error(ErrorCode::Name, "duplicate column " + c.name);
    if (c.values.size() != n_rows_) {
      throw Error(ErrorCode::SchemaMismatch, "column " + c.name + " has " +
                                                 std::to_string(c.values.size()) + " rows, expected " +
                                                 std::to_string(n_rows_));
    }
  }
}

std::vector<std::string> Dataset::names() const {
  std::vector<std::string> out;
  for (const auto& c : columns_) out.push_back(c.name);
  return out;
}

std::optional<std::size_t> Dataset::find(const std::string& name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].name == name) return i;
  return std::nullopt;
}

const Column& Dataset::column(const std::string& name) const {
  if (auto i = find(name)) return columns_[*i];
  throw Error(ErrorCode::SchemaMismatch, "dataset has no column " + name);
}

Column& Dataset::column(const std::string& name) {
  if (auto i = find(name)) return columns_[*i];
  throw Error(ErrorCode::SchemaMismatch, "dataset has no column " + name);
}

bool Dataset::is_baseline_row(std::size_t row) const {
  return column(protected_).values[row] == baseline_;
}

Dataset Dataset::select_rows(const std::vector<std::size_t>& ids) const {
  Dataset out = *this;
  for (auto& c : out.columns_) {
    std::vector<double> values;
    values.reserve(ids.size());
    for (auto id : ids) {
      if (id >= n_rows_) throw Error(ErrorCode::Index, "row " + std::to_string(id + 1) + " out of range");
      values.push_back(c.values[id]);
    }
    c.values = std::move(values);
  }
  out.n_rows_ = ids.size();
  return out;
}

Dataset Dataset::append(const Dataset& tail) const {
  Dataset out = *this;
  for (auto& c : out.columns_) {
    const Column& t = tail.column(c.name);
    if (t.levels != c.levels) {
      throw Error(ErrorCode::SchemaMismatch, "column " + c.name + " has different levels");
    }
    c.values.insert(c.values.end(), t.values.begin(), t.values.end());
  }
  out.n_rows_ = n_rows_ + tail.n_rows_;
  return out;
}

Dataset Dataset::without_column(const std::string& name) const {
  Dataset out = *this;
  auto i = find(name);
  if (!i) return out;
  out.columns_.erase(out.columns_.begin() + static_cast<std::ptrdiff_t>(*i));
  if (out.columns_.empty()) out.n_rows_ = 0;
  return out;
}

Dataset Dataset::with_roles_of(const Dataset& reference) const {
  Dataset out = *this;
  if (!reference.has_protected()) return out;
  out.column(reference.protected_);
  out.protected_ = reference.protected_;
  out.baseline_ = reference.baseline_;
  out.other_ = reference.other_;
  return out;
}

Dataset select_baseline(Dataset ds, const std::string& protected_attr,
                        const std::optional<std::string>& level) {
  const Column& col = ds.column(protected_attr);
  std::set<double> distinct(col.values.begin(), col.values.end());
  if (distinct.size() != 2) {
    throw Error(ErrorCode::Level, "protected attribute " + protected_attr + " must have exactly 2 levels, found " +
                                      std::to_string(distinct.size()));
  }
  const double lo = *distinct.begin();
  const double hi = *distinct.rbegin();
  double baseline = lo;
  if (level) {
    double wanted = 0.0;
    try {
      wanted = col.encode(*level);
    } catch (const Error&) {
      throw Error(ErrorCode::Level, "baseline '" + *level + "' is not a level of " + protected_attr);
    }
    if (wanted != lo && wanted != hi) {
      throw Error(ErrorCode::Level, "baseline '" + *level + "' is not a level of " + protected_attr);
    }
    baseline = wanted;
  }
  ds.protected_ = protected_attr;
  ds.baseline_ = baseline;
  ds.other_ = baseline == lo ? hi : lo;
  return ds;
}

Schema Schema::parse(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("schema is not valid JSON: ") + e.what());
  }
  if (j.is_object() && j.contains("columns") && j["columns"].is_object()) j = j["columns"];
  if (!j.is_object()) throw Error(ErrorCode::Parse, "schema must be a JSON object");
  Schema schema;
  for (const auto& [name, entry] : j.items()) {
    ColumnSchema cs;
    if (entry.is_string()) {
      cs.kind = parse_column_kind(entry.get<std::string>());
    } else if (entry.is_object() && entry.contains("kind") && entry["kind"].is_string()) {
      cs.kind = parse_column_kind(entry["kind"].get<std::string>());
      if (entry.contains("levels")) {
        if (!entry["levels"].is_array()) throw Error(ErrorCode::Parse, "levels of " + name + " must be an array");
        for (const auto& l : entry["levels"]) {
          cs.levels.push_back(l.is_string() ? l.get<std::string>() : l.dump());
        }
        std::set<std::string> unique(cs.levels.begin(), cs.levels.end());
        if (unique.size() != cs.levels.size()) throw Error(ErrorCode::Parse, "duplicate levels for " + name);
      }
    } else {
      throw Error(ErrorCode::Parse, "schema entry for " + name + " must be a kind string or object");
    }
    if (cs.kind == ColumnKind::Numeric && !cs.levels.empty()) {
      throw Error(ErrorCode::Parse, "numeric column " + name + " cannot declare levels");
    }
    schema.columns[name] = std::move(cs);
  }
  return schema;
}

Schema Schema::load(const std::string& path) { return parse(read_file(path)); }

Schema Schema::of(const Dataset& ds) {
  Schema s;
  for (const auto& c : ds.columns()) s.columns[c.name] = ColumnSchema{c.kind, c.levels};
  return s;
}

std::string Schema::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [name, cs] : columns) {
    nlohmann::ordered_json e;
    e["kind"] = to_string(cs.kind);
    if (!cs.levels.empty()) e["levels"] = cs.levels;
    j[name] = e;
  }
  return j.dump(2);
}

namespace {

bool is_missing(const CsvField& f) {
  return f.text.empty() || (!f.quoted && (f.text == "NA" || f.text == "NaN" || f.text == "nan"));
}

Column build_column(const std::string& name, const std::vector<const CsvField*>& cells,
                    const LoadOptions& options) {
  Column col;
  col.name = name;
  const ColumnSchema* declared = nullptr;
  if (options.schema) {
    auto it = options.schema->columns.find(name);
    if (it != options.schema->columns.end()) declared = &it->second;
  }

  std::vector<std::optional<double>> numbers;
  numbers.reserve(cells.size());
  bool all_numeric = true;
  for (const auto* f : cells) {
    auto v = f->quoted ? std::nullopt : parse_double(f->text);
    if (!v) all_numeric = false;
    numbers.push_back(v);
  }

  auto labelled = [&](ColumnKind kind, std::vector<std::string> levels) {
    col.kind = kind;
    if (levels.empty()) {
      std::set<std::string> distinct;
      for (const auto* f : cells) distinct.insert(f->text);
      levels.assign(distinct.begin(), distinct.end());
    }
    col.levels = std::move(levels);
    col.values.reserve(cells.size());
    for (const auto* f : cells) col.values.push_back(col.encode(f->text));
  };
  auto numeric = [&](ColumnKind kind) {
    col.kind = kind;
    col.values.reserve(cells.size());
    for (std::size_t r = 0; r < cells.size(); ++r) {
      if (!numbers[r]) {
        throw Error(ErrorCode::Parse, "malformed numeric cell '" + cells[r]->text + "' in column " + name +
                                          ", row " + std::to_string(r + 1));
      }
      col.values.push_back(*numbers[r]);
    }
  };

  if (declared) {
    if (declared->kind == ColumnKind::Numeric) {
      numeric(ColumnKind::Numeric);
    } else if (!declared->levels.empty() || !all_numeric || declared->kind == ColumnKind::Categorical) {
      labelled(declared->kind, declared->levels);
    } else {
      numeric(ColumnKind::Ordered);
    }
    return col;
  }

  if (!all_numeric) {
    labelled(ColumnKind::Categorical, {});
    return col;
  }
  numeric(ColumnKind::Numeric);
  if (options.discrete_max_levels > 0) {
    const bool integral = std::all_of(col.values.begin(), col.values.end(),
                                      [](double v) { return std::floor(v) == v; });
    std::set<double> distinct(col.values.begin(), col.values.end());
    if (integral && distinct.size() <= options.discrete_max_levels) col.kind = ColumnKind::Ordered;
  }
  return col;
}

}  // namespace

Dataset parse_dataset(const std::string& csv_text, const LoadOptions& options) {
  const auto records = parse_csv(csv_text);
  if (records.empty()) throw Error(ErrorCode::Parse, "CSV has no header");
  const auto& header = records.front();
  std::vector<std::string> names;
  for (const auto& f : header) names.push_back(f.text);

  const std::size_t n_rows = records.size() - 1;
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != names.size()) {
      throw Error(ErrorCode::Parse, "row " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                                        " fields, header has " + std::to_string(names.size()));
    }
    for (std::size_t c = 0; c < names.size(); ++c) {
      if (is_missing(records[r][c])) {
        throw Error(ErrorCode::MissingValue, "missing value in column " + names[c] + ", row " + std::to_string(r));
      }
    }
  }

  std::vector<Column> columns;
  for (std::size_t c = 0; c < names.size(); ++c) {
    std::vector<const CsvField*> cells;
    cells.reserve(n_rows);
    for (std::size_t r = 1; r < records.size(); ++r) cells.push_back(&records[r][c]);
    columns.push_back(build_column(names[c], cells, options));
  }
  Dataset ds(std::move(columns));
  if (options.protected_attr) {
    const auto& col = ds.column(*options.protected_attr);
    std::set<double> distinct(col.values.begin(), col.values.end());
    if (distinct.size() != 2) {
      throw Error(ErrorCode::Level, "protected attribute " + *options.protected_attr +
                                        " must have exactly 2 levels, found " + std::to_string(distinct.size()));
    }
  }
  return ds;
}

Dataset load_csv(const std::string& path, const LoadOptions& options) {
  return parse_dataset(read_file(path), options);
}

std::string to_csv(const Dataset& ds) {
  std::string out;
  for (std::size_t c = 0; c < ds.n_cols(); ++c) {
    if (c) out += ',';
    out += csv_escape(ds.column(c).name);
  }
  out += '\n';
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    for (std::size_t c = 0; c < ds.n_cols(); ++c) {
      if (c) out += ',';
      out += csv_escape(ds.column(c).format(r));
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::string& path, const Dataset& ds) { write_file(path, to_csv(ds)); }

std::vector<std::vector<bool>> AdaptedDataset::changed_mask() const {
  std::vector<std::vector<bool>> mask;
  for (std::size_t c = 0; c < original.n_cols(); ++c) {
    const auto& a = original.column(c).values;
    const auto& b = adapted.column(original.column(c).name).values;
    std::vector<bool> m(a.size());
    for (std::size_t r = 0; r < a.size(); ++r) m[r] = a[r] != b[r];
    mask.push_back(std::move(m));
  }
  return mask;
}

Dataset fair_twins(const AdaptedDataset& data, const std::string& outcome,
                   const std::vector<std::size_t>& row_ids, const std::vector<std::string>& cols) {
  const Dataset& orig = data.original;
  const std::string& prot = orig.protected_attr();
  for (auto id : row_ids) {
    if (id >= orig.n_rows()) {
      throw Error(ErrorCode::Index, "row id " + std::to_string(id + 1) + " out of range (1.." +
                                        std::to_string(orig.n_rows()) + ")");
    }
  }
  std::vector<std::string> wanted = cols;
  if (wanted.empty()) {
    if (!prot.empty()) wanted.push_back(prot);
    if (orig.find(outcome) && outcome != prot) wanted.push_back(outcome);
    for (const auto& n : orig.names())
      if (n != prot && n != outcome) wanted.push_back(n);
  }

  std::vector<Column> out;
  Column row_col;
  row_col.name = "row";
  for (auto id : row_ids) row_col.values.push_back(static_cast<double>(id + 1));
  out.push_back(std::move(row_col));

  auto pick = [&](const Column& src, std::string name) {
    Column c = src;
    c.name = std::move(name);
    c.values.clear();
    for (auto id : row_ids) c.values.push_back(src.values[id]);
    return c;
  };
  for (const auto& name : wanted) {
    if (!orig.find(name)) throw Error(ErrorCode::Name, "unknown column " + name);
    out.push_back(pick(orig.column(name), name));
    if (name != prot) out.push_back(pick(data.adapted.column(name), name + "_adapted"));
  }
  return Dataset(std::move(out));
}

}  // namespace fairadapt
