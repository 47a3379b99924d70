#include "fairadapt/adaptation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>

#include "fairadapt/error.hpp"
#include "fairadapt/parallel.hpp"
#include "fairadapt/random.hpp"

namespace fairadapt {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

void require_same_levels(const Dataset& reference, const Dataset& other) {
  for (const auto& c : other.columns()) {
    const auto& ref = reference.column(c.name);
    if (ref.levels != c.levels || ref.kind != c.kind) {
      throw Error(ErrorCode::SchemaMismatch, "column " + c.name + " does not match the training schema");
    }
  }
}

// Content hash of a row over the graph variables present in `ds`; keys the
// randomized-quantile stream so results do not depend on row position.
std::vector<std::uint64_t> row_keys(const Dataset& ds, const CausalGraph& g) {
  std::vector<const Column*> cols;
  for (const auto& v : g.variables())
    if (auto i = ds.find(v)) cols.push_back(&ds.column(*i));
  std::vector<std::uint64_t> keys(ds.n_rows());
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    std::uint64_t h = 0x243f6a8885a308d3ULL;
    for (const Column* c : cols) h = mix64(h ^ hash_string(c->name) ^ std::bit_cast<std::uint64_t>(c->values[r]));
    keys[r] = h;
  }
  return keys;
}

std::vector<std::string> model_parents(const CausalGraph& g, const AdaptSpec& spec, std::size_t v) {
  std::vector<std::string> parents;
  const bool restrict = g.variables()[v] == g.outcome() && !spec.formula.predictors.empty();
  for (auto p : g.extended_parents(v)) {
    const auto& name = g.variables()[p];
    if (restrict && name != g.protected_attr() && !contains(spec.formula.predictors, name)) continue;
    parents.push_back(name);
  }
  return parents;
}

Dataset apply_models(const CausalGraph& g, const std::vector<std::string>& order,
                     const std::map<std::string, QuantileModel>& models, const Dataset& original,
                     std::uint64_t seed) {
  const std::string& prot = original.protected_attr();
  Dataset adapted = original;
  Dataset counterfactual = original;
  for (auto& v : counterfactual.column(prot).values) v = original.baseline();

  const auto keys = row_keys(original, g);
  std::vector<bool> baseline_row(original.n_rows());
  for (std::size_t r = 0; r < original.n_rows(); ++r) baseline_row[r] = original.is_baseline_row(r);

  for (const auto& name : order) {
    if (!original.find(name)) {
      if (name == g.outcome()) continue;
      throw Error(ErrorCode::SchemaMismatch, "data has no column " + name);
    }
    auto it = models.find(name);
    if (it == models.end()) throw Error(ErrorCode::ModelMissing, "no fitted model for " + name);
    const QuantileModel& model = it->second;

    std::vector<const Column*> factual_parents;
    std::vector<const Column*> cf_parents;
    for (const auto& p : model.parents()) {
      if (!original.find(p)) throw Error(ErrorCode::SchemaMismatch, "data lacks column " + p + " needed by " + name);
      factual_parents.push_back(&original.column(p));
      cf_parents.push_back(&counterfactual.column(p));
    }
    const auto& values = original.column(name).values;
    auto& out = adapted.column(name).values;
    const std::uint64_t stream = derive_seed(seed, hash_string(name));

    parallel_for(original.n_rows(), [&](std::size_t r) {
      if (baseline_row[r]) return;
      std::vector<double> x(factual_parents.size());
      std::vector<double> x_cf(cf_parents.size());
      for (std::size_t k = 0; k < x.size(); ++k) {
        x[k] = factual_parents[k]->values[r];
        x_cf[k] = cf_parents[k]->values[r];
      }
      const double jitter = model.discrete() ? unit_double(derive_seed(stream, keys[r])) : 0.0;
      const double u = model.quantile_of(values[r], x, jitter);
      out[r] = model.inverse_quantile(u, x_cf);
    });
    counterfactual.column(name).values = out;
  }
  return adapted;
}

}  // namespace

Formula Formula::parse(const std::string& text) {
  const auto tilde = text.find('~');
  if (tilde == std::string::npos) {
    const auto outcome = trim(text);
    if (outcome.empty()) throw Error(ErrorCode::Usage, "empty formula");
    return {outcome, {}};
  }
  Formula f;
  f.outcome = trim(text.substr(0, tilde));
  if (f.outcome.empty()) throw Error(ErrorCode::Usage, "formula has no outcome: " + text);
  const auto rhs = trim(text.substr(tilde + 1));
  if (rhs.empty()) throw Error(ErrorCode::Usage, "formula has no right-hand side: " + text);
  if (rhs == ".") return f;
  std::size_t start = 0;
  while (true) {
    const auto plus = rhs.find('+', start);
    const auto term = trim(rhs.substr(start, plus == std::string::npos ? std::string::npos : plus - start));
    if (term.empty() || term == ".") throw Error(ErrorCode::Usage, "malformed formula term in: " + text);
    f.predictors.push_back(term);
    if (plus == std::string::npos) break;
    start = plus + 1;
  }
  return f;
}

std::string Formula::to_string() const {
  std::string s = outcome + " ~ ";
  if (predictors.empty()) return s + ".";
  for (std::size_t i = 0; i < predictors.size(); ++i) s += (i ? " + " : "") + predictors[i];
  return s;
}

CausalGraph AdaptSpec::build_graph() const {
  if (const auto* top = std::get_if<TopOrderMode>(&mode)) {
    return CausalGraph::from_ordering(top->ordering, protected_attr, formula.outcome, resolving);
  }
  const auto& gm = std::get<GraphMode>(mode);
  BoolMatrix cfd;
  if (gm.confounding) {
    if (gm.confounding->names != gm.adjacency.names) {
      throw Error(ErrorCode::SchemaMismatch, "confounding matrix names must match the adjacency matrix");
    }
    cfd = gm.confounding->cells;
  }
  return CausalGraph::build(gm.adjacency.names, gm.adjacency.cells, cfd, protected_attr, formula.outcome, resolving);
}

std::vector<std::string> AdaptationResult::levels() const {
  const Column& c = train.original.column(train.original.protected_attr());
  const double lo = std::min(train.original.baseline(), train.original.other_level());
  const double hi = std::max(train.original.baseline(), train.original.other_level());
  Column probe = c;
  probe.values = {lo, hi};
  return {probe.format(0), probe.format(1)};
}

AdaptationResult adapt(const Dataset& train, const std::optional<Dataset>& test, const AdaptSpec& spec) {
  spec.backend.validate();
  CausalGraph graph = spec.build_graph();

  {
    const auto& vars = graph.variables();
    std::set<std::string> want(vars.begin(), vars.end());
    const auto names = train.names();
    std::set<std::string> have(names.begin(), names.end());
    if (want != have) {
      throw Error(ErrorCode::SchemaMismatch, "training columns must match the graph variables exactly");
    }
  }
  for (const auto& p : spec.formula.predictors) {
    if (!graph.find(p)) throw Error(ErrorCode::Name, "formula names unknown variable " + p);
  }
  require_identifiable(graph);

  const Dataset train_r = select_baseline(train, spec.protected_attr, spec.baseline);
  std::optional<Dataset> test_r;
  bool test_has_outcome = true;
  if (test) {
    for (const auto& v : graph.variables()) {
      if (!test->find(v) && v != graph.outcome()) {
        throw Error(ErrorCode::SchemaMismatch, "test data lacks column " + v);
      }
    }
    if (test->n_cols() > graph.size() - (test->find(graph.outcome()) ? 0 : 1)) {
      throw Error(ErrorCode::SchemaMismatch, "test data has columns outside the graph");
    }
    test_has_outcome = test->find(graph.outcome()).has_value();
    require_same_levels(train_r, *test);
    test_r = test->with_roles_of(train_r);
  }

  Dataset pooled = train_r;
  if (test_r) pooled = (test_has_outcome ? train_r : train_r.without_column(graph.outcome())).append(*test_r);

  AdaptationResult result{spec, graph, Schema::of(train_r), {}, std::nullopt, {}, {}, 0.0, 0.0, std::nullopt,
                          std::nullopt};

  const std::size_t prot = graph.index(spec.protected_attr);
  const auto de = graph.descendants(prot);
  for (auto v : graph.order()) {
    if (std::binary_search(de.begin(), de.end(), v) && !graph.is_resolving(v)) {
      result.adapt_order.push_back(graph.variables()[v]);
    }
  }

  const bool attr_is_root = graph.parents(prot).empty();
  for (const auto& name : result.adapt_order) {
    const bool train_only = name == graph.outcome() && !test_has_outcome;
    const Dataset& data = train_only ? train_r : pooled;
    FitOptions options;
    options.protected_attr = spec.protected_attr;
    options.attr_is_root = attr_is_root;
    options.baseline_mask.resize(data.n_rows());
    for (std::size_t r = 0; r < data.n_rows(); ++r) options.baseline_mask[r] = data.is_baseline_row(r);
    options.seed = derive_seed(spec.seed, hash_string(name));
    result.models.emplace(name, QuantileModel::fit(data, name, model_parents(graph, spec, graph.index(name)),
                                                   spec.backend, options));
  }

  result.train = {train_r, apply_models(graph, result.adapt_order, result.models, train_r, spec.seed)};
  const auto& outcome = graph.outcome();
  result.tv_before = total_variation(result.train.original, outcome, spec.protected_attr, train_r.baseline());
  result.tv_after = total_variation(result.train.adapted, outcome, spec.protected_attr, train_r.baseline());
  if (test_r) {
    result.test = AdaptedDataset{*test_r, apply_models(graph, result.adapt_order, result.models, *test_r, spec.seed)};
    if (test_has_outcome) {
      try {
        result.tv_before_test = total_variation(result.test->original, outcome, spec.protected_attr, train_r.baseline());
        result.tv_after_test = total_variation(result.test->adapted, outcome, spec.protected_attr, train_r.baseline());
      } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyGroup) throw;
      }
    }
  }
  return result;
}

AdaptedDataset predict(const AdaptationResult& result, const Dataset& newdata) {
  const auto& g = result.graph;
  for (const auto& v : g.variables()) {
    if (!newdata.find(v) && v != g.outcome()) throw Error(ErrorCode::SchemaMismatch, "new data lacks column " + v);
  }
  for (const auto& name : newdata.names()) {
    if (!g.find(name)) throw Error(ErrorCode::SchemaMismatch, "new data has unknown column " + name);
  }
  require_same_levels(result.train.original, newdata);
  const Dataset data = newdata.with_roles_of(result.train.original);
  return {data, apply_models(g, result.adapt_order, result.models, data, result.spec.seed)};
}

double total_variation(const Dataset& ds, const std::string& outcome, const std::string& protected_attr,
                       double baseline) {
  const Column& y = ds.column(outcome);
  if (y.has_labels() && y.levels.size() != 2) {
    throw Error(ErrorCode::NonNumericOutcome, "outcome " + outcome + " is neither numeric nor binary");
  }
  const Column& a = ds.column(protected_attr);
  double sum_base = 0.0, sum_other = 0.0;
  std::size_t n_base = 0, n_other = 0;
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    if (a.values[r] == baseline) {
      sum_base += y.values[r];
      ++n_base;
    } else {
      sum_other += y.values[r];
      ++n_other;
    }
  }
  if (n_base == 0 || n_other == 0) {
    throw Error(ErrorCode::EmptyGroup, "a protected group has no rows");
  }
  return sum_base / static_cast<double>(n_base) - sum_other / static_cast<double>(n_other);
}

namespace {

double silverman(std::vector<double> v) {
  const auto n = static_cast<double>(v.size());
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double pos = p * (n - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  const double iqr = (q(0.75) - q(0.25)) / 1.34;
  double spread = std::min(sd, iqr);
  if (!(spread > 0.0)) spread = std::max(sd, iqr);
  return 0.9 * spread * std::pow(n, -0.2);
}

}  // namespace

Dataset density_table(const Dataset& ds, const std::string& outcome) {
  constexpr std::size_t kPoints = 64;
  const Column& y = ds.column(outcome);
  const Column& a = ds.column(ds.protected_attr());
  const double levels[2] = {ds.baseline(), ds.other_level()};

  std::vector<double> groups[2];
  for (std::size_t r = 0; r < ds.n_rows(); ++r) groups[a.values[r] == levels[0] ? 0 : 1].push_back(y.values[r]);

  Column group_col = a;
  group_col.name = "group";
  group_col.values.clear();
  Column x_col{"x", ColumnKind::Numeric, {}, {}};
  Column d_col{"density", ColumnKind::Numeric, {}, {}};

  const auto [mn, mx] = std::minmax_element(y.values.begin(), y.values.end());
  if (y.values.empty() || *mn == *mx) {
    for (int g = 0; g < 2; ++g) {
      group_col.values.push_back(levels[g]);
      x_col.values.push_back(y.values.empty() ? 0.0 : *mn);
      d_col.values.push_back(1.0);
    }
    return Dataset({group_col, x_col, d_col});
  }

  const double pooled_h = silverman(y.values);
  double h[2];
  for (int g = 0; g < 2; ++g) {
    h[g] = silverman(groups[g]);
    if (!(h[g] > 0.0)) h[g] = pooled_h;
  }
  const double pad = 3.0 * std::max(h[0], h[1]);
  const double lo = *mn - pad;
  const double hi = *mx + pad;
  const double inv_sqrt_2pi = 0.3989422804014327;
  for (int g = 0; g < 2; ++g) {
    for (std::size_t k = 0; k < kPoints; ++k) {
      const double x = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(kPoints - 1);
      double dens = 0.0;
      for (double v : groups[g]) {
        const double z = (x - v) / h[g];
        dens += std::exp(-0.5 * z * z);
      }
      if (!groups[g].empty()) dens *= inv_sqrt_2pi / (h[g] * static_cast<double>(groups[g].size()));
      group_col.values.push_back(levels[g]);
      x_col.values.push_back(x);
      d_col.values.push_back(dens);
    }
  }
  return Dataset({group_col, x_col, d_col});
}

Dataset density_summary(const AdaptationResult& result, When when) {
  const Dataset& ds = when == When::Before ? result.train.original : result.train.adapted;
  return density_table(ds, result.graph.outcome());
}

Dataset fair_twins(const AdaptationResult& result, const std::vector<std::size_t>& row_ids,
                   const std::vector<std::string>& cols) {
  return fair_twins(result.train, result.graph.outcome(), row_ids, cols);
}

}  // namespace fairadapt
