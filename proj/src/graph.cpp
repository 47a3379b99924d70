#include "fairadapt/graph.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "fairadapt/csv.hpp"
#include "fairadapt/error.hpp"

namespace fairadapt {

bool BoolMatrix::any() const {
  return std::any_of(cells_.begin(), cells_.end(), [](std::uint8_t c) { return c != 0; });
}

namespace {

std::vector<std::size_t> kahn_order(const BoolMatrix& directed) {
  const std::size_t n = directed.size();
  std::vector<std::size_t> in_degree(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (directed(i, j)) ++in_degree[j];

  // min-heap on index keeps incomparable nodes in input order
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (in_degree[i] == 0) ready.push(i);

  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    const std::size_t v = ready.top();
    ready.pop();
    order.push_back(v);
    for (std::size_t j = 0; j < n; ++j) {
      if (directed(v, j) && --in_degree[j] == 0) ready.push(j);
    }
  }
  return order;
}

std::vector<std::size_t> component_labels(const BoolMatrix& bidirected) {
  const std::size_t n = bidirected.size();
  std::vector<std::size_t> label(n, n);
  std::size_t next = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (label[s] != n) continue;
    std::vector<std::size_t> stack{s};
    label[s] = next;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t w = 0; w < n; ++w) {
        if (bidirected(v, w) && label[w] == n) {
          label[w] = next;
          stack.push_back(w);
        }
      }
    }
    ++next;
  }
  return label;
}

std::vector<std::size_t> reach(const BoolMatrix& directed, std::size_t start, bool forward) {
  const std::size_t n = directed.size();
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{start};
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    for (std::size_t w = 0; w < n; ++w) {
      const bool edge = forward ? directed(v, w) : directed(w, v);
      if (edge && !seen[w]) {
        seen[w] = true;
        stack.push_back(w);
      }
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < n; ++v)
    if (seen[v] && v != start) out.push_back(v);
  return out;
}

std::vector<std::string> names_of(const CausalGraph& g, const std::vector<std::size_t>& ids) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(g.variables()[id]);
  return out;
}

std::string dot_id(const std::string& name) {
  std::string out = "\"";
  for (char c : name) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

CausalGraph CausalGraph::build(std::vector<std::string> variables, BoolMatrix directed,
                               BoolMatrix bidirected, std::string protected_attr,
                               std::string outcome, std::vector<std::string> resolving) {
  const std::size_t n = variables.size();
  if (n == 0) throw Error(ErrorCode::Name, "graph has no variables");
  {
    std::set<std::string> unique;
    for (const auto& v : variables) {
      if (v.empty()) throw Error(ErrorCode::Name, "empty variable name");
      if (!unique.insert(v).second) throw Error(ErrorCode::Name, "duplicate variable " + v);
    }
  }
  if (directed.size() != n) {
    throw Error(ErrorCode::SchemaMismatch, "adjacency matrix dimension does not match variables");
  }
  if (bidirected.size() == 0) bidirected = BoolMatrix(n);
  if (bidirected.size() != n) {
    throw Error(ErrorCode::SchemaMismatch, "confounding matrix dimension does not match variables");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (directed(i, i)) throw Error(ErrorCode::Cycle, "self loop on " + variables[i]);
    if (bidirected(i, i)) {
      throw Error(ErrorCode::Asymmetry, "confounding matrix has nonzero diagonal at " + variables[i]);
    }
    for (std::size_t j = i + 1; j < n; ++j) {
      if (bidirected(i, j) != bidirected(j, i)) {
        throw Error(ErrorCode::Asymmetry,
                    "confounding matrix not symmetric at (" + variables[i] + ", " + variables[j] + ")");
      }
    }
  }

  CausalGraph g;
  g.variables_ = std::move(variables);
  g.directed_ = std::move(directed);
  g.bidirected_ = std::move(bidirected);
  g.order_ = kahn_order(g.directed_);
  if (g.order_.size() != n) throw Error(ErrorCode::Cycle, "directed graph contains a cycle");
  g.component_ = component_labels(g.bidirected_);

  const std::size_t prot = g.index(protected_attr);
  g.index(outcome);
  g.protected_ = std::move(protected_attr);
  g.outcome_ = std::move(outcome);

  const auto de = g.descendants(prot);
  std::sort(resolving.begin(), resolving.end(),
            [&](const std::string& a, const std::string& b) { return g.index(a) < g.index(b); });
  resolving.erase(std::unique(resolving.begin(), resolving.end()), resolving.end());
  for (const auto& r : resolving) {
    const std::size_t id = g.index(r);
    if (!std::binary_search(de.begin(), de.end(), id)) {
      throw Error(ErrorCode::Resolving,
                  "resolving variable " + r + " is not a descendant of " + g.protected_);
    }
  }
  g.resolving_ = std::move(resolving);
  return g;
}

CausalGraph CausalGraph::from_ordering(std::vector<std::string> ordering, std::string protected_attr,
                                       std::string outcome, std::vector<std::string> resolving) {
  BoolMatrix directed(ordering.size());
  for (std::size_t i = 0; i < ordering.size(); ++i)
    for (std::size_t j = i + 1; j < ordering.size(); ++j) directed.set(i, j);
  return build(std::move(ordering), std::move(directed), BoolMatrix(), std::move(protected_attr),
               std::move(outcome), std::move(resolving));
}

CausalGraph CausalGraph::with_resolving(std::vector<std::string> resolving) const {
  return build(variables_, directed_, bidirected_, protected_, outcome_, std::move(resolving));
}

std::optional<std::size_t> CausalGraph::find(const std::string& name) const {
  auto it = std::find(variables_.begin(), variables_.end(), name);
  if (it == variables_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - variables_.begin());
}

std::size_t CausalGraph::index(const std::string& name) const {
  if (auto id = find(name)) return *id;
  throw Error(ErrorCode::Name, "unknown variable " + name);
}

bool CausalGraph::is_resolving(std::size_t v) const {
  return std::find(resolving_.begin(), resolving_.end(), variables_[v]) != resolving_.end();
}

std::vector<std::size_t> CausalGraph::parents(std::size_t v) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (directed_(i, v)) out.push_back(i);
  return out;
}

std::vector<std::size_t> CausalGraph::children(std::size_t v) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < size(); ++j)
    if (directed_(v, j)) out.push_back(j);
  return out;
}

std::vector<std::size_t> CausalGraph::ancestors(std::size_t v) const {
  return reach(directed_, v, false);
}

std::vector<std::size_t> CausalGraph::descendants(std::size_t v) const {
  return reach(directed_, v, true);
}

std::vector<std::size_t> CausalGraph::component_of(std::size_t v) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (component_[i] == component_[v]) out.push_back(i);
  return out;
}

std::vector<std::size_t> CausalGraph::extended_parents(std::size_t v) const {
  const auto comp = component_of(v);
  std::vector<bool> in_set(size(), false);
  for (auto c : comp) {
    in_set[c] = true;
    for (auto p : parents(c)) in_set[p] = true;
  }
  std::vector<std::size_t> out;
  for (auto a : ancestors(v))
    if (in_set[a]) out.push_back(a);
  return out;
}

std::vector<std::size_t> CausalGraph::order() const { return order_; }

std::vector<std::string> topological_order(const CausalGraph& g) { return names_of(g, g.order()); }

std::vector<std::string> descendants(const CausalGraph& g, const std::string& v) {
  return names_of(g, g.descendants(g.index(v)));
}

std::vector<std::vector<std::string>> c_components(const CausalGraph& g) {
  std::vector<std::vector<std::string>> out;
  std::vector<bool> done(g.size(), false);
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (done[v]) continue;
    auto comp = g.component_of(v);
    for (auto c : comp) done[c] = true;
    out.push_back(names_of(g, comp));
  }
  return out;
}

std::vector<std::string> extended_parents(const CausalGraph& g, const std::string& v) {
  return names_of(g, g.extended_parents(g.index(v)));
}

std::string IdentifiabilityVerdict::reason() const {
  if (identifiable) return "identifiable";
  return "bidirected path between " + from + " and its child " + to;
}

IdentifiabilityVerdict check_identifiable(const CausalGraph& g) {
  std::vector<std::size_t> intervened{g.index(g.protected_attr())};
  for (const auto& r : g.resolving()) intervened.push_back(g.index(r));
  for (auto x : intervened) {
    const auto comp = g.component_of(x);
    for (auto c : g.children(x)) {
      if (std::binary_search(comp.begin(), comp.end(), c)) {
        return {false, g.variables()[x], g.variables()[c]};
      }
    }
  }
  return {};
}

void require_identifiable(const CausalGraph& g) {
  const auto verdict = check_identifiable(g);
  if (!verdict) throw Error(ErrorCode::NotIdentifiable, verdict.reason());
}

std::string export_dot(const CausalGraph& g) {
  std::ostringstream out;
  out << "digraph causal {\n";
  out << "  rankdir=LR;\n";
  for (std::size_t v = 0; v < g.size(); ++v) {
    const auto& name = g.variables()[v];
    std::vector<std::string> attrs;
    if (name == g.protected_attr()) attrs.push_back("shape=box");
    if (name == g.outcome()) attrs.push_back("shape=doublecircle");
    if (g.is_resolving(v)) {
      attrs.push_back("color=red");
      attrs.push_back("style=filled");
      attrs.push_back("fillcolor=\"#f4cccc\"");
      attrs.push_back("resolving=true");
    }
    out << "  " << dot_id(name);
    if (!attrs.empty()) {
      out << " [";
      for (std::size_t i = 0; i < attrs.size(); ++i) out << (i ? ", " : "") << attrs[i];
      out << "]";
    }
    out << ";\n";
  }
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j)
      if (g.directed()(i, j))
        out << "  " << dot_id(g.variables()[i]) << " -> " << dot_id(g.variables()[j]) << ";\n";
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = i + 1; j < g.size(); ++j)
      if (g.bidirected()(i, j))
        out << "  " << dot_id(g.variables()[i]) << " -> " << dot_id(g.variables()[j])
            << " [style=dashed, dir=both, constraint=false];\n";
  out << "}\n";
  return out.str();
}

NamedMatrix parse_matrix_csv(const std::string& text) {
  const auto records = parse_csv(text);
  if (records.empty()) throw Error(ErrorCode::Parse, "graph matrix file is empty");
  NamedMatrix m;
  for (std::size_t j = 1; j < records[0].size(); ++j) m.names.push_back(records[0][j].text);
  const std::size_t n = m.names.size();
  if (n == 0) throw Error(ErrorCode::Parse, "graph matrix header names no variables");
  if (records.size() != n + 1) {
    throw Error(ErrorCode::Parse, "graph matrix must have " + std::to_string(n) + " rows, found " +
                                      std::to_string(records.size() - 1));
  }
  m.cells = BoolMatrix(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& rec = records[i + 1];
    if (rec.size() != n + 1) {
      throw Error(ErrorCode::Parse, "graph matrix row " + std::to_string(i + 1) + " has " +
                                        std::to_string(rec.size()) + " fields");
    }
    if (rec[0].text != m.names[i]) {
      throw Error(ErrorCode::Parse, "graph matrix row name " + rec[0].text +
                                        " does not match column name " + m.names[i]);
    }
    for (std::size_t j = 0; j < n; ++j) {
      const auto value = parse_double(rec[j + 1].text);
      if (!value || (*value != 0.0 && *value != 1.0)) {
        throw Error(ErrorCode::Parse, "graph matrix entry (" + m.names[i] + ", " + m.names[j] +
                                          ") must be 0 or 1");
      }
      m.cells.set(i, j, *value == 1.0);
    }
  }
  return m;
}

NamedMatrix read_matrix_csv(const std::string& path) { return parse_matrix_csv(read_file(path)); }

std::string format_matrix_csv(const NamedMatrix& m) {
  std::string out;
  for (const auto& name : m.names) out += "," + csv_escape(name);
  out += "\n";
  for (std::size_t i = 0; i < m.names.size(); ++i) {
    out += csv_escape(m.names[i]);
    for (std::size_t j = 0; j < m.names.size(); ++j) out += m.cells(i, j) ? ",1" : ",0";
    out += "\n";
  }
  return out;
}

}  // namespace fairadapt
