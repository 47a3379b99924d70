#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fairadapt {

/// Dense square boolean matrix. Graphs here have tens of nodes at most.
class BoolMatrix {
 public:
  BoolMatrix() = default;
  explicit BoolMatrix(std::size_t n) : n_(n), cells_(n * n, 0) {}

  std::size_t size() const noexcept { return n_; }
  bool operator()(std::size_t i, std::size_t j) const { return cells_[i * n_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool value = true) { cells_[i * n_ + j] = value ? 1 : 0; }
  bool any() const;

  friend bool operator==(const BoolMatrix&, const BoolMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> cells_;
};

/// A causal diagram over named variables: directed edges (i -> j), a symmetric
/// latent-confounding relation (i <-> j), and the roles the adaptation needs.
///
/// Instances are only created through `build`, which enforces acyclicity,
/// symmetry of the confounding relation, name resolution of all roles, and
/// that every resolving variable descends from the protected attribute.
/// After construction the graph is immutable.
class CausalGraph {
 public:
  static CausalGraph build(std::vector<std::string> variables, BoolMatrix directed,
                           BoolMatrix bidirected, std::string protected_attr,
                           std::string outcome, std::vector<std::string> resolving = {});

  /// Complete DAG following `ordering` (every earlier variable is a parent of
  /// every later one). Used when the caller knows an order but not the edges.
  static CausalGraph from_ordering(std::vector<std::string> ordering, std::string protected_attr,
                                   std::string outcome, std::vector<std::string> resolving = {});

  const std::vector<std::string>& variables() const noexcept { return variables_; }
  std::size_t size() const noexcept { return variables_.size(); }
  const BoolMatrix& directed() const noexcept { return directed_; }
  const BoolMatrix& bidirected() const noexcept { return bidirected_; }
  const std::string& protected_attr() const noexcept { return protected_; }
  const std::string& outcome() const noexcept { return outcome_; }
  const std::vector<std::string>& resolving() const noexcept { return resolving_; }

  std::optional<std::size_t> find(const std::string& name) const;
  /// Index of `name`; throws Error(Name) if unknown.
  std::size_t index(const std::string& name) const;

  bool is_resolving(std::size_t v) const;
  bool is_markovian() const { return !bidirected_.any(); }

  // Index-based queries. Results are sorted by variable index.
  std::vector<std::size_t> parents(std::size_t v) const;
  std::vector<std::size_t> children(std::size_t v) const;
  std::vector<std::size_t> ancestors(std::size_t v) const;
  std::vector<std::size_t> descendants(std::size_t v) const;
  std::vector<std::size_t> component_of(std::size_t v) const;
  std::vector<std::size_t> extended_parents(std::size_t v) const;
  /// Topological order, ties broken by input order.
  std::vector<std::size_t> order() const;

  /// Copy with a different resolving set (validated like `build`).
  CausalGraph with_resolving(std::vector<std::string> resolving) const;

 private:
  CausalGraph() = default;

  std::vector<std::string> variables_;
  BoolMatrix directed_;
  BoolMatrix bidirected_;
  std::string protected_;
  std::string outcome_;
  std::vector<std::string> resolving_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> component_;  // C-component label per variable
};

std::vector<std::string> topological_order(const CausalGraph& g);

/// Strict descendants of `v`, listed in variable order.
std::vector<std::string> descendants(const CausalGraph& g, const std::string& v);

/// Connected components of the bidirected-edge graph. Each component is listed
/// in variable order; components are ordered by their first member.
std::vector<std::vector<std::string>> c_components(const CausalGraph& g);

/// (C(v) ∪ pa(C(v))) ∩ an(v). Equals the direct parents when the graph has no
/// bidirected edges.
std::vector<std::string> extended_parents(const CausalGraph& g, const std::string& v);

/// Outcome of the identifiability gate. A "bidirected path" is a path made of
/// bidirected edges only, so the gate fails exactly when an intervened node
/// (the protected attribute or a resolving variable) shares a C-component
/// with one of its directed children.
struct IdentifiabilityVerdict {
  bool identifiable = true;
  std::string from;
  std::string to;

  explicit operator bool() const noexcept { return identifiable; }
  std::string reason() const;
};

IdentifiabilityVerdict check_identifiable(const CausalGraph& g);

/// Throws Error(NotIdentifiable) when the gate fails.
void require_identifiable(const CausalGraph& g);

/// Graphviz DOT rendering. Directed edges are solid, confounding edges dashed
/// and bidirectional, resolving variables filled red, the protected attribute
/// drawn as a box and the outcome as a double circle.
std::string export_dot(const CausalGraph& g);

/// Square named matrix as read from a graph CSV file.
struct NamedMatrix {
  std::vector<std::string> names;
  BoolMatrix cells;
};

/// Reads a square 0/1 matrix whose header row and first column both carry the
/// variable names, in the same order.
NamedMatrix read_matrix_csv(const std::string& path);
NamedMatrix parse_matrix_csv(const std::string& text);
std::string format_matrix_csv(const NamedMatrix& m);

}  // namespace fairadapt
