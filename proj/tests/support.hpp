#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "fairadapt/adaptation.hpp"
#include "fairadapt/graph.hpp"
#include "fairadapt/random.hpp"
#include "fairadapt/scm.hpp"

namespace fairadapt::testing {

// ---- random graphs --------------------------------------------------------

struct RawGraph {
  std::size_t n = 0;
  std::vector<std::vector<bool>> dir;
  std::vector<std::vector<bool>> bi;

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("v" + std::to_string(i));
    return out;
  }
  BoolMatrix directed() const {
    BoolMatrix m(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m.set(i, j, dir[i][j]);
    return m;
  }
  BoolMatrix bidirected() const {
    BoolMatrix m(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m.set(i, j, bi[i][j]);
    return m;
  }
};

/// DAG over a hidden random permutation (so input order is not topological)
/// with independent edge and confounding probabilities.
inline RawGraph random_graph(SplitMix& rng, std::size_t max_nodes, double p_edge, double p_bi) {
  RawGraph g;
  g.n = 1 + rng.below(max_nodes);
  g.dir.assign(g.n, std::vector<bool>(g.n, false));
  g.bi = g.dir;
  std::vector<std::size_t> perm(g.n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = g.n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  for (std::size_t a = 0; a < g.n; ++a)
    for (std::size_t b = a + 1; b < g.n; ++b) {
      if (rng.uniform() < p_edge) g.dir[perm[a]][perm[b]] = true;
      if (rng.uniform() < p_bi) g.bi[perm[a]][perm[b]] = g.bi[perm[b]][perm[a]] = true;
    }
  return g;
}

// ---- brute-force oracles --------------------------------------------------

/// Reachability by repeated boolean matrix products: sum of A^1..A^n.
inline std::vector<std::vector<bool>> closure_by_powers(const std::vector<std::vector<bool>>& a) {
  const std::size_t n = a.size();
  std::vector<std::vector<bool>> power = a, reach = a;
  for (std::size_t step = 1; step < n; ++step) {
    std::vector<std::vector<bool>> next(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k)
        if (power[i][k])
          for (std::size_t j = 0; j < n; ++j)
            if (a[k][j]) next[i][j] = true;
    power = next;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (power[i][j]) reach[i][j] = true;
  }
  return reach;
}

/// Component label per node: smallest node index reachable via bidirected edges.
inline std::vector<std::size_t> brute_components(const RawGraph& g) {
  auto reach = closure_by_powers(g.bi);
  std::vector<std::size_t> label(g.n);
  for (std::size_t i = 0; i < g.n; ++i) {
    label[i] = i;
    for (std::size_t j = 0; j < i; ++j)
      if (reach[i][j]) {
        label[i] = j;
        break;
      }
  }
  return label;
}

inline std::vector<std::size_t> brute_extended_parents(const RawGraph& g, std::size_t v) {
  const auto label = brute_components(g);
  const auto reach = closure_by_powers(g.dir);
  std::vector<bool> in_c(g.n), candidate(g.n);
  for (std::size_t i = 0; i < g.n; ++i) in_c[i] = label[i] == label[v];
  for (std::size_t i = 0; i < g.n; ++i) {
    if (in_c[i]) candidate[i] = true;
    for (std::size_t c = 0; c < g.n; ++c)
      if (in_c[c] && g.dir[i][c]) candidate[i] = true;
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < g.n; ++i)
    if (candidate[i] && reach[i][v]) out.push_back(i);
  return out;
}

/// Depth-first enumeration of simple paths using bidirected edges only.
inline bool bidirected_path_exists(const RawGraph& g, std::size_t from, std::size_t to) {
  std::vector<bool> on_path(g.n, false);
  auto dfs = [&](auto&& self, std::size_t v) -> bool {
    if (v == to) return true;
    on_path[v] = true;
    for (std::size_t w = 0; w < g.n; ++w)
      if (g.bi[v][w] && !on_path[w] && self(self, w)) return true;
    on_path[v] = false;
    return false;
  };
  return from != to && dfs(dfs, from);
}

inline bool brute_identifiable(const RawGraph& g, const std::vector<std::size_t>& intervened) {
  for (auto x : intervened)
    for (std::size_t c = 0; c < g.n; ++c)
      if (g.dir[x][c] && bidirected_path_exists(g, x, c)) return false;
  return true;
}

// ---- statistics -----------------------------------------------------------

inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

inline double ks_uniform(std::vector<double> u) {
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max(d, std::abs((i + 1) / n - u[i]));
    d = std::max(d, std::abs(u[i] - i / n));
  }
  return d;
}

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sd(const std::vector<double>& v) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double mae(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

/// Values of `col` in rows where `group` equals `level`.
inline std::vector<double> group_values(const Dataset& ds, const std::string& col, const std::string& group,
                                        double level) {
  std::vector<double> out;
  const auto& g = ds.column(group).values;
  const auto& v = ds.column(col).values;
  for (std::size_t r = 0; r < v.size(); ++r)
    if (g[r] == level) out.push_back(v[r]);
  return out;
}

// ---- structural causal models ---------------------------------------------

/// A -> E -> T -> Y with A -> T and A -> Y, uniform noise.
inline ScmSpec linear_chain_scm(std::uint64_t seed) {
  std::map<std::string, Mechanism> m;
  m["A"] = BernoulliMechanism{0.0, {}};
  m["E"] = LinearMechanism{0.0, {{"A", 2.0}}, NoiseKind::Uniform, 1.0};
  m["T"] = LinearMechanism{0.0, {{"A", 1.0}, {"E", 1.5}}, NoiseKind::Uniform, 1.0};
  m["Y"] = LinearMechanism{0.0, {{"A", -1.0}, {"T", 1.2}}, NoiseKind::Uniform, 1.0};
  return ScmSpec::make({"A", "E", "T", "Y"}, "A", "Y", std::move(m), seed);
}

/// gender -> edu, gender -> test, edu -> test, edu -> score, test -> score.
inline ScmSpec uni_like_scm(std::uint64_t seed) {
  std::map<std::string, Mechanism> m;
  m["gender"] = BernoulliMechanism{0.0, {}};
  m["edu"] = LinearMechanism{-0.5, {{"gender", 1.0}}, NoiseKind::Gaussian, 1.0};
  m["test"] = LinearMechanism{-0.4, {{"gender", 0.8}, {"edu", 0.6}}, NoiseKind::Gaussian, 0.8};
  m["score"] = LinearMechanism{0.0, {{"edu", 0.5}, {"test", 0.5}}, NoiseKind::Gaussian, 0.5};
  return ScmSpec::make({"gender", "edu", "test", "score"}, "gender", "score", std::move(m), seed);
}

struct RandomScmOptions {
  std::size_t max_nodes = 6;
  double p_edge = 0.6;
  bool allow_discrete = true;
  bool allow_protected_parent = true;
};

/// Random Markovian SCM. Variable "A" is protected (Bernoulli), the last
/// variable in generation order is the outcome. Variable names are emitted
/// in a shuffled order so column order differs from causal order.
inline ScmSpec random_scm(SplitMix& rng, const RandomScmOptions& opt = {}) {
  const std::size_t n = 2 + rng.below(opt.max_nodes - 1);
  std::vector<std::string> causal;
  const bool prot_parent = opt.allow_protected_parent && n >= 3 && rng.uniform() < 0.2;
  if (prot_parent) causal.push_back("W");
  causal.push_back("A");
  for (std::size_t i = causal.size(); i < n; ++i) causal.push_back("X" + std::to_string(i));

  std::map<std::string, Mechanism> mech;
  for (std::size_t j = 0; j < n; ++j) {
    const auto& name = causal[j];
    std::map<std::string, double> coefs;
    for (std::size_t i = 0; i < j; ++i) {
      const bool force = causal[i] == "A" && j == i + 1;  // A always has a child
      if (force || rng.uniform() < opt.p_edge) {
        const double mag = 1.0 + rng.uniform();
        coefs[causal[i]] = rng.uniform() < 0.5 ? mag : -mag;
      }
    }
    if (name == "A") {
      std::map<std::string, double> logit;
      for (auto& [k, c] : coefs) logit[k] = 0.5 * c;
      mech[name] = BernoulliMechanism{0.0, logit};
    } else if (name == "W") {
      mech[name] = LinearMechanism{0.0, {}, NoiseKind::Gaussian, 1.0};
    } else if (opt.allow_discrete && j + 1 < n && rng.uniform() < 0.25) {
      mech[name] = ThresholdMechanism{0.0, coefs, NoiseKind::Gaussian, 1.0, {-1.0, 0.0, 1.0}};
    } else {
      mech[name] = LinearMechanism{0.0, coefs, rng.uniform() < 0.5 ? NoiseKind::Uniform : NoiseKind::Gaussian,
                                   0.5 + rng.uniform()};
    }
  }
  std::vector<std::string> shuffled = causal;
  for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
  return ScmSpec::make(shuffled, "A", causal.back(), std::move(mech), rng.next());
}

/// V = X + U with X, U ~ Uniform(0, 1).
inline Dataset additive_uniform(std::size_t n, std::uint64_t seed) {
  SplitMix rng(seed);
  std::vector<double> x(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.uniform();
    v[i] = x[i] + rng.uniform();
  }
  return Dataset({Column{"X", ColumnKind::Numeric, x, {}}, Column{"V", ColumnKind::Numeric, v, {}}});
}

// ---- pinball-loss oracle ----------------------------------------------------

inline double pinball(const std::vector<double>& x, const std::vector<double>& y, double tau, double a, double b) {
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - a - b * x[i];
    loss += r >= 0 ? tau * r : (tau - 1.0) * r;
  }
  return loss;
}

/// Brute-force pinball minimiser over (intercept, slope): a full grid, then
/// three rounds of finer grids around the incumbent.
inline std::pair<double, double> pinball_grid_search(const std::vector<double>& x, const std::vector<double>& y,
                                                     double tau) {
  double best_a = 0.0, best_b = 0.0, best = std::numeric_limits<double>::infinity();
  double lo_a = -5.0, hi_a = 5.0, lo_b = -5.0, hi_b = 5.0;
  for (int round = 0; round < 4; ++round) {
    const int steps = 100;
    for (int i = 0; i <= steps; ++i)
      for (int j = 0; j <= steps; ++j) {
        const double a = lo_a + (hi_a - lo_a) * i / steps;
        const double b = lo_b + (hi_b - lo_b) * j / steps;
        const double loss = pinball(x, y, tau, a, b);
        if (loss < best) {
          best = loss;
          best_a = a;
          best_b = b;
        }
      }
    const double wa = (hi_a - lo_a) / 10.0, wb = (hi_b - lo_b) / 10.0;
    lo_a = best_a - wa;
    hi_a = best_a + wa;
    lo_b = best_b - wb;
    hi_b = best_b + wb;
  }
  return {best_a, best_b};
}

// ---- adaptation helpers -----------------------------------------------------

inline NamedMatrix adjacency_of(const CausalGraph& g) { return {g.variables(), g.directed()}; }

inline AdaptSpec spec_for(const ScmSpec& scm, const std::string& backend, std::uint64_t seed = kDefaultSeed) {
  AdaptSpec spec;
  spec.formula = Formula{scm.graph.outcome(), {}};
  spec.protected_attr = scm.graph.protected_attr();
  spec.mode = GraphMode{adjacency_of(scm.graph), std::nullopt};
  spec.backend.kind = backend;
  spec.seed = seed;
  return spec;
}

/// Simulated data with the protected attribute's baseline selected (0).
inline Dataset with_baseline(const Dataset& ds, const std::string& prot) {
  return select_baseline(ds, prot, std::nullopt);
}

}  // namespace fairadapt::testing
