#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "fairadapt/dataset.hpp"
#include "fairadapt/graph.hpp"

namespace fairadapt {

enum class NoiseKind { Uniform, Gaussian };

/// v = intercept + sum coef * parent + scale * noise(u)
struct LinearMechanism {
  double intercept = 0.0;
  std::map<std::string, double> coefficients;
  NoiseKind noise = NoiseKind::Uniform;
  double scale = 1.0;
};

/// v = number of cut points strictly below the linear latent above.
struct ThresholdMechanism {
  double intercept = 0.0;
  std::map<std::string, double> coefficients;
  NoiseKind noise = NoiseKind::Gaussian;
  double scale = 1.0;
  std::vector<double> cuts;
};

/// v = 1 if u > 1 - sigmoid(intercept + sum coef * parent), else 0.
struct BernoulliMechanism {
  double intercept = 0.0;
  std::map<std::string, double> coefficients;
};

using Mechanism = std::variant<LinearMechanism, ThresholdMechanism, BernoulliMechanism>;

/// Noise transform; Gaussian noise goes through the normal quantile function
/// so every latent stays Uniform(0, 1).
double noise_value(NoiseKind kind, double u);

/// Assignment function f(parents, u), nondecreasing in u.
double evaluate(const Mechanism& mechanism, const std::map<std::string, double>& parents, double u);

/// Generative structural causal model. The graph's edges are exactly the
/// coefficient references unless an explicit edge list is given, in which
/// case coefficients must stay within each variable's parents.
struct ScmSpec {
  CausalGraph graph;
  std::map<std::string, Mechanism> mechanisms;
  std::uint64_t seed = 1;

  /// JSON text:
  /// {"seed": 7, "protected": "A", "outcome": "Y", "variables": [...],
  ///  "edges": [["A","E"], ...],            (optional)
  ///  "mechanisms": {"E": {"type": "linear", "intercept": 0,
  ///                       "coefficients": {"A": 2}, "noise": "uniform",
  ///                       "scale": 1}, ...}}
  /// Types: linear, threshold (adds "cuts"), bernoulli (logit coefficients).
  static ScmSpec parse(const std::string& json_text);
  /// Graph edges taken from the coefficient references.
  static ScmSpec make(std::vector<std::string> variables, std::string protected_attr, std::string outcome,
                      std::map<std::string, Mechanism> mechanisms, std::uint64_t seed);
  static ScmSpec load(const std::string& path);
  std::string to_json() const;

  /// Throws Error(Parse) when a variable lacks a mechanism, a coefficient names
  /// a non-parent, or a noise scale is not positive.
  void validate() const;
};

struct Simulation {
  Dataset data;
  /// One column per variable, named "U_<variable>", all Uniform(0, 1).
  Dataset latent;
};

/// n rows generated in topological order; row r of variable v uses the latent
/// draw keyed by (seed, v, r).
Simulation simulate(const ScmSpec& spec, std::size_t n);

/// Ground-truth counterfactuals under do(protected = baseline) with latents
/// held fixed. Descendants of the protected attribute are recomputed in
/// topological order, except `resolving` variables which keep their natural
/// values. The protected column itself is returned unchanged.
Dataset oracle_counterfactual(const ScmSpec& spec, const Dataset& data, const Dataset& latent, double baseline,
                              const std::vector<std::string>& resolving = {});

}  // namespace fairadapt
