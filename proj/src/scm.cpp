#include "fairadapt/scm.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/erf.hpp>
#include <json.hpp>

#include "fairadapt/csv.hpp"
#include "fairadapt/error.hpp"
#include "fairadapt/random.hpp"

namespace fairadapt {

namespace {

using json = nlohmann::ordered_json;

const std::map<std::string, double>& coefficients_of(const Mechanism& m) {
  return std::visit([](const auto& mech) -> const std::map<std::string, double>& { return mech.coefficients; }, m);
}

double linear_part(double intercept, const std::map<std::string, double>& coefs,
                   const std::map<std::string, double>& parents) {
  double eta = intercept;
  for (const auto& [name, c] : coefs) eta += c * parents.at(name);
  return eta;
}

NoiseKind parse_noise(const std::string& s) {
  if (s == "uniform") return NoiseKind::Uniform;
  if (s == "gaussian" || s == "normal") return NoiseKind::Gaussian;
  throw Error(ErrorCode::Parse, "unknown noise kind '" + s + "'");
}

std::string noise_name(NoiseKind k) { return k == NoiseKind::Uniform ? "uniform" : "gaussian"; }

Mechanism mechanism_from_json(const std::string& var, const json& j) {
  const auto type = j.value("type", std::string("linear"));
  std::map<std::string, double> coefs;
  if (j.contains("coefficients")) coefs = j["coefficients"].get<std::map<std::string, double>>();
  const double intercept = j.value("intercept", 0.0);
  if (type == "linear") {
    return LinearMechanism{intercept, coefs, parse_noise(j.value("noise", std::string("uniform"))),
                           j.value("scale", 1.0)};
  }
  if (type == "threshold") {
    auto cuts = j.value("cuts", std::vector<double>{});
    if (!std::is_sorted(cuts.begin(), cuts.end())) throw Error(ErrorCode::Parse, "cuts of " + var + " must be sorted");
    return ThresholdMechanism{intercept, coefs, parse_noise(j.value("noise", std::string("gaussian"))),
                              j.value("scale", 1.0), cuts};
  }
  if (type == "bernoulli") return BernoulliMechanism{intercept, coefs};
  throw Error(ErrorCode::Parse, "unknown mechanism type '" + type + "' for " + var);
}

json mechanism_to_json(const Mechanism& m) {
  json j;
  std::visit(
      [&](const auto& mech) {
        using T = std::decay_t<decltype(mech)>;
        if constexpr (std::is_same_v<T, LinearMechanism>) {
          j["type"] = "linear";
        } else if constexpr (std::is_same_v<T, ThresholdMechanism>) {
          j["type"] = "threshold";
        } else {
          j["type"] = "bernoulli";
        }
        j["intercept"] = mech.intercept;
        j["coefficients"] = mech.coefficients;
        if constexpr (!std::is_same_v<T, BernoulliMechanism>) {
          j["noise"] = noise_name(mech.noise);
          j["scale"] = mech.scale;
        }
        if constexpr (std::is_same_v<T, ThresholdMechanism>) j["cuts"] = mech.cuts;
      },
      m);
  return j;
}

bool is_discrete(const Mechanism& m) { return !std::holds_alternative<LinearMechanism>(m); }

}  // namespace

double noise_value(NoiseKind kind, double u) {
  if (kind == NoiseKind::Uniform) return u;
  const double edge = std::nextafter(1.0, 0.0);
  return std::sqrt(2.0) * boost::math::erf_inv(std::clamp(2.0 * u - 1.0, -edge, edge));
}

double evaluate(const Mechanism& mechanism, const std::map<std::string, double>& parents, double u) {
  return std::visit(
      [&](const auto& mech) -> double {
        using T = std::decay_t<decltype(mech)>;
        const double eta = linear_part(mech.intercept, mech.coefficients, parents);
        if constexpr (std::is_same_v<T, LinearMechanism>) {
          return eta + mech.scale * noise_value(mech.noise, u);
        } else if constexpr (std::is_same_v<T, ThresholdMechanism>) {
          const double latent = eta + mech.scale * noise_value(mech.noise, u);
          return static_cast<double>(std::count_if(mech.cuts.begin(), mech.cuts.end(),
                                                   [&](double c) { return c < latent; }));
        } else {
          const double p = 1.0 / (1.0 + std::exp(-eta));
          return u > 1.0 - p ? 1.0 : 0.0;
        }
      },
      mechanism);
}

ScmSpec ScmSpec::make(std::vector<std::string> variables, std::string protected_attr, std::string outcome,
                      std::map<std::string, Mechanism> mechanisms, std::uint64_t seed) {
  BoolMatrix directed(variables.size());
  for (std::size_t j = 0; j < variables.size(); ++j) {
    auto it = mechanisms.find(variables[j]);
    if (it == mechanisms.end()) continue;
    for (const auto& [parent, _] : coefficients_of(it->second)) {
      auto p = std::find(variables.begin(), variables.end(), parent);
      if (p == variables.end()) {
        throw Error(ErrorCode::Parse, "mechanism of " + variables[j] + " references unknown " + parent);
      }
      directed.set(static_cast<std::size_t>(p - variables.begin()), j);
    }
  }
  ScmSpec spec{CausalGraph::build(std::move(variables), std::move(directed), BoolMatrix(), std::move(protected_attr),
                                  std::move(outcome)),
               std::move(mechanisms), seed};
  spec.validate();
  return spec;
}

ScmSpec ScmSpec::parse(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("SCM spec is not valid JSON: ") + e.what());
  }
  try {
    const auto variables = j.at("variables").get<std::vector<std::string>>();
    if (variables.empty()) throw Error(ErrorCode::Parse, "SCM spec lists no variables");
    const auto prot = j.value("protected", variables.front());
    const auto outcome = j.value("outcome", variables.back());
    std::map<std::string, Mechanism> mechanisms;
    for (const auto& [name, mj] : j.at("mechanisms").items()) mechanisms.emplace(name, mechanism_from_json(name, mj));
    const std::uint64_t seed = j.value("seed", std::uint64_t{1});
    if (!j.contains("edges")) return make(variables, prot, outcome, std::move(mechanisms), seed);

    BoolMatrix directed(variables.size());
    auto index = [&](const std::string& name) {
      auto it = std::find(variables.begin(), variables.end(), name);
      if (it == variables.end()) throw Error(ErrorCode::Parse, "edge names unknown variable " + name);
      return static_cast<std::size_t>(it - variables.begin());
    };
    for (const auto& e : j["edges"]) {
      const auto pair = e.get<std::vector<std::string>>();
      if (pair.size() != 2) throw Error(ErrorCode::Parse, "edges must be [from, to] pairs");
      directed.set(index(pair[0]), index(pair[1]));
    }
    ScmSpec spec{CausalGraph::build(variables, directed, BoolMatrix(), prot, outcome), std::move(mechanisms), seed};
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("malformed SCM spec: ") + e.what());
  }
}

ScmSpec ScmSpec::load(const std::string& path) { return parse(read_file(path)); }

std::string ScmSpec::to_json() const {
  json j;
  j["seed"] = seed;
  j["protected"] = graph.protected_attr();
  j["outcome"] = graph.outcome();
  j["variables"] = graph.variables();
  json edges = json::array();
  for (std::size_t i = 0; i < graph.size(); ++i)
    for (std::size_t k = 0; k < graph.size(); ++k)
      if (graph.directed()(i, k)) edges.push_back({graph.variables()[i], graph.variables()[k]});
  j["edges"] = edges;
  json mechs = json::object();
  for (const auto& v : graph.variables()) mechs[v] = mechanism_to_json(mechanisms.at(v));
  j["mechanisms"] = mechs;
  return j.dump(2);
}

void ScmSpec::validate() const {
  for (std::size_t v = 0; v < graph.size(); ++v) {
    const auto& name = graph.variables()[v];
    auto it = mechanisms.find(name);
    if (it == mechanisms.end()) throw Error(ErrorCode::Parse, "variable " + name + " has no mechanism");
    const auto parents = graph.parents(v);
    for (const auto& [p, _] : coefficients_of(it->second)) {
      const auto id = graph.find(p);
      if (!id || std::find(parents.begin(), parents.end(), *id) == parents.end()) {
        throw Error(ErrorCode::Parse, "mechanism of " + name + " references non-parent " + p);
      }
    }
    std::visit(
        [&](const auto& mech) {
          using T = std::decay_t<decltype(mech)>;
          if constexpr (!std::is_same_v<T, BernoulliMechanism>) {
            if (!(mech.scale > 0.0)) throw Error(ErrorCode::Parse, "noise scale of " + name + " must be positive");
          }
        },
        it->second);
  }
  if (mechanisms.size() != graph.size()) throw Error(ErrorCode::Parse, "mechanism given for an unknown variable");
}

Simulation simulate(const ScmSpec& spec, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::Usage, "simulate needs n >= 1");
  const auto& g = spec.graph;
  std::vector<std::vector<double>> values(g.size(), std::vector<double>(n));
  std::vector<std::vector<double>> latents(g.size(), std::vector<double>(n));
  for (auto v : g.order()) {
    const auto& name = g.variables()[v];
    const auto& mech = spec.mechanisms.at(name);
    const auto parents = g.parents(v);
    std::map<std::string, double> pa;
    for (std::size_t r = 0; r < n; ++r) {
      // open interval (0, 1) so Gaussian noise stays finite
      const std::uint64_t bits = derive_seed(spec.seed, name, r);
      const double u = (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
      for (auto p : parents) pa[g.variables()[p]] = values[p][r];
      latents[v][r] = u;
      values[v][r] = evaluate(mech, pa, u);
    }
  }
  std::vector<Column> data_cols;
  std::vector<Column> latent_cols;
  for (std::size_t v = 0; v < g.size(); ++v) {
    const auto& name = g.variables()[v];
    const auto kind = is_discrete(spec.mechanisms.at(name)) ? ColumnKind::Ordered : ColumnKind::Numeric;
    data_cols.push_back(Column{name, kind, std::move(values[v]), {}});
    latent_cols.push_back(Column{"U_" + name, ColumnKind::Numeric, std::move(latents[v]), {}});
  }
  return {Dataset(std::move(data_cols)), Dataset(std::move(latent_cols))};
}

Dataset oracle_counterfactual(const ScmSpec& spec, const Dataset& data, const Dataset& latent, double baseline,
                              const std::vector<std::string>& resolving) {
  const auto& g = spec.graph;
  const std::size_t prot = g.index(g.protected_attr());
  const auto de = g.descendants(prot);
  const std::size_t n = data.n_rows();
  if (latent.n_rows() != n) throw Error(ErrorCode::SchemaMismatch, "latent table has a different row count");

  std::vector<std::vector<double>> cf(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) cf[v] = data.column(g.variables()[v]).values;
  std::fill(cf[prot].begin(), cf[prot].end(), baseline);

  for (auto v : g.order()) {
    const auto& name = g.variables()[v];
    if (!std::binary_search(de.begin(), de.end(), v)) continue;
    if (std::find(resolving.begin(), resolving.end(), name) != resolving.end()) continue;
    const auto& mech = spec.mechanisms.at(name);
    const auto& u = latent.column("U_" + name).values;
    const auto parents = g.parents(v);
    std::map<std::string, double> pa;
    for (std::size_t r = 0; r < n; ++r) {
      for (auto p : parents) pa[g.variables()[p]] = cf[p][r];
      cf[v][r] = evaluate(mech, pa, u[r]);
    }
  }
  cf[prot] = data.column(g.protected_attr()).values;

  Dataset out = data;
  for (std::size_t v = 0; v < g.size(); ++v) out.column(g.variables()[v]).values = std::move(cf[v]);
  return out;
}

}  // namespace fairadapt
