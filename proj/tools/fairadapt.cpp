// fairadapt command line front end.
//
//   fairadapt adapt     --train t.csv --graph adj.csv --protected A --outcome Y [...]
//   fairadapt predict   --model m.fadt --data new.csv --out adapted.csv
//   fairadapt twins     (--model m.fadt | --run-dir dir) [--rows 1,3-5] [--cols a,b]
//   fairadapt graph     --graph adj.csv [--cfd cfd.csv] [--resolving v] [--dot out.dot]
//   fairadapt simulate  --scm spec.json --n 1000 --out data.csv [--with-latents]
//
// Exit codes: 0 success, 2 validation or usage error, 3 not identifiable.
// Errors print one line "error[TOKEN]: reason" on stderr.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairadapt/adaptation.hpp"
#include "fairadapt/csv.hpp"
#include "fairadapt/error.hpp"
#include "fairadapt/parallel.hpp"
#include "fairadapt/persistence.hpp"
#include "fairadapt/random.hpp"
#include "fairadapt/scm.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace fairadapt;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitNotIdentifiable = 3;

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (!part.empty()) out.push_back(part);
    }
  }
  return out;
}

// "1,3-5" -> {0, 2, 3, 4}
std::vector<std::size_t> parse_rows(const std::string& text) {
  std::vector<std::size_t> rows;
  for (const auto& part : split_list({text})) {
    const auto dash = part.find('-');
    try {
      std::size_t used = 0;
      if (dash == std::string::npos) {
        const long v = std::stol(part, &used);
        if (used != part.size() || v < 1) throw std::invalid_argument(part);
        rows.push_back(static_cast<std::size_t>(v - 1));
      } else {
        const long lo = std::stol(part.substr(0, dash));
        const long hi = std::stol(part.substr(dash + 1));
        if (lo < 1 || hi < lo) throw std::invalid_argument(part);
        for (long v = lo; v <= hi; ++v) rows.push_back(static_cast<std::size_t>(v - 1));
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::Usage, "bad row selection '" + part + "'");
    }
  }
  return rows;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json input_entry(const std::string& path) {
  return {{"path", path}, {"fnv1a64", hex64(hash_string(read_file(path)))}};
}

std::string fmt7(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.7g", v);
  return buf;
}

std::string summary(const AdaptationResult& r) {
  auto line = [](const std::string& label, const std::string& value) {
    std::string s = label + ":";
    s.resize(std::max<std::size_t>(s.size() + 1, 38), ' ');
    return s + value + "\n";
  };
  const auto levels = r.levels();
  const auto& f = r.spec.formula;
  const std::size_t n_independent = f.predictors.empty() ? r.graph.size() - 1 : f.predictors.size();
  std::string out = "Fairadapt result\n\nFormula:\n " + f.to_string() + "\n\n";
  out += line("Protected attribute", r.spec.protected_attr);
  out += line("Protected attribute levels", levels[0] + ", " + levels[1]);
  if (!r.spec.resolving.empty()) {
    std::string joined;
    for (const auto& v : r.spec.resolving) joined += (joined.empty() ? "" : ", ") + v;
    out += line("Resolving variables", joined);
  }
  out += line("Number of training samples", std::to_string(r.train.original.n_rows()));
  out += line("Number of test samples", std::to_string(r.test ? r.test->original.n_rows() : 0));
  out += line("Number of independent variables", std::to_string(n_independent));
  out += line("Total variation (before adaptation)", fmt7(r.tv_before));
  out += line("Total variation (after adaptation)", fmt7(r.tv_after));
  out += line("Backend", r.spec.backend.kind);
  out += line("Seed", std::to_string(r.spec.seed));
  return out;
}

json spec_snapshot(const AdaptSpec& spec) {
  json j;
  j["formula"] = spec.formula.to_string();
  j["protected"] = spec.protected_attr;
  j["baseline"] = spec.baseline ? json(*spec.baseline) : json(nullptr);
  j["resolving"] = spec.resolving;
  if (const auto* top = std::get_if<TopOrderMode>(&spec.mode)) {
    j["mode"] = "top_ord";
    j["top_ord"] = top->ordering;
  } else {
    j["mode"] = "graph";
  }
  j["backend"] = {{"kind", spec.backend.kind},
                  {"n_trees", spec.backend.forest.n_trees},
                  {"mtry", spec.backend.forest.mtry},
                  {"min_leaf", spec.backend.forest.min_leaf},
                  {"n_taus", spec.backend.linear.grid().size()}};
  j["seed"] = spec.seed;
  return j;
}

void write_json(const fs::path& path, const json& j) { write_file(path.string(), j.dump(2) + "\n"); }

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct Common {
  std::optional<std::size_t> threads;
  std::string schema;
  std::size_t discrete_max_levels = 0;

  void add(CLI::App* app) {
    app->add_option("--threads", threads, "Worker threads (0 = all cores); falls back to FAIRADAPT_THREADS");
  }
  void add_loading(CLI::App* app) {
    app->add_option("--schema", schema, "JSON file fixing column kinds and levels");
    app->add_option("--discrete-max-levels", discrete_max_levels,
                    "Integer columns with at most this many values load as ordered-discrete");
  }
  void apply_threads() const {
    std::size_t n = 0;
    if (threads) {
      n = *threads;
    } else if (const char* env = std::getenv("FAIRADAPT_THREADS")) {
      try {
        n = std::stoul(env);
      } catch (const std::exception&) {
        throw Error(ErrorCode::Usage, std::string("FAIRADAPT_THREADS is not a number: ") + env);
      }
    }
    set_max_threads(n);
  }
  LoadOptions load_options() const {
    LoadOptions o;
    if (!schema.empty()) o.schema = Schema::load(schema);
    o.discrete_max_levels = discrete_max_levels;
    return o;
  }
};

struct AdaptArgs {
  std::string train, test, graph, cfd, protected_attr, outcome, formula, baseline, backend = "forest";
  std::string out_dir = ".", save_model;
  std::vector<std::string> resolving, top_ord;
  std::uint64_t seed = kDefaultSeed;
  std::size_t n_trees = 500, min_leaf = 5, mtry = 0;
};

int run_adapt(const AdaptArgs& a, const Common& common) {
  const auto start = std::chrono::steady_clock::now();
  const auto top_ord = split_list(a.top_ord);
  if (!top_ord.empty() && !a.cfd.empty()) {
    throw Error(ErrorCode::Usage, "--top-ord and --cfd are mutually exclusive");
  }
  if (!top_ord.empty() && !a.graph.empty()) {
    throw Error(ErrorCode::Usage, "--top-ord and --graph are mutually exclusive");
  }
  if (top_ord.empty() && a.graph.empty()) throw Error(ErrorCode::Usage, "one of --graph or --top-ord is required");

  AdaptSpec spec;
  spec.formula = a.formula.empty() ? Formula{a.outcome, {}} : Formula::parse(a.formula);
  if (spec.formula.outcome != a.outcome) throw Error(ErrorCode::Usage, "formula outcome differs from --outcome");
  spec.protected_attr = a.protected_attr;
  if (!a.baseline.empty()) spec.baseline = a.baseline;
  spec.resolving = split_list(a.resolving);
  if (!top_ord.empty()) {
    spec.mode = TopOrderMode{top_ord};
  } else {
    GraphMode gm{read_matrix_csv(a.graph), std::nullopt};
    if (!a.cfd.empty()) gm.confounding = read_matrix_csv(a.cfd);
    spec.mode = std::move(gm);
  }
  spec.backend.kind = a.backend;
  spec.backend.forest.n_trees = a.n_trees;
  spec.backend.forest.min_leaf = a.min_leaf;
  spec.backend.forest.mtry = a.mtry;
  spec.seed = a.seed;

  auto options = common.load_options();
  options.protected_attr = a.protected_attr;
  const Dataset train = load_csv(a.train, options);
  std::optional<Dataset> test;
  if (!a.test.empty()) {
    auto test_options = options;
    test_options.protected_attr.reset();
    if (!test_options.schema) test_options.schema = Schema::of(train);
    test = load_csv(a.test, test_options);
  }
  const auto loaded = std::chrono::steady_clock::now();

  const AdaptationResult result = adapt(train, test, spec);
  const double adapt_seconds = seconds_since(loaded);

  const fs::path dir(a.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + a.out_dir + ": " + ec.message());
  write_csv((dir / "adapted_train.csv").string(), result.train.adapted);
  if (result.test) write_csv((dir / "adapted_test.csv").string(), result.test->adapted);

  json metrics;
  metrics["tv_before"] = result.tv_before;
  metrics["tv_after"] = result.tv_after;
  if (result.tv_before_test) metrics["tv_before_test"] = *result.tv_before_test;
  if (result.tv_after_test) metrics["tv_after_test"] = *result.tv_after_test;
  metrics["n_train"] = result.train.original.n_rows();
  metrics["n_test"] = result.test ? result.test->original.n_rows() : 0;
  metrics["adapted_variables"] = result.adapt_order;
  write_json(dir / "metrics.json", metrics);

  if (!a.save_model.empty()) save_model(a.save_model, result);

  json manifest;
  manifest["command"] = "adapt";
  manifest["tool_version"] = FAIRADAPT_VERSION;
  manifest["seed"] = spec.seed;
  manifest["inputs"]["train"] = input_entry(a.train);
  if (!a.test.empty()) manifest["inputs"]["test"] = input_entry(a.test);
  if (!a.graph.empty()) manifest["inputs"]["graph"] = input_entry(a.graph);
  if (!a.cfd.empty()) manifest["inputs"]["cfd"] = input_entry(a.cfd);
  if (!common.schema.empty()) manifest["inputs"]["schema"] = input_entry(common.schema);
  manifest["spec"] = spec_snapshot(spec);
  manifest["schema"] = json::parse(result.schema.to_json());
  manifest["outputs"] = json::array({"adapted_train.csv"});
  if (result.test) manifest["outputs"].push_back("adapted_test.csv");
  manifest["outputs"].push_back("metrics.json");
  if (!a.save_model.empty()) manifest["model"] = a.save_model;
  manifest["timings"] = {{"load_seconds", std::chrono::duration<double>(loaded - start).count()},
                         {"adapt_seconds", adapt_seconds},
                         {"total_seconds", seconds_since(start)}};
  write_json(dir / "manifest.json", manifest);

  std::cout << summary(result);
  return 0;
}

int run_predict(const std::string& model_path, const std::string& data_path, const std::string& out,
                const Common& common) {
  const auto start = std::chrono::steady_clock::now();
  const AdaptationResult result = load_model(model_path);
  auto options = common.load_options();
  if (!options.schema) options.schema = result.schema;
  const Dataset data = load_csv(data_path, options);
  const AdaptedDataset adapted = predict(result, data);
  write_csv(out, adapted.adapted);

  json manifest;
  manifest["command"] = "predict";
  manifest["tool_version"] = FAIRADAPT_VERSION;
  manifest["seed"] = result.spec.seed;
  manifest["inputs"]["model"] = input_entry(model_path);
  manifest["inputs"]["data"] = input_entry(data_path);
  manifest["spec"] = spec_snapshot(result.spec);
  manifest["outputs"] = json::array({fs::path(out).filename().string()});
  manifest["timings"] = {{"total_seconds", seconds_since(start)}};
  write_json(out + ".manifest.json", manifest);
  return 0;
}

// A run directory holds manifest.json and adapted_train.csv from `adapt`; the
// original training file is read back from the recorded path and checked
// against its hash.
AdaptedDataset load_run_dir(const std::string& dir, std::string& outcome) {
  const fs::path root(dir);
  json manifest;
  try {
    manifest = json::parse(read_file((root / "manifest.json").string()));
    const auto train_path = manifest.at("inputs").at("train").at("path").get<std::string>();
    const auto expected = manifest["inputs"]["train"].at("fnv1a64").get<std::string>();
    const std::string text = read_file(train_path);
    if (hex64(hash_string(text)) != expected) {
      throw Error(ErrorCode::SchemaMismatch, "training file " + train_path + " changed since the run");
    }
    LoadOptions options;
    options.schema = Schema::parse(manifest.at("schema").dump());
    const auto& spec = manifest.at("spec");
    const auto prot = spec.at("protected").get<std::string>();
    std::optional<std::string> baseline;
    if (!spec.at("baseline").is_null()) baseline = spec["baseline"].get<std::string>();
    outcome = Formula::parse(spec.at("formula").get<std::string>()).outcome;
    Dataset original = select_baseline(parse_dataset(text, options), prot, baseline);
    Dataset adapted = load_csv((root / "adapted_train.csv").string(), options).with_roles_of(original);
    return {std::move(original), std::move(adapted)};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("bad run manifest: ") + e.what());
  }
}

int run_twins(const std::string& model_path, const std::string& run_dir, const std::string& rows_text,
              const std::vector<std::string>& cols_arg, const std::string& out) {
  if (model_path.empty() == run_dir.empty()) throw Error(ErrorCode::Usage, "give exactly one of --model or --run-dir");
  std::string outcome;
  std::optional<AdaptationResult> result;
  AdaptedDataset data;
  if (!model_path.empty()) {
    result = load_model(model_path);
    outcome = result->graph.outcome();
  } else {
    data = load_run_dir(run_dir, outcome);
  }
  const AdaptedDataset& source = result ? result->train : data;
  std::vector<std::size_t> rows;
  if (rows_text.empty()) {
    rows.resize(source.original.n_rows());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  } else {
    rows = parse_rows(rows_text);
  }
  const Dataset twins = fair_twins(source, outcome, rows, split_list(cols_arg));
  if (out.empty()) {
    std::cout << to_csv(twins);
  } else {
    write_csv(out, twins);
  }
  return 0;
}

int run_graph(const std::string& graph_path, const std::string& cfd_path, const std::vector<std::string>& resolving,
              std::string protected_attr, std::string outcome, const std::string& dot) {
  const NamedMatrix adj = read_matrix_csv(graph_path);
  BoolMatrix cfd;
  if (!cfd_path.empty()) {
    const NamedMatrix m = read_matrix_csv(cfd_path);
    if (m.names != adj.names) throw Error(ErrorCode::SchemaMismatch, "confounding matrix names must match the graph");
    cfd = m.cells;
  }
  if (adj.names.empty()) throw Error(ErrorCode::Parse, "graph has no variables");
  if (protected_attr.empty()) protected_attr = adj.names.front();
  if (outcome.empty()) outcome = adj.names.back();
  const CausalGraph g =
      CausalGraph::build(adj.names, adj.cells, cfd, protected_attr, outcome, split_list(resolving));
  const std::string text = export_dot(g);
  if (dot.empty() || dot == "-") {
    std::cout << text;
  } else {
    write_file(dot, text);
  }
  const auto verdict = check_identifiable(g);
  if (!verdict) std::cerr << "note: " << verdict.reason() << "\n";
  return 0;
}

int run_simulate(const std::string& scm_path, std::size_t n, const std::string& out, bool with_latents,
                 std::optional<std::uint64_t> seed) {
  ScmSpec spec = ScmSpec::load(scm_path);
  if (seed) spec.seed = *seed;
  const Simulation sim = simulate(spec, n);
  write_csv(out, sim.data);
  if (with_latents) {
    fs::path p(out);
    const fs::path latent = p.parent_path() / (p.stem().string() + "_latents" + p.extension().string());
    write_csv(latent.string(), sim.latent);
  }
  return 0;
}

int report(const Error& e) {
  std::cerr << "error[" << error_token(e.code()) << "]: " << e.what() << "\n";
  return e.code() == ErrorCode::NotIdentifiable ? kExitNotIdentifiable : kExitInvalid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fair data adaptation via quantile-preserving counterfactuals"};
  app.set_version_flag("--version", std::string(FAIRADAPT_VERSION));
  app.require_subcommand(1);
  Common common;

  AdaptArgs aa;
  auto* adapt_cmd = app.add_subcommand("adapt", "Adapt training (and test) data");
  adapt_cmd->add_option("--train", aa.train, "Training CSV")->required();
  adapt_cmd->add_option("--test", aa.test, "Test CSV (outcome column optional)");
  adapt_cmd->add_option("--graph", aa.graph, "Adjacency matrix CSV");
  adapt_cmd->add_option("--cfd", aa.cfd, "Confounding matrix CSV");
  adapt_cmd->add_option("--top-ord", aa.top_ord, "Topological ordering, comma separated (instead of --graph)");
  adapt_cmd->add_option("--protected", aa.protected_attr, "Protected attribute")->required();
  adapt_cmd->add_option("--outcome", aa.outcome, "Outcome variable")->required();
  adapt_cmd->add_option("--formula", aa.formula, "Outcome formula, default '<outcome> ~ .'");
  adapt_cmd->add_option("--resolving", aa.resolving, "Resolving variables, comma separated");
  adapt_cmd->add_option("--baseline", aa.baseline, "Baseline level of the protected attribute");
  adapt_cmd->add_option("--backend", aa.backend, "Quantile backend")->check(CLI::IsMember({"forest", "linear"}));
  adapt_cmd->add_option("--n-trees", aa.n_trees, "Forest size");
  adapt_cmd->add_option("--mtry", aa.mtry, "Forest split candidates (0 = ceil(sqrt(p)))");
  adapt_cmd->add_option("--min-leaf", aa.min_leaf, "Forest minimum leaf size");
  adapt_cmd->add_option("--seed", aa.seed, "Random seed");
  adapt_cmd->add_option("--out-dir", aa.out_dir, "Output directory");
  adapt_cmd->add_option("--save-model", aa.save_model, "Write the fitted model to this file");
  common.add(adapt_cmd);
  common.add_loading(adapt_cmd);

  std::string model_path, data_path, predict_out = "adapted.csv";
  auto* predict_cmd = app.add_subcommand("predict", "Adapt new rows with a saved model");
  predict_cmd->add_option("--model", model_path, "Model file")->required();
  predict_cmd->add_option("--data", data_path, "CSV to adapt")->required();
  predict_cmd->add_option("--out", predict_out, "Adapted CSV");
  common.add(predict_cmd);
  common.add_loading(predict_cmd);

  std::string twins_model, run_dir, rows_text, twins_out;
  std::vector<std::string> twins_cols;
  auto* twins_cmd = app.add_subcommand("twins", "Original and adapted values side by side");
  twins_cmd->add_option("--model", twins_model, "Model file");
  twins_cmd->add_option("--run-dir", run_dir, "Output directory of an adapt run");
  twins_cmd->add_option("--rows", rows_text, "1-based rows, e.g. 1,3-5 (default all)");
  twins_cmd->add_option("--cols", twins_cols, "Columns, comma separated");
  twins_cmd->add_option("--out", twins_out, "Output CSV (default stdout)");

  std::string graph_path, cfd_path, graph_prot, graph_outcome, dot_out;
  std::vector<std::string> graph_resolving;
  auto* graph_cmd = app.add_subcommand("graph", "Validate a causal graph and export DOT");
  graph_cmd->add_option("--graph", graph_path, "Adjacency matrix CSV")->required();
  graph_cmd->add_option("--cfd", cfd_path, "Confounding matrix CSV");
  graph_cmd->add_option("--resolving", graph_resolving, "Resolving variables, comma separated");
  graph_cmd->add_option("--protected", graph_prot, "Protected attribute (default first variable)");
  graph_cmd->add_option("--outcome", graph_outcome, "Outcome (default last variable)");
  graph_cmd->add_option("--dot", dot_out, "DOT output file (default stdout)");

  std::string scm_path, sim_out;
  std::size_t sim_n = 0;
  bool with_latents = false;
  std::optional<std::uint64_t> sim_seed;
  auto* sim_cmd = app.add_subcommand("simulate", "Sample data from a structural causal model");
  sim_cmd->add_option("--scm", scm_path, "SCM specification (JSON)")->required();
  sim_cmd->add_option("--n", sim_n, "Number of rows")->required();
  sim_cmd->add_option("--out", sim_out, "Output CSV")->required();
  sim_cmd->add_option("--seed", sim_seed, "Override the specification's seed");
  sim_cmd->add_flag("--with-latents", with_latents, "Also write <out>_latents.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string what = e.what();
    for (auto& c : what)
      if (c == '\n') c = ' ';
    std::cerr << "error[USAGE]: " << what << "\n";
    return kExitInvalid;
  }

  try {
    common.apply_threads();
    if (*adapt_cmd) return run_adapt(aa, common);
    if (*predict_cmd) return run_predict(model_path, data_path, predict_out, common);
    if (*twins_cmd) return run_twins(twins_model, run_dir, rows_text, twins_cols, twins_out);
    if (*graph_cmd) return run_graph(graph_path, cfd_path, graph_resolving, graph_prot, graph_outcome, dot_out);
    if (*sim_cmd) return run_simulate(scm_path, sim_n, sim_out, with_latents, sim_seed);
  } catch (const Error& e) {
    return report(e);
  } catch (const std::exception& e) {
    std::cerr << "error[INTERNAL]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
