#include "fairadapt/persistence.hpp"

#include <map>

#include <json.hpp>

#include "fairadapt/binary_io.hpp"
#include "fairadapt/csv.hpp"
#include "fairadapt/error.hpp"

namespace fairadapt {

namespace {

constexpr std::string_view kMagic = "FAIRADPT";

using json = nlohmann::ordered_json;

json backend_to_json(const BackendConfig& b) {
  json j;
  j["kind"] = b.kind;
  j["n_trees"] = b.forest.n_trees;
  j["mtry"] = b.forest.mtry;
  j["min_leaf"] = b.forest.min_leaf;
  j["taus"] = b.linear.taus;
  j["smoothing"] = b.linear.smoothing;
  j["max_iterations"] = b.linear.max_iterations;
  return j;
}

BackendConfig backend_from_json(const json& j) {
  BackendConfig b;
  b.kind = j.at("kind").get<std::string>();
  b.forest.n_trees = j.at("n_trees").get<std::size_t>();
  b.forest.mtry = j.at("mtry").get<std::size_t>();
  b.forest.min_leaf = j.at("min_leaf").get<std::size_t>();
  b.linear.taus = j.at("taus").get<std::vector<double>>();
  b.linear.smoothing = j.at("smoothing").get<double>();
  b.linear.max_iterations = j.at("max_iterations").get<std::size_t>();
  return b;
}

std::string baseline_label(const Dataset& ds) {
  Column probe = ds.column(ds.protected_attr());
  probe.values = {ds.baseline()};
  return probe.format(0);
}

}  // namespace

std::string serialize_result(const AdaptationResult& result) {
  const AdaptSpec& spec = result.spec;
  std::vector<std::pair<std::string, std::string>> sections;

  if (const auto* gm = std::get_if<GraphMode>(&spec.mode)) {
    sections.emplace_back("graph/adjacency", format_matrix_csv(gm->adjacency));
    if (gm->confounding) sections.emplace_back("graph/confounding", format_matrix_csv(*gm->confounding));
  }
  sections.emplace_back("data/train_original", to_csv(result.train.original));
  sections.emplace_back("data/train_adapted", to_csv(result.train.adapted));
  for (const auto& name : result.adapt_order) {
    BinaryWriter w;
    result.models.at(name).save(w);
    sections.emplace_back("model/" + name, w.take());
  }

  json manifest;
  manifest["format"] = "fairadapt-model";
  manifest["version"] = std::to_string(kModelFormatMajor) + "." + std::to_string(kModelFormatMinor);
  manifest["tool_version"] = FAIRADAPT_VERSION;
  manifest["formula"] = spec.formula.to_string();
  manifest["protected"] = spec.protected_attr;
  manifest["baseline"] = spec.baseline ? json(*spec.baseline) : json(nullptr);
  manifest["baseline_label"] = baseline_label(result.train.original);
  manifest["resolving"] = spec.resolving;
  if (const auto* top = std::get_if<TopOrderMode>(&spec.mode)) {
    manifest["mode"] = "top_ord";
    manifest["top_ord"] = top->ordering;
  } else {
    manifest["mode"] = "graph";
  }
  manifest["backend"] = backend_to_json(spec.backend);
  manifest["seed"] = spec.seed;
  manifest["schema"] = json::parse(Schema::of(result.train.original).to_json());
  manifest["adapt_order"] = result.adapt_order;
  manifest["tv_before"] = result.tv_before;
  manifest["tv_after"] = result.tv_after;
  json names = json::array();
  for (const auto& [name, _] : sections) names.push_back(name);
  manifest["sections"] = names;

  BinaryWriter out;
  out.raw(kMagic);
  const std::string text = manifest.dump();
  out.u32(static_cast<std::uint32_t>(text.size()));
  out.raw(text);
  for (const auto& [name, payload] : sections) {
    out.u32(static_cast<std::uint32_t>(name.size()));
    out.raw(name);
    out.u64(payload.size());
    out.raw(payload);
  }
  return out.take();
}

AdaptationResult deserialize_result(std::string_view bytes) {
  BinaryReader in(bytes);
  if (bytes.size() < kMagic.size() || in.raw(kMagic.size()) != kMagic) {
    throw Error(ErrorCode::Format, "not a fairadapt model file");
  }
  json manifest;
  try {
    const auto len = in.u32();
    manifest = json::parse(in.raw(len));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("corrupt model manifest: ") + e.what());
  }
  if (!manifest.contains("version") || !manifest["version"].is_string()) {
    throw Error(ErrorCode::Format, "model manifest has no version");
  }
  const auto version = manifest["version"].get<std::string>();
  int major = 0;
  try {
    major = std::stoi(version.substr(0, version.find('.')));
  } catch (const std::exception&) {
    throw Error(ErrorCode::Format, "malformed model version " + version);
  }
  if (major > kModelFormatMajor) {
    throw Error(ErrorCode::Version, "model format " + version + " is newer than supported " +
                                        std::to_string(kModelFormatMajor) + ".x");
  }

  std::map<std::string, std::string> sections;
  while (!in.done()) {
    const auto name_len = in.u32();
    std::string name(in.raw(name_len));
    const auto payload_len = in.u64();
    if (payload_len > bytes.size()) throw Error(ErrorCode::Format, "truncated model section " + name);
    sections[name] = std::string(in.raw(static_cast<std::size_t>(payload_len)));
  }
  auto section = [&](const std::string& name) -> const std::string& {
    auto it = sections.find(name);
    if (it == sections.end()) throw Error(ErrorCode::Format, "model file lacks section " + name);
    return it->second;
  };

  try {
    AdaptSpec spec;
    spec.formula = Formula::parse(manifest.at("formula").get<std::string>());
    spec.protected_attr = manifest.at("protected").get<std::string>();
    if (!manifest.at("baseline").is_null()) spec.baseline = manifest["baseline"].get<std::string>();
    spec.resolving = manifest.at("resolving").get<std::vector<std::string>>();
    if (manifest.at("mode").get<std::string>() == "top_ord") {
      spec.mode = TopOrderMode{manifest.at("top_ord").get<std::vector<std::string>>()};
    } else {
      GraphMode gm{parse_matrix_csv(section("graph/adjacency")), std::nullopt};
      if (sections.count("graph/confounding")) gm.confounding = parse_matrix_csv(sections["graph/confounding"]);
      spec.mode = std::move(gm);
    }
    spec.backend = backend_from_json(manifest.at("backend"));
    spec.seed = manifest.at("seed").get<std::uint64_t>();

    LoadOptions options;
    options.schema = Schema::parse(manifest.at("schema").dump());
    const auto label = manifest.at("baseline_label").get<std::string>();
    Dataset original = select_baseline(parse_dataset(section("data/train_original"), options),
                                       spec.protected_attr, label);
    Dataset adapted = parse_dataset(section("data/train_adapted"), options).with_roles_of(original);

    AdaptationResult result{spec, spec.build_graph(), Schema::of(original), {std::move(original), std::move(adapted)},
                            std::nullopt, manifest.at("adapt_order").get<std::vector<std::string>>(), {},
                            manifest.at("tv_before").get<double>(), manifest.at("tv_after").get<double>(),
                            std::nullopt, std::nullopt};
    for (const auto& name : result.adapt_order) {
      BinaryReader reader(section("model/" + name));
      auto model = QuantileModel::load(reader);
      if (!reader.done()) throw Error(ErrorCode::Format, "trailing bytes in model/" + name);
      result.models.emplace(name, std::move(model));
    }
    return result;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("corrupt model manifest: ") + e.what());
  }
}

void save_model(const std::string& path, const AdaptationResult& result) {
  write_file(path, serialize_result(result));
}

AdaptationResult load_model(const std::string& path) { return deserialize_result(read_file(path)); }

}  // namespace fairadapt
