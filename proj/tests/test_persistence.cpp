#include <gtest/gtest.h>

#include <cstdio>
#include <cstring>

#include "fairadapt/error.hpp"
#include "fairadapt/persistence.hpp"
#include "support.hpp"

using namespace fairadapt;
using namespace fairadapt::testing;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Usage;
}

AdaptationResult fitted(const std::string& backend, bool confounded = false, bool top_order = false) {
  const auto scm = uni_like_scm(31);
  const auto data = with_baseline(simulate(scm, 200).data, "gender");
  auto spec = spec_for(scm, backend, 77);
  spec.backend.forest.n_trees = 40;
  spec.resolving = {"test"};
  if (confounded) {
    BoolMatrix cfd(4);
    cfd.set(1, 3);
    cfd.set(3, 1);
    std::get<GraphMode>(spec.mode).confounding = NamedMatrix{scm.graph.variables(), cfd};
  }
  if (top_order) spec.mode = TopOrderMode{{"gender", "edu", "test", "score"}};
  return adapt(data, std::nullopt, spec);
}

// Replaces the manifest's version string, keeping the byte layout intact.
std::string with_version(std::string bytes, const std::string& from, const std::string& to) {
  const auto at = bytes.find("\"version\":\"" + from + "\"");
  EXPECT_NE(at, std::string::npos);
  bytes.replace(at + 11, from.size(), to);
  return bytes;
}

}  // namespace

TEST(Persistence, RoundTripPreservesBehaviour) {
  for (const std::string backend : {"forest", "linear"}) {
    for (int variant = 0; variant < 3; ++variant) {
      const auto res = fitted(backend, variant == 1, variant == 2);
      const auto bytes = serialize_result(res);
      ASSERT_EQ(bytes.substr(0, 8), "FAIRADPT");
      const auto back = deserialize_result(bytes);

      EXPECT_EQ(back.adapt_order, res.adapt_order);
      EXPECT_EQ(back.spec.resolving, res.spec.resolving);
      EXPECT_EQ(back.spec.seed, 77u);
      EXPECT_EQ(back.spec.backend.kind, backend);
      EXPECT_EQ(back.spec.uses_top_order(), variant == 2);
      EXPECT_EQ(back.tv_before, res.tv_before);
      EXPECT_EQ(back.tv_after, res.tv_after);
      EXPECT_EQ(to_csv(back.train.adapted), to_csv(res.train.adapted));
      EXPECT_EQ(back.graph.extended_parents(back.graph.index("score")),
                res.graph.extended_parents(res.graph.index("score")));
      for (const auto& [name, model] : res.models) EXPECT_EQ(back.models.at(name).parents(), model.parents());

      const auto fresh = res.train.original;
      EXPECT_EQ(to_csv(predict(back, fresh).adapted), to_csv(predict(res, fresh).adapted));
      EXPECT_EQ(serialize_result(back), bytes) << backend << " " << variant;
    }
  }
}

TEST(Persistence, FileRoundTrip) {
  const auto res = fitted("linear");
  const std::string path = ::testing::TempDir() + "/fairadapt_model.bin";
  save_model(path, res);
  const auto back = load_model(path);
  EXPECT_EQ(to_csv(back.train.adapted), to_csv(res.train.adapted));
  std::remove(path.c_str());
  EXPECT_EQ(code_of([&] { load_model(path); }), ErrorCode::Io);
}

TEST(Persistence, RejectsNewerMajorVersion) {
  const auto bytes = serialize_result(fitted("linear"));
  EXPECT_EQ(code_of([&] { deserialize_result(with_version(bytes, "1.0", "2.0")); }), ErrorCode::Version);
  // a newer minor version of the same major still loads
  EXPECT_NO_THROW(deserialize_result(with_version(bytes, "1.0", "1.9")));
}

TEST(Persistence, RejectsDamagedFiles) {
  const auto bytes = serialize_result(fitted("forest"));
  EXPECT_EQ(code_of([] { deserialize_result("NOTMODEL"); }), ErrorCode::Format);
  EXPECT_EQ(code_of([] { deserialize_result(""); }), ErrorCode::Format);
  EXPECT_EQ(code_of([&] { deserialize_result(bytes.substr(0, bytes.size() / 2)); }), ErrorCode::Format);
  auto broken = bytes;
  const auto at = broken.find("\"format\"");
  ASSERT_NE(at, std::string::npos);
  broken[at] = '{';
  EXPECT_EQ(code_of([&] { deserialize_result(broken); }), ErrorCode::Format);
}
