#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "fairadapt/adaptation.hpp"
#include "fairadapt/error.hpp"
#include "fairadapt/parallel.hpp"
#include "fairadapt/scm.hpp"
#include "properties.hpp"

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

Column numeric(std::string name, std::vector<double> values) {
  return Column{std::move(name), ColumnKind::Numeric, std::move(values), {}};
}

bool same_column(const Dataset& a, const Dataset& b, const std::string& name) {
  return a.column(name).values == b.column(name).values;
}

}  // namespace

TEST(Adaptation, NoDescendantsCopiesData) {
  const Dataset ds({numeric("A", {0, 1, 0, 1, 1, 0}), numeric("Y", {1.0, 2.5, 0.5, 3.0, 2.0, 1.5})});
  AdaptSpec spec;
  spec.formula = Formula::parse("Y ~ .");
  spec.protected_attr = "A";
  spec.mode = GraphMode{{{"A", "Y"}, BoolMatrix(2)}, std::nullopt};
  const auto res = adapt(ds, std::nullopt, spec);
  EXPECT_TRUE(res.models.empty());
  EXPECT_TRUE(res.adapt_order.empty());
  EXPECT_EQ(to_csv(res.train.adapted), to_csv(res.train.original));
  EXPECT_EQ(res.tv_after, res.tv_before);
  EXPECT_NEAR(res.tv_before, 1.0 - 2.5, 1e-12);
}

TEST(Adaptation, TotalVariationArithmetic) {
  const Dataset ds({numeric("A", {0, 0, 1, 1}), numeric("Y", {0.2, 0.4, 0.5, 0.5})});
  EXPECT_NEAR(total_variation(ds, "Y", "A", 0.0), -0.2, 1e-12);
  const Dataset flat({numeric("A", {0, 1, 0, 1}), numeric("Y", {1, 1, 2, 2})});
  EXPECT_EQ(total_variation(flat, "Y", "A", 0.0), 0.0);
  const Dataset one_group({numeric("A", {0, 0}), numeric("Y", {1, 2})});
  EXPECT_EQ(code_of([&] { total_variation(one_group, "Y", "A", 0.0); }), ErrorCode::EmptyGroup);
  // two labels count as a binary encoding, three do not
  const Dataset binary({numeric("A", {0, 1}), Column{"Y", ColumnKind::Categorical, {0, 1}, {"no", "yes"}}});
  EXPECT_EQ(total_variation(binary, "Y", "A", 0.0), -1.0);
  const Dataset labels({numeric("A", {0, 1, 1}), Column{"Y", ColumnKind::Categorical, {0, 1, 2}, {"lo", "mid", "hi"}}});
  EXPECT_EQ(code_of([&] { total_variation(labels, "Y", "A", 0.0); }), ErrorCode::NonNumericOutcome);
}

TEST(Adaptation, FormulaParsing) {
  const auto all = Formula::parse("score ~ .");
  EXPECT_EQ(all.outcome, "score");
  EXPECT_TRUE(all.predictors.empty());
  const auto some = Formula::parse(" y~a + b ");
  EXPECT_EQ(some.predictors, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(some.to_string(), "y ~ a + b");
  EXPECT_EQ(Formula::parse("y").to_string(), "y ~ .");
  EXPECT_THROW(Formula::parse("~ a"), Error);
  EXPECT_THROW(Formula::parse("y ~ a + "), Error);
}

TEST(Adaptation, LinearChainMatchesOracle) {
  const auto scm = linear_chain_scm(41);
  const auto sim = simulate(scm, 5000);
  const auto data = with_baseline(sim.data, "A");
  const auto res = adapt(data, std::nullopt, spec_for(scm, "linear"));
  const auto truth = oracle_counterfactual(scm, sim.data, sim.latent, 0.0);
  for (const auto& v : {"E", "T", "Y"}) {
    const auto& got = res.train.adapted.column(v).values;
    const auto& want = truth.column(v).values;
    EXPECT_LT(mae(got, want), 0.05 * sd(want)) << v;
  }
  // E = 2A + U, so a treated row moves down by exactly 2
  const auto& a = data.column("A").values;
  for (std::size_t r = 0; r < 50; ++r)
    if (a[r] == 1.0)
      EXPECT_NEAR(res.train.adapted.column("E").values[r], data.column("E").values[r] - 2.0, 0.1);
}

TEST(Adaptation, ForestChainMatchesOracle) {
  const auto scm = linear_chain_scm(43);
  const auto sim = simulate(scm, 2000);
  const auto res = adapt(with_baseline(sim.data, "A"), std::nullopt, spec_for(scm, "forest"));
  const auto truth = oracle_counterfactual(scm, sim.data, sim.latent, 0.0);
  for (const auto& v : {"E", "T", "Y"}) {
    const auto& want = truth.column(v).values;
    EXPECT_LT(mae(res.train.adapted.column(v).values, want), 0.15 * sd(want)) << v;
  }
}

TEST(Adaptation, ModelKeysAreAdaptedDescendants) {
  const auto scm = uni_like_scm(5);
  const auto data = with_baseline(simulate(scm, 300).data, "gender");
  auto spec = spec_for(scm, "linear");
  const auto plain = adapt(data, std::nullopt, spec);
  EXPECT_EQ(plain.adapt_order, (std::vector<std::string>{"edu", "test", "score"}));
  EXPECT_EQ(plain.models.size(), 3u);

  spec.resolving = {"test"};
  const auto resolved = adapt(data, std::nullopt, spec);
  EXPECT_EQ(resolved.adapt_order, (std::vector<std::string>{"edu", "score"}));
  EXPECT_FALSE(resolved.models.contains("test"));
  EXPECT_TRUE(same_column(resolved.train.adapted, data, "test"));
  // the outcome's model still sees the natural resolving value
  const auto& parents = resolved.models.at("score").parents();
  EXPECT_NE(std::find(parents.begin(), parents.end(), "test"), parents.end());
}

TEST(Adaptation, TopOrderUsesAllPredecessors) {
  const auto scm = uni_like_scm(6);
  const auto data = with_baseline(simulate(scm, 300).data, "gender");
  auto spec = spec_for(scm, "linear");
  spec.mode = TopOrderMode{{"gender", "edu", "test", "score"}};
  const auto res = adapt(data, std::nullopt, spec);
  EXPECT_EQ(res.adapt_order, (std::vector<std::string>{"edu", "test", "score"}));
  EXPECT_EQ(res.models.at("score").parents(), (std::vector<std::string>{"gender", "edu", "test"}));
  EXPECT_EQ(res.models.at("edu").parents(), (std::vector<std::string>{"gender"}));
}

TEST(Adaptation, FormulaRestrictsOutcomeModel) {
  const auto scm = uni_like_scm(7);
  const auto data = with_baseline(simulate(scm, 300).data, "gender");
  auto spec = spec_for(scm, "linear");
  spec.mode = TopOrderMode{{"gender", "edu", "test", "score"}};
  spec.formula = Formula::parse("score ~ test");
  const auto res = adapt(data, std::nullopt, spec);
  EXPECT_EQ(res.models.at("score").parents(), (std::vector<std::string>{"gender", "test"}));
  EXPECT_EQ(res.models.at("test").parents(), (std::vector<std::string>{"gender", "edu"}));
}

TEST(Adaptation, ConfoundingAddsExtendedParents) {
  const auto scm = uni_like_scm(8);
  const auto data = with_baseline(simulate(scm, 300).data, "gender");
  auto spec = spec_for(scm, "linear");
  BoolMatrix cfd(4);
  cfd.set(2, 3);
  cfd.set(3, 2);
  std::get<GraphMode>(spec.mode).confounding = NamedMatrix{scm.graph.variables(), cfd};
  const auto res = adapt(data, std::nullopt, spec);
  EXPECT_EQ(res.models.at("score").parents(), (std::vector<std::string>{"gender", "edu", "test"}));
}

TEST(Adaptation, Errors) {
  const auto scm = uni_like_scm(9);
  const auto data = with_baseline(simulate(scm, 100).data, "gender");

  auto spec = spec_for(scm, "linear");
  BoolMatrix cfd(4);
  cfd.set(0, 1);
  cfd.set(1, 0);
  std::get<GraphMode>(spec.mode).confounding = NamedMatrix{scm.graph.variables(), cfd};
  EXPECT_EQ(code_of([&] { adapt(data, std::nullopt, spec); }), ErrorCode::NotIdentifiable);

  EXPECT_EQ(code_of([&] { adapt(data.without_column("test"), std::nullopt, spec_for(scm, "linear")); }),
            ErrorCode::SchemaMismatch);
  EXPECT_EQ(code_of([&] { adapt(data, data.without_column("edu"), spec_for(scm, "linear")); }),
            ErrorCode::SchemaMismatch);

  auto bad_level = spec_for(scm, "linear");
  bad_level.baseline = "7";
  EXPECT_EQ(code_of([&] { adapt(data, std::nullopt, bad_level); }), ErrorCode::Level);

  auto bad_backend = spec_for(scm, "linear");
  bad_backend.backend.kind = "nope";
  EXPECT_THROW(adapt(data, std::nullopt, bad_backend), Error);
}

TEST(Adaptation, TestRowsAreAdaptedJointly) {
  const auto scm = uni_like_scm(10);
  const auto sim = simulate(scm, 400);
  const auto all = with_baseline(sim.data, "gender");
  std::vector<std::size_t> head(200), tail(200);
  for (std::size_t i = 0; i < 200; ++i) head[i] = i, tail[i] = 200 + i;
  const auto train = all.select_rows(head);
  const auto test = all.select_rows(tail).without_column("score");
  const auto res = adapt(train, test, spec_for(scm, "linear"));
  ASSERT_TRUE(res.test.has_value());
  EXPECT_EQ(res.test->adapted.n_rows(), 200u);
  EXPECT_FALSE(res.test->adapted.find("score").has_value());
  EXPECT_FALSE(res.tv_after_test.has_value());
  const auto& g = test.column("gender").values;
  for (std::size_t r = 0; r < 200; ++r) {
    if (g[r] != 0.0) continue;
    EXPECT_EQ(res.test->adapted.column("edu").values[r], test.column("edu").values[r]);
    EXPECT_EQ(res.test->adapted.column("test").values[r], test.column("test").values[r]);
  }
  const auto with_outcome = adapt(train, all.select_rows(tail), spec_for(scm, "linear"));
  ASSERT_TRUE(with_outcome.tv_after_test.has_value());
  EXPECT_LT(std::abs(*with_outcome.tv_after_test), std::abs(*with_outcome.tv_before_test));
}

TEST(Adaptation, PredictReproducesTrainingAndKeepsBaseline) {
  const auto scm = uni_like_scm(11);
  const auto data = with_baseline(simulate(scm, 300).data, "gender");
  for (const std::string backend : {"linear", "forest"}) {
    auto spec = spec_for(scm, backend);
    spec.backend.forest.n_trees = 50;
    const auto res = adapt(data, std::nullopt, spec);
    const auto again = predict(res, data);
    for (const auto& v : {"edu", "test", "score"}) {
      const auto& a = again.adapted.column(v).values;
      const auto& b = res.train.adapted.column(v).values;
      for (std::size_t r = 0; r < a.size(); ++r) ASSERT_NEAR(a[r], b[r], 1e-9) << backend << " " << v << " " << r;
    }

    std::vector<std::size_t> women;
    for (std::size_t r = 0; r < data.n_rows(); ++r)
      if (data.column("gender").values[r] == 0.0) women.push_back(r);
    const auto baseline_only = data.select_rows(women);
    EXPECT_EQ(to_csv(predict(res, baseline_only).adapted), to_csv(baseline_only));

    const auto no_outcome = predict(res, data.without_column("score"));
    EXPECT_FALSE(no_outcome.adapted.find("score").has_value());
    EXPECT_EQ(no_outcome.adapted.column("test").values, res.train.adapted.column("test").values);

    EXPECT_EQ(code_of([&] { predict(res, data.without_column("edu")); }), ErrorCode::SchemaMismatch);
  }
  auto res = adapt(data, std::nullopt, spec_for(scm, "linear"));
  res.models.erase("test");
  EXPECT_EQ(code_of([&] { predict(res, data); }), ErrorCode::ModelMissing);
}

TEST(Adaptation, DensityAlignsAfterAdaptation) {
  std::map<std::string, Mechanism> m;
  m["A"] = BernoulliMechanism{0.0, {}};
  m["Y"] = LinearMechanism{0.0, {{"A", 2.0}}, NoiseKind::Gaussian, 1.0};
  const auto scm = ScmSpec::make({"A", "Y"}, "A", "Y", std::move(m), 3);
  const auto data = with_baseline(simulate(scm, 2000).data, "A");
  const auto res = adapt(data, std::nullopt, spec_for(scm, "forest"));

  auto curves = [](const Dataset& t) {
    std::array<std::vector<double>, 2> out;
    std::array<std::vector<double>, 2> xs;
    for (std::size_t r = 0; r < t.n_rows(); ++r) {
      const auto g = static_cast<std::size_t>(t.column("group").values[r]);
      out[g].push_back(t.column("density").values[r]);
      xs[g].push_back(t.column("x").values[r]);
    }
    EXPECT_EQ(xs[0], xs[1]);
    EXPECT_EQ(out[0].size(), 64u);
    return std::make_pair(xs[0], out);
  };

  const auto [x_after, after] = curves(density_summary(res, When::After));
  double gap = 0.0;
  for (std::size_t k = 0; k < 64; ++k) gap = std::max(gap, std::abs(after[0][k] - after[1][k]));
  EXPECT_LT(gap, 0.1);

  const auto [x_before, before] = curves(density_summary(res, When::Before));
  auto mode_of = [&](const std::vector<double>& d) {
    return x_before[static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin())];
  };
  EXPECT_NEAR(mode_of(before[1]) - mode_of(before[0]), 2.0, 0.2);
}

TEST(Adaptation, DensityOfConstantOutcome) {
  const Dataset ds({numeric("A", {0, 1, 0, 1}), numeric("Y", {3, 3, 3, 3})});
  const auto table = density_table(select_baseline(ds, "A", std::nullopt), "Y");
  ASSERT_EQ(table.n_rows(), 2u);
  EXPECT_EQ(table.column("x").values, (std::vector<double>{3, 3}));
  EXPECT_EQ(table.column("density").values, (std::vector<double>{1, 1}));
}

TEST(Adaptation, ResolvingKeepsMoreDisparity) {
  const auto scm = uni_like_scm(12);
  const auto data = with_baseline(simulate(scm, 1000).data, "gender");
  auto spec = spec_for(scm, "linear");
  const double plain = adapt(data, std::nullopt, spec).tv_after;
  spec.resolving = {"test"};
  const auto resolved = adapt(data, std::nullopt, spec);
  EXPECT_GT(std::abs(resolved.tv_after), std::abs(plain));
  EXPECT_LT(std::abs(resolved.tv_after), std::abs(resolved.tv_before));
}

// ---- properties over random SCMs --------------------------------------------

TEST(AdaptationProperties, BaselineRowsUnchanged) {
  const auto bad = baseline_rows_unchanged(200, 2001);
  EXPECT_FALSE(bad) << *bad;
}

TEST(AdaptationProperties, NonDescendantsUnchanged) {
  const auto bad = non_descendants_unchanged(200, 2002);
  EXPECT_FALSE(bad) << *bad;
}

TEST(AdaptationProperties, ResolvingColumnsUnchanged) {
  const auto bad = resolving_unchanged(200, 2003);
  EXPECT_FALSE(bad) << *bad;
}

TEST(AdaptationProperties, RowOrderInvariance) {
  const auto bad = row_order_invariant(200, 2004);
  EXPECT_FALSE(bad) << *bad;
}

TEST(AdaptationProperties, EmptyConfoundingMatchesMarkovian) {
  const auto bad = empty_confounding_matches_markovian(200, 2005);
  EXPECT_FALSE(bad) << *bad;
}

TEST(AdaptationProperties, GroupsAlignAfterAdaptation) {
  const auto [worst, at] = worst_group_alignment(5, 2006);
  EXPECT_LT(worst, 0.1) << at;
}

TEST(AdaptationProperties, DeterministicAcrossThreads) {
  const auto scm = uni_like_scm(13);
  const auto data = with_baseline(simulate(scm, 500).data, "gender");
  auto spec = spec_for(scm, "forest");
  spec.backend.forest.n_trees = 60;
  set_max_threads(1);
  const auto one = to_csv(adapt(data, std::nullopt, spec).train.adapted);
  set_max_threads(4);
  const auto four = to_csv(adapt(data, std::nullopt, spec).train.adapted);
  set_max_threads(0);
  EXPECT_EQ(one, four);
}
