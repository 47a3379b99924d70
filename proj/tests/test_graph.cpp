#include <gtest/gtest.h>

#include "fairadapt/error.hpp"
#include "fairadapt/graph.hpp"
#include "properties.hpp"

using namespace fairadapt;
using namespace fairadapt::testing;

namespace {

BoolMatrix matrix(std::size_t n, std::initializer_list<std::pair<std::size_t, std::size_t>> edges) {
  BoolMatrix m(n);
  for (auto [i, j] : edges) m.set(i, j);
  return m;
}

const std::vector<std::string> kUni = {"gender", "edu", "test", "score"};

BoolMatrix uni_edges() { return matrix(4, {{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 3}}); }

CausalGraph uni(BoolMatrix cfd = {}, std::vector<std::string> resolving = {}) {
  return CausalGraph::build(kUni, uni_edges(), std::move(cfd), "gender", "score", std::move(resolving));
}

BoolMatrix test_score_cfd() { return matrix(4, {{2, 3}, {3, 2}}); }

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Usage;
}

}  // namespace

TEST(Graph, UniGraphBuilds) {
  const auto g = uni();
  EXPECT_EQ(g.size(), 4u);
  EXPECT_TRUE(g.is_markovian());
  EXPECT_EQ(topological_order(g), kUni);
}

TEST(Graph, Errors) {
  EXPECT_EQ(code_of([] { CausalGraph::build({"A", "B"}, matrix(2, {{0, 1}, {1, 0}}), {}, "A", "B"); }),
            ErrorCode::Cycle);
  EXPECT_EQ(code_of([] { CausalGraph::build({"A"}, matrix(1, {{0, 0}}), {}, "A", "A"); }), ErrorCode::Cycle);
  EXPECT_EQ(code_of([] { uni(matrix(4, {{2, 3}})); }), ErrorCode::Asymmetry);
  EXPECT_EQ(code_of([] { uni(matrix(4, {{1, 1}})); }), ErrorCode::Asymmetry);
  EXPECT_EQ(code_of([] { CausalGraph::build(kUni, uni_edges(), {}, "sex", "score"); }), ErrorCode::Name);
  EXPECT_EQ(code_of([] { CausalGraph::build(kUni, uni_edges(), {}, "gender", "y"); }), ErrorCode::Name);
  EXPECT_EQ(code_of([] { uni({}, {"nope"}); }), ErrorCode::Name);
  EXPECT_EQ(code_of([] { uni({}, {"gender"}); }), ErrorCode::Resolving);
  EXPECT_EQ(code_of([] { CausalGraph::build({"a", "a"}, BoolMatrix(2), {}, "a", "a"); }), ErrorCode::Name);
  EXPECT_EQ(code_of([] { CausalGraph::build(kUni, BoolMatrix(3), {}, "gender", "score"); }),
            ErrorCode::SchemaMismatch);
}

TEST(Graph, TopologicalOrderTieBreak) {
  const auto edgeless = CausalGraph::build({"c", "a", "b"}, BoolMatrix(3), {}, "c", "b");
  EXPECT_EQ(topological_order(edgeless), (std::vector<std::string>{"c", "a", "b"}));
  const auto chain = CausalGraph::build({"C", "B", "A"}, matrix(3, {{2, 1}, {1, 0}}), {}, "A", "C");
  EXPECT_EQ(topological_order(chain), (std::vector<std::string>{"A", "B", "C"}));
}

TEST(Graph, Descendants) {
  const auto g = uni();
  EXPECT_EQ(descendants(g, "gender"), (std::vector<std::string>{"edu", "test", "score"}));
  EXPECT_TRUE(descendants(g, "score").empty());
  const auto chain = CausalGraph::build({"A", "B", "C"}, matrix(3, {{0, 1}, {1, 2}}), {}, "A", "C");
  EXPECT_EQ(descendants(chain, "A"), (std::vector<std::string>{"B", "C"}));
  EXPECT_THROW(descendants(g, "zzz"), Error);
}

TEST(Graph, CComponents) {
  EXPECT_EQ(c_components(uni(test_score_cfd())),
            (std::vector<std::vector<std::string>>{{"gender"}, {"edu"}, {"test", "score"}}));
  EXPECT_EQ(c_components(uni()).size(), 4u);
  const auto g = CausalGraph::build({"A", "B", "C", "D"}, BoolMatrix(4), matrix(4, {{0, 1}, {1, 0}, {1, 2}, {2, 1}}),
                                    "A", "D");
  EXPECT_EQ(c_components(g), (std::vector<std::vector<std::string>>{{"A", "B", "C"}, {"D"}}));
}

TEST(Graph, ExtendedParents) {
  EXPECT_EQ(extended_parents(uni(), "score"), (std::vector<std::string>{"edu", "test"}));
  EXPECT_EQ(extended_parents(uni(test_score_cfd()), "score"), (std::vector<std::string>{"gender", "edu", "test"}));
  EXPECT_TRUE(extended_parents(uni(), "gender").empty());
  EXPECT_THROW(extended_parents(uni(), "zzz"), Error);
}

TEST(Graph, Identifiability) {
  EXPECT_TRUE(check_identifiable(uni()));
  EXPECT_TRUE(check_identifiable(uni(test_score_cfd())));

  const auto bad = CausalGraph::build({"gender", "edu"}, matrix(2, {{0, 1}}), matrix(2, {{0, 1}, {1, 0}}), "gender",
                                      "edu");
  const auto verdict = check_identifiable(bad);
  EXPECT_FALSE(verdict);
  EXPECT_EQ(verdict.from, "gender");
  EXPECT_EQ(verdict.to, "edu");
  EXPECT_EQ(code_of([&] { require_identifiable(bad); }), ErrorCode::NotIdentifiable);

  // sex <-> dem confounded, but dem is not a child of sex
  const auto census = CausalGraph::build({"sex", "dem", "edu", "sal"}, matrix(4, {{0, 2}, {1, 2}, {2, 3}, {0, 3}}),
                                         matrix(4, {{0, 1}, {1, 0}}), "sex", "sal");
  EXPECT_TRUE(check_identifiable(census));

  // a resolving variable confounded with its child
  EXPECT_FALSE(check_identifiable(uni(test_score_cfd(), {"test"})));
}

TEST(Graph, FromOrdering) {
  const auto g = CausalGraph::from_ordering({"a", "b", "c"}, "a", "c");
  EXPECT_EQ(extended_parents(g, "c"), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(descendants(g, "a"), (std::vector<std::string>{"b", "c"}));
  EXPECT_EQ(code_of([] { CausalGraph::from_ordering({"a", "b", "a"}, "a", "b"); }), ErrorCode::Name);
}

TEST(Graph, Dot) {
  auto count = [](const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
    return n;
  };
  const auto plain = export_dot(uni());
  EXPECT_EQ(count(plain, " -> "), 5u);
  EXPECT_EQ(count(plain, "dashed"), 0u);
  const auto confounded = export_dot(uni(test_score_cfd()));
  EXPECT_EQ(count(confounded, " -> "), 6u);
  EXPECT_EQ(count(confounded, "style=dashed"), 1u);
  const auto resolving = export_dot(uni({}, {"test"}));
  EXPECT_NE(resolving.find("\"test\" [color=red"), std::string::npos);
  EXPECT_EQ(export_dot(uni()), plain);
}

TEST(Graph, MatrixCsv) {
  const std::string text = ",a,b\na,0,1\nb,0,0\n";
  const auto m = parse_matrix_csv(text);
  EXPECT_EQ(m.names, (std::vector<std::string>{"a", "b"}));
  EXPECT_TRUE(m.cells(0, 1));
  EXPECT_EQ(format_matrix_csv(m), text);
  EXPECT_THROW(parse_matrix_csv(",a,b\nb,0,1\na,0,0\n"), Error);
  EXPECT_THROW(parse_matrix_csv(",a,b\na,0,2\nb,0,0\n"), Error);
  EXPECT_THROW(parse_matrix_csv(",a,b\na,0,1\n"), Error);
}

// Properties on 1000 random graphs of at most 8 nodes, against brute force.
TEST(GraphProperties, RandomGraphsAgreeWithBruteForce) {
  const auto bad = graph_oracles(1000, 12345);
  EXPECT_FALSE(bad) << *bad;
}

TEST(GraphProperties, MarkovianExtendedParentsAreParents) {
  SplitMix rng(777);
  for (int trial = 0; trial < 1000; ++trial) {
    const RawGraph raw = random_graph(rng, 8, 0.4, 0.0);
    const auto names = raw.names();
    const auto g = CausalGraph::build(names, raw.directed(), raw.bidirected(), names[0], names[0]);
    for (std::size_t v = 0; v < raw.n; ++v) ASSERT_EQ(g.extended_parents(v), g.parents(v));
    ASSERT_TRUE(check_identifiable(g));
  }
}
