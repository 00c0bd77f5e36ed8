#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "graphctrl/problem.hpp"

using namespace graphctrl;

namespace {

const char* star3_text = R"({
  "graph": {
    "edges": [
      {"id": "e1", "length": 1.0, "from": "v1", "to": "c"},
      {"id": "e2", "length": 1.0, "from": "v2", "to": "c"},
      {"id": "e3", "length": 1.0, "from": "v3", "to": "c"}
    ],
    "vertices": [
      {"id": "v1", "bc": "D"}, {"id": "v2", "bc": "D"}, {"id": "v3", "bc": "D"},
      {"id": "c", "bc": "NK"}
    ]
  },
  "control": {"description": "(x-1)^2 on e1", "potentials": {"e1": [1.0, -2.0, 1.0]}},
  "solver": {"num_modes": 30, "scan_resolution": 0.01, "horizon": 12.5,
             "tolerances": {"resonance": 1e-10}}
})";

std::string replace(std::string s, const std::string& from, const std::string& to)
{
    s.replace(s.find(from), from.size(), to);
    return s;
}

}  // namespace

TEST(LengthSet, IntegerRatioIsHit)
{
    std::vector<double> L{1.0, 2.0};
    auto r = check_length_set(L, 10, 1e-9);
    ASSERT_EQ(r.rational_hits.size(), 1u);
    EXPECT_EQ(r.rational_hits[0], (RationalHit{2, 1, 2, 1, 0.0}));
    EXPECT_FALSE(r.independence_flag);
}

TEST(LengthSet, ScaledSurdsHaveNoLowDenominatorRatio)
{
    const double pi = std::numbers::pi;
    std::vector<double> L{pi * std::sqrt(2.0), pi * std::sqrt(3.0)};
    auto r = check_length_set(L, 50, 1e-12);
    EXPECT_TRUE(r.rational_hits.empty());
    EXPECT_TRUE(r.independence_flag);
    EXPECT_NEAR(r.ratios[1][0], std::sqrt(1.5), 1e-15);
}

TEST(LengthSet, EqualLengthsHitWithUnitDenominator)
{
    std::vector<double> L{1.0, 1.0};
    auto r = check_length_set(L, 1, 1e-9);
    ASSERT_EQ(r.rational_hits.size(), 1u);
    EXPECT_EQ(r.rational_hits[0].k, 2u);
    EXPECT_EQ(r.rational_hits[0].j, 1u);
    EXPECT_EQ(r.rational_hits[0].p, 1);
    EXPECT_EQ(r.rational_hits[0].q, 1);
}

TEST(LengthSet, InvalidInputRejected)
{
    std::vector<double> empty;
    EXPECT_THROW(check_length_set(empty, 10, 1e-9), GraphError);
    std::vector<double> L{1.0};
    EXPECT_THROW(check_length_set(L, 0, 1e-9), GraphError);
    EXPECT_THROW(check_length_set(L, 10, 0.0), GraphError);
}

TEST(LengthSet, PermutationSymmetric)
{
    std::vector<double> L{1.0, 1.5, std::sqrt(2.0), 3.0, 0.75};
    auto base = check_length_set(L, 100, 1e-9);
    std::mt19937 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<std::size_t> perm{0, 1, 2, 3, 4};
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<double> P;
        for (auto i : perm) P.push_back(L[i]);
        auto r = check_length_set(P, 100, 1e-9);
        ASSERT_EQ(r.rational_hits.size(), base.rational_hits.size());
        auto key = [](const std::vector<double>& lens, const RationalHit& h) {
            return std::make_tuple(lens[h.k - 1], lens[h.j - 1], h.p, h.q);
        };
        std::vector<std::tuple<double, double, long, long>> a, b;
        for (const auto& h : base.rational_hits) a.push_back(key(L, h));
        for (const auto& h : r.rational_hits) b.push_back(key(P, h));
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        EXPECT_EQ(a, b);
    }
}

TEST(Problem, StarConfigLoads)
{
    auto p = parse_problem(star3_text);
    EXPECT_EQ(p.graph.topology(), Topology::Star);
    EXPECT_EQ(p.graph.num_edges(), 3u);
    std::size_t internal = 0;
    for (const auto& v : p.graph.vertices())
        if (v.bc == BoundaryCondition::NeumannKirchhoff) ++internal;
    EXPECT_EQ(internal, 1u);
    EXPECT_EQ(p.solver.num_modes, 30u);
    EXPECT_EQ(p.solver.horizon, 12.5);
    EXPECT_EQ(p.potentials()[0], (Polynomial{1.0, -2.0, 1.0}));
    EXPECT_TRUE(p.potentials()[1].is_zero());
}

TEST(Problem, DirichletOnInternalVertexRejected)
{
    auto text = replace(star3_text, R"({"id": "c", "bc": "NK"})", R"({"id": "c", "bc": "D"})");
    try {
        parse_problem(text);
        FAIL() << "expected ProblemError";
    } catch (const ProblemError& e) {
        EXPECT_NE(std::string(e.what()).find("NK required on internal vertex 'c'"), std::string::npos) << e.what();
    }
}

TEST(Problem, IntervalConfigClassified)
{
    auto p = parse_problem(R"({"graph": {"edges": [{"id": 1, "length": 1, "from": "a", "to": "b"}],
                                 "vertices": [{"id": "a", "bc": "D"}, {"id": "b", "bc": "D"}]}})");
    EXPECT_EQ(p.graph.topology(), Topology::Interval);
    EXPECT_EQ(p.graph.edges()[0].id, "1");
}

TEST(Problem, ParseErrorReportsLine)
{
    try {
        parse_problem("{\n  \"graph\": {\n    \"edges\": [,]\n  }\n}");
        FAIL();
    } catch (const ProblemError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(Problem, FieldErrorNamesField)
{
    auto text = replace(star3_text, R"("length": 1.0, "from": "v2")", R"("length": "one", "from": "v2")");
    try {
        parse_problem(text);
        FAIL();
    } catch (const ProblemError& e) {
        EXPECT_NE(std::string(e.what()).find("graph.edges[1].length"), std::string::npos) << e.what();
    }
}

TEST(Problem, NonPositiveLengthRejected)
{
    auto text = replace(star3_text, R"("length": 1.0, "from": "v3")", R"("length": -1.0, "from": "v3")");
    EXPECT_THROW(parse_problem(text), ProblemError);
}

TEST(Problem, PotentialOnUnknownEdgeRejected)
{
    auto text = replace(star3_text, R"({"e1": [1.0, -2.0, 1.0]})", R"({"e9": [1.0]})");
    EXPECT_THROW(parse_problem(text), ProblemError);
}

TEST(Problem, RoundTripIsFieldwiseEqual)
{
    auto p = parse_problem(star3_text);
    auto q = parse_problem(serialize(p));
    EXPECT_EQ(p, q);
    EXPECT_EQ(serialize(p), serialize(q));
}

TEST(Problem, RoundTripThroughFile)
{
    auto dir = std::filesystem::temp_directory_path() / "graphctrl_test_graph";
    std::filesystem::create_directories(dir);
    auto path = dir / "p.json";
    {
        std::ofstream out(path);
        out << serialize(parse_problem(star3_text));
    }
    EXPECT_EQ(load_problem(path.string()), parse_problem(star3_text));
    EXPECT_THROW(load_problem((dir / "missing.json").string()), ProblemError);
}

TEST(Graph, StarEdgesOrientedFromExternalVertex)
{
    MetricGraph g({{"a", 1.0, "c", "x"}, {"b", 2.0, "y", "c"}},
                  {{"x", BoundaryCondition::Neumann}, {"y", BoundaryCondition::Dirichlet}, {"c", BoundaryCondition::NeumannKirchhoff}});
    EXPECT_EQ(g.edges()[0].from, "x");
    EXPECT_EQ(g.external_bc(0), BoundaryCondition::Neumann);
    EXPECT_EQ(g.external_bc(1), BoundaryCondition::Dirichlet);
}

TEST(Graph, NeumannKirchhoffOnExternalRejected)
{
    EXPECT_THROW(MetricGraph::interval(1.0, BoundaryCondition::NeumannKirchhoff, BoundaryCondition::Dirichlet),
                 GraphError);
}

TEST(Graph, LoopsAtCenterClassified)
{
    MetricGraph g({{"loop", 1.0, "c", "c"}, {"leg", 1.0, "v", "c"}},
                  {{"v", BoundaryCondition::Dirichlet}, {"c", BoundaryCondition::NeumannKirchhoff}});
    EXPECT_EQ(g.topology(), Topology::StarWithLoops);
}
