#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <queue>
#include <random>

#include "generators.hpp"
#include "test_util.hpp"
#include "vidharness/knowledge_graph.hpp"

using namespace vidharness;
using namespace vidharness::graph;
using parsing::ParsedVideoOutput;

namespace {

using Outputs = std::vector<std::pair<std::string, ParsedVideoOutput>>;

ParsedVideoOutput output_with(std::size_t keyframes, std::mt19937_64& rng) {
    ParsedVideoOutput o{"summary text", {}, true};
    for (std::size_t i = 0; i < keyframes; ++i) o.keyframes.push_back(testgen::random_keyframe(rng));
    return o;
}

// Weighted digraph with every ordered pair possibly present.
struct RandomGraph {
    EvalGraph g;
    EdgeWeights w;
};

RandomGraph random_graph(std::mt19937_64& rng, std::size_t n, double density) {
    RandomGraph r;
    for (std::size_t i = 0; i < n; ++i) r.g.add_node({"n" + std::to_string(i), "", "gray", 1});
    std::bernoulli_distribution edge(density);
    std::uniform_int_distribution<int> weight(0, 10);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            if (a == b || !edge(rng)) continue;
            const auto s = "n" + std::to_string(a);
            const auto t = "n" + std::to_string(b);
            r.g.add_edge(s, t);
            r.w[{s, t}] = weight(rng);
        }
    }
    return r;
}

// Bellman-style relaxation to a fixed point: exact for non-negative weights.
std::map<std::string, double> relaxation_oracle(const RandomGraph& r, const std::string& source) {
    std::map<std::string, double> d;
    for (const auto& n : r.g.nodes()) d[n.id] = kUnreachable;
    d[source] = 0;
    for (std::size_t round = 0; round < r.g.node_count(); ++round) {
        for (const auto& e : r.g.edges()) {
            const double cand = d[e.source] + r.w.at({e.source, e.target});
            if (cand < d[e.target]) d[e.target] = cand;
        }
    }
    return d;
}

std::map<std::string, double> bfs_hops(const EvalGraph& g, const std::string& center) {
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& e : g.edges()) {
        adj[e.source].push_back(e.target);
        adj[e.target].push_back(e.source);
    }
    std::map<std::string, double> d{{center, 0}};
    std::queue<std::string> q;
    q.push(center);
    while (!q.empty()) {
        const auto u = q.front();
        q.pop();
        for (const auto& v : adj[u]) {
            if (d.count(v)) continue;
            d[v] = d[u] + 1;
            q.push(v);
        }
    }
    return d;
}

}  // namespace

TEST(Build, SnowWhiteShape) {
    const auto gemini = parsing::parse_video_output(testutil::read_file(testutil::source_dir() / "tests/fixtures/snow_white_gemini.txt"));
    const auto qwen = parsing::parse_video_output(testutil::read_file(testutil::source_dir() / "tests/fixtures/snow_white_qwen.txt"));
    const auto g = build_comparison_graph({{"Gemini-2-Flash", gemini}, {"Qwen-7B", qwen}});
    EXPECT_EQ(g.node_count(), 2u + 2u * 2 + 16 + 6);
    EXPECT_EQ(g.edge_count(), 3u * 2 + 2u * 22);
    EXPECT_EQ(g.node(kKeyFramesNode).size, 800);
    EXPECT_EQ(g.node(kKeyFramesNode).color, "gray");
    EXPECT_EQ(g.node(kVideoSummaryNode).size, 600);
    EXPECT_EQ(g.node("Gemini-2-Flash").color, "blue");
    EXPECT_EQ(g.node("Qwen-7B").color, "red");
    EXPECT_EQ(g.node(keyframe_node_id("Qwen-7B", 0)).size, 400);
    EXPECT_EQ(g.node(keyframe_node_id("Gemini-2-Flash", 1)).label, "(00:42, Snow White in rags looking at her stepmother)");
}

TEST(Build, SingleModelWithoutKeyframes) {
    const auto g = build_comparison_graph({{"M", ParsedVideoOutput{"s", {}, true}}});
    EXPECT_EQ(g.node_count(), 4u);
    EXPECT_EQ(g.edge_count(), 3u);
}

TEST(Build, Errors) {
    EXPECT_THROW(build_comparison_graph({}), NoValidOutputs);
    EXPECT_THROW(build_comparison_graph({{"M", ParsedVideoOutput{}}}), NoValidOutputs);
    const ParsedVideoOutput ok{"s", {}, true};
    EXPECT_THROW(build_comparison_graph({{"M", ok}, {"M", ok}}), DuplicateModelName);
    EXPECT_THROW(build_comparison_graph({{"KeyFrames", ok}}), DuplicateModelName);
    // Invalid outputs are skipped, not fatal.
    EXPECT_EQ(build_comparison_graph({{"M", ok}, {"N", ParsedVideoOutput{}}}).node_count(), 4u);
}

TEST(Build, ClosedFormOverGeneratedOutputs) {
    std::mt19937_64 rng(9);
    for (int c = 0; c < 100; ++c) {
        const std::size_t models = 1 + rng() % 5;
        Outputs outs;
        std::size_t k = 0;
        for (std::size_t m = 0; m < models; ++m) {
            const std::size_t n = rng() % 12;
            k += n;
            outs.emplace_back("model" + std::to_string(m), output_with(n, rng));
        }
        const auto g = build_comparison_graph(outs);
        EXPECT_EQ(g.node_count(), 2 + 2 * models + k);
        EXPECT_EQ(g.edge_count(), 3 * models + 2 * k);
        if (models == 1) {
            EXPECT_EQ(g.node_count(), 4 + k);
        }
    }
}

TEST(Build, IdenticalCaptionsStayApart) {
    const ParsedVideoOutput o{"s", {{5, "same"}}, true};
    const auto g = build_comparison_graph({{"A", o}, {"B", o}});
    EXPECT_EQ(g.node_count(), 2u + 4u + 2u);
}

TEST(Layout, TwoNodesSettleAtK) {
    EvalGraph g;
    g.add_node({"a", "a", "gray", 1});
    g.add_node({"b", "b", "gray", 1});
    g.add_edge("a", "b");
    const LayoutParams p;
    const auto pos = fr_layout(g, p);
    const double d = std::hypot(pos.at("a").x - pos.at("b").x, pos.at("a").y - pos.at("b").y);
    const double k = optimal_distance(p, 2);
    EXPECT_DOUBLE_EQ(k, std::sqrt(0.5));
    EXPECT_NEAR(d, k, 0.01 * k);
}

TEST(Layout, DeterministicAndSeedSensitive) {
    std::mt19937_64 rng(2);
    const auto g = build_comparison_graph({{"M", output_with(8, rng)}});
    LayoutParams p;
    EXPECT_EQ(fr_layout(g, p), fr_layout(g, p));
    p.seed = 43;
    EXPECT_NE(fr_layout(g, p), fr_layout(g, LayoutParams{}));
}

TEST(Layout, SingleNodeAtCenter) {
    EvalGraph g;
    g.add_node({"only", "only", "gray", 1});
    LayoutParams p;
    p.area_A = 4.0;
    const auto pos = fr_layout(g, p);
    EXPECT_DOUBLE_EQ(pos.at("only").x, 1.0);
    EXPECT_DOUBLE_EQ(pos.at("only").y, 1.0);
}

TEST(Layout, RejectsBadParams) {
    EvalGraph g;
    g.add_node({"a", "a", "gray", 1});
    LayoutParams p;
    p.cooling = 1.0;
    EXPECT_THROW(fr_layout(g, p), std::invalid_argument);
    p = {};
    p.C = 0;
    EXPECT_THROW(fr_layout(g, p), std::invalid_argument);
    EXPECT_THROW(fr_layout(EvalGraph{}, LayoutParams{}), std::invalid_argument);
}

TEST(Dijkstra, SmallCases) {
    EvalGraph g;
    g.add_node({"A", "A", "gray", 1});
    g.add_node({"B", "B", "gray", 1});
    g.add_edge("A", "B");
    EXPECT_EQ(dijkstra(g, "A"), (std::map<std::string, double>{{"A", 0}, {"B", 1}}));

    EvalGraph back;
    back.add_node({"A", "A", "gray", 1});
    back.add_node({"B", "B", "gray", 1});
    back.add_edge("B", "A");
    EXPECT_EQ(dijkstra(back, "A").at("B"), kUnreachable);
    EXPECT_THROW(dijkstra(g, "Z"), UnknownSource);
    EXPECT_THROW(dijkstra(g, "A", {{{"A", "B"}, -1.0}}), NegativeWeight);
    EXPECT_THROW(dijkstra(g, "A", {{{"A", "B"}, std::nan("")}}), NegativeWeight);
    EXPECT_THROW(dijkstra(g, "A", {{{"B", "A"}, 1.0}}), std::invalid_argument);
}

TEST(Dijkstra, MatchesRelaxationAndTriangleInequality) {
    std::mt19937_64 rng(21);
    for (int c = 0; c < 200; ++c) {
        const auto r = random_graph(rng, 2 + rng() % 40, 0.15);
        const auto source = "n" + std::to_string(rng() % r.g.node_count());
        const auto d = dijkstra(r.g, source, r.w);
        EXPECT_EQ(d, relaxation_oracle(r, source));
        for (const auto& e : r.g.edges()) {
            EXPECT_LE(d.at(e.target), d.at(e.source) + r.w.at({e.source, e.target}));
        }
    }
}

TEST(Metrics, ThreeFourFive) {
    EvalGraph g;
    g.add_node({"a", "a", "gray", 1});
    g.add_node({"b", "b", "gray", 1});
    const Positions pos{{"a", {"a", 0, 0}}, {"b", {"b", 3, 4}}};
    const auto m = graph_metrics(g, pos, "a");
    EXPECT_DOUBLE_EQ(m.mean_pairwise_distance, 5.0);
    EXPECT_EQ(m.unreachable, (std::set<std::string>{"b"}));
    EXPECT_THROW(graph_metrics(g, pos, "zz"), UnknownCenter);
    EXPECT_THROW(graph_metrics(g, {{"a", {"a", 0, 0}}}, "a"), std::invalid_argument);
}

TEST(Metrics, KeyframesOneHopFromKeyFrames) {
    std::mt19937_64 rng(4);
    const auto g = build_comparison_graph({{"M", output_with(7, rng)}});
    const auto m = graph_metrics(g, fr_layout(g, {}), kKeyFramesNode);
    for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(m.distances_to_center.at(keyframe_node_id("M", i)), 1.0);
    EXPECT_TRUE(m.unreachable.empty());
    EXPECT_EQ(m.node_count, 11u);
}

TEST(Metrics, HopsMatchBfsAndTranslationInvariance) {
    std::mt19937_64 rng(8);
    for (int c = 0; c < 100; ++c) {
        const auto r = random_graph(rng, 1 + rng() % 15, 0.12);
        Positions pos;
        Positions shifted;
        std::uniform_real_distribution<double> u(-5, 5);
        for (const auto& n : r.g.nodes()) {
            const double x = u(rng);
            const double y = u(rng);
            pos[n.id] = {n.id, x, y};
            shifted[n.id] = {n.id, x + 17.25, y - 3.5};
        }
        const auto m = graph_metrics(r.g, pos, "n0");
        EXPECT_EQ(m.distances_to_center, bfs_hops(r.g, "n0"));
        EXPECT_EQ(m.distances_to_center.size() + m.unreachable.size(), r.g.node_count());
        EXPECT_NEAR(graph_metrics(r.g, shifted, "n0").mean_pairwise_distance, m.mean_pairwise_distance, 1e-9);
    }
}

TEST(Export, DotAndJsonRoundTrip) {
    std::mt19937_64 rng(6);
    auto o = output_with(5, rng);
    o.summary = "A \"quoted\" summary\nwith a newline";
    const auto g = build_comparison_graph({{"M", o}, {"N", output_with(2, rng)}});
    const auto pos = fr_layout(g, {});
    const auto dot = to_dot(g, pos);
    std::size_t statements = 0;
    std::size_t arrows = 0;
    std::istringstream in(dot);
    for (std::string line; std::getline(in, line);) {
        if (line.find(" -> ") != std::string::npos) {
            ++arrows;
        } else if (line.find("[label=") != std::string::npos) {
            ++statements;
        }
    }
    EXPECT_EQ(statements, g.node_count());
    EXPECT_EQ(arrows, g.edge_count());
    EXPECT_EQ(to_dot(g, pos), dot);

    const auto [g2, pos2] = graph_from_json(nlohmann::json::parse(to_json(g, pos).dump()));
    EXPECT_EQ(g2, g);
    EXPECT_EQ(pos2, pos);
    EXPECT_THROW(graph_from_json(nlohmann::json::parse(R"({"nodes":[{"id":"a"}],"edges":[]})")), SchemaError);
}

TEST(Export, WritesFiles) {
    testutil::TempDir dir;
    const auto g = build_comparison_graph({{"M", ParsedVideoOutput{"s", {}, true}}});
    const auto files = export_graph(g, fr_layout(g, {}), dir / "graphs", "video");
    ASSERT_EQ(files.size(), 2u);
    EXPECT_NE(testutil::read_file(files[0]).find("digraph"), std::string::npos);
    testutil::write_file(dir / "blocker", "x");
    EXPECT_THROW(export_graph(g, fr_layout(g, {}), dir / "blocker/sub", "v"), IoError);
}
