#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vidharness/errors.hpp"
#include "vidharness/parsing.hpp"

namespace vidharness::graph {

inline constexpr const char* kKeyFramesNode = "KeyFrames";
inline constexpr const char* kVideoSummaryNode = "VideoSummary";

struct Node {
    std::string id;
    std::string label;
    std::string color;
    int size = 1;

    friend bool operator==(const Node&, const Node&) = default;
};

struct Edge {
    std::string source;
    std::string target;

    friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Attributed digraph. Nodes and edges keep insertion order; duplicate
/// edges are dropped.
class EvalGraph {
public:
    /// Throws std::invalid_argument on a duplicate id or a non-positive size.
    void add_node(Node node);
    /// Throws std::invalid_argument when either endpoint is missing.
    void add_edge(const std::string& source, const std::string& target);

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    std::size_t node_count() const { return nodes_.size(); }
    std::size_t edge_count() const { return edges_.size(); }

    bool has_node(const std::string& id) const { return index_.count(id) > 0; }
    std::optional<std::size_t> index_of(const std::string& id) const;
    const Node& node(const std::string& id) const;

    /// Set semantics: insertion order does not matter.
    friend bool operator==(const EvalGraph& a, const EvalGraph& b);

private:
    std::vector<Node> nodes_;
    std::vector<Edge> edges_;
    std::map<std::string, std::size_t> index_;
    std::set<std::pair<std::size_t, std::size_t>> edge_set_;
};

struct ColorFamily {
    std::string model;
    std::string summary;
    std::string keyframe;
};

/// Blue family first, red second, then a fixed cycle.
ColorFamily color_family(std::size_t model_index);

std::string summary_node_id(const std::string& model);
std::string keyframe_node_id(const std::string& model, std::size_t index);

/// Per model: a model node tied to both core nodes, a summary node under
/// "VideoSummary", and one node per keyframe under "KeyFrames" and the
/// model's summary. Invalid outputs are skipped.
/// Throws NoValidOutputs when nothing valid remains and DuplicateModelName
/// when a model name repeats or collides with a generated id.
EvalGraph build_comparison_graph(
    const std::vector<std::pair<std::string, parsing::ParsedVideoOutput>>& outputs);

struct LayoutParams {
    double C = 1.0;
    double area_A = 1.0;
    /// Defaults to 50 * ceil(sqrt(n)).
    std::optional<int> iterations;
    std::uint64_t seed = 42;
    /// Defaults to 0.1 * sqrt(A).
    std::optional<double> initial_temperature;
    double cooling = 0.95;
};

/// k = C * sqrt(A / n).
double optimal_distance(const LayoutParams& params, std::size_t n);

struct NodePosition {
    std::string node_id;
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const NodePosition&, const NodePosition&) = default;
};

using Positions = std::map<std::string, NodePosition>;

/// Fruchterman-Reingold placement. Initial positions are drawn uniformly
/// over [0, sqrt(A)]^2 from the seed unless `initial` supplies them.
Positions fr_layout(const EvalGraph& graph, const LayoutParams& params, const Positions* initial = nullptr);

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

/// Adjacency-list core: out[u] = {(v, w)}. Unreachable entries are
/// kUnreachable.
std::vector<double> shortest_paths(const std::vector<std::vector<std::pair<std::size_t, double>>>& out,
                                   std::size_t source);

using EdgeWeights = std::map<std::pair<std::string, std::string>, double>;

/// Directed distances from `source`. Edges without a weight count 1.
/// Throws NegativeWeight (also for NaN) and UnknownSource.
std::map<std::string, double> dijkstra(const EvalGraph& graph, const std::string& source,
                                       const EdgeWeights& weights = {});

struct GraphMetrics {
    std::size_t node_count = 0;
    std::size_t edge_count = 0;
    double mean_pairwise_distance = 0.0;  // Euclidean, layout space
    double mean_pairwise_hops = 0.0;      // undirected, over connected pairs
    std::string center;
    std::map<std::string, double> distances_to_center;  // reachable nodes only
    std::set<std::string> unreachable;
};

/// Throws UnknownCenter, and std::invalid_argument when a node has no position.
GraphMetrics graph_metrics(const EvalGraph& graph, const Positions& positions, const std::string& center);

nlohmann::json to_json(const GraphMetrics& m);

std::string to_dot(const EvalGraph& graph, const Positions& positions, const std::string& name = "comparison");
nlohmann::json to_json(const EvalGraph& graph, const Positions& positions);
std::pair<EvalGraph, Positions> graph_from_json(const nlohmann::json& j);

/// Writes <stem>.dot and <stem>.json under `dir`. Throws IoError.
std::vector<std::filesystem::path> export_graph(const EvalGraph& graph, const Positions& positions,
                                                const std::filesystem::path& dir, const std::string& stem);

}  // namespace vidharness::graph
