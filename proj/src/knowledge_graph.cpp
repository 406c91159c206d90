#include "vidharness/knowledge_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <queue>
#include <random>
#include <sstream>

namespace vidharness::graph {

void EvalGraph::add_node(Node node) {
    if (node.size <= 0) throw std::invalid_argument("node size must be positive: " + node.id);
    if (index_.count(node.id) > 0) throw std::invalid_argument("duplicate node id: " + node.id);
    index_.emplace(node.id, nodes_.size());
    nodes_.push_back(std::move(node));
}

void EvalGraph::add_edge(const std::string& source, const std::string& target) {
    const auto s = index_of(source);
    const auto t = index_of(target);
    if (!s || !t) throw std::invalid_argument("edge endpoint missing: " + source + " -> " + target);
    if (edge_set_.emplace(*s, *t).second) edges_.push_back({source, target});
}

std::optional<std::size_t> EvalGraph::index_of(const std::string& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const Node& EvalGraph::node(const std::string& id) const {
    const auto i = index_of(id);
    if (!i) throw std::out_of_range("no node " + id);
    return nodes_[*i];
}

bool operator==(const EvalGraph& a, const EvalGraph& b) {
    if (a.nodes_.size() != b.nodes_.size() || a.edges_.size() != b.edges_.size()) return false;
    for (const auto& n : a.nodes_) {
        const auto i = b.index_of(n.id);
        if (!i || !(b.nodes_[*i] == n)) return false;
    }
    std::vector<Edge> ea = a.edges_;
    std::vector<Edge> eb = b.edges_;
    std::sort(ea.begin(), ea.end());
    std::sort(eb.begin(), eb.end());
    return ea == eb;
}

ColorFamily color_family(std::size_t model_index) {
    static const ColorFamily families[] = {
        {"blue", "darkblue", "lightblue"},         {"red", "darkred", "lightcoral"},
        {"green", "darkgreen", "lightgreen"},      {"orange", "darkorange", "moccasin"},
        {"purple", "indigo", "plum"},              {"brown", "saddlebrown", "burlywood"},
    };
    return families[model_index % std::size(families)];
}

std::string summary_node_id(const std::string& model) { return model + "::summary"; }

std::string keyframe_node_id(const std::string& model, std::size_t index) {
    return model + "#kf" + std::to_string(index);
}

EvalGraph build_comparison_graph(
    const std::vector<std::pair<std::string, parsing::ParsedVideoOutput>>& outputs) {
    std::set<std::string> names;
    for (const auto& [model, output] : outputs) {
        if (!names.insert(model).second) throw DuplicateModelName("model listed twice: " + model);
    }

    EvalGraph g;
    g.add_node({kKeyFramesNode, kKeyFramesNode, "gray", 800});
    g.add_node({kVideoSummaryNode, kVideoSummaryNode, "gray", 600});

    std::size_t used = 0;
    for (const auto& [model, output] : outputs) {
        if (!output.valid) continue;
        const auto colors = color_family(used++);
        const auto summary_id = summary_node_id(model);
        try {
            g.add_node({model, model, colors.model, 700});
            g.add_node({summary_id, output.summary, colors.summary, 500});
            for (std::size_t i = 0; i < output.keyframes.size(); ++i) {
                g.add_node({keyframe_node_id(model, i), parsing::format_keyframe(output.keyframes[i]),
                            colors.keyframe, 400});
            }
        } catch (const std::invalid_argument& e) {
            throw DuplicateModelName(std::string("model name collides with an existing node: ") + e.what());
        }
        g.add_edge(model, kKeyFramesNode);
        g.add_edge(model, kVideoSummaryNode);
        g.add_edge(kVideoSummaryNode, summary_id);
        for (std::size_t i = 0; i < output.keyframes.size(); ++i) {
            g.add_edge(kKeyFramesNode, keyframe_node_id(model, i));
            g.add_edge(summary_id, keyframe_node_id(model, i));
        }
    }
    if (used == 0) throw NoValidOutputs("no valid model outputs");
    return g;
}

double optimal_distance(const LayoutParams& params, std::size_t n) {
    if (n == 0) throw std::invalid_argument("layout needs at least one node");
    return params.C * std::sqrt(params.area_A / static_cast<double>(n));
}

namespace {

void validate(const LayoutParams& p) {
    if (!(p.C > 0) || !(p.area_A > 0)) throw std::invalid_argument("C and A must be positive");
    if (p.iterations && *p.iterations <= 0) throw std::invalid_argument("iterations must be positive");
    if (p.initial_temperature && !(*p.initial_temperature > 0)) {
        throw std::invalid_argument("initial temperature must be positive");
    }
    if (!(p.cooling > 0 && p.cooling < 1)) throw std::invalid_argument("cooling must lie in (0, 1)");
}

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

Positions fr_layout(const EvalGraph& graph, const LayoutParams& params, const Positions* initial) {
    validate(params);
    const std::size_t n = graph.node_count();
    if (n == 0) throw std::invalid_argument("layout needs at least one node");
    const double side = std::sqrt(params.area_A);

    std::vector<double> x(n);
    std::vector<double> y(n);
    std::mt19937_64 rng(params.seed);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = unit_uniform(rng) * side;
        y[i] = unit_uniform(rng) * side;
    }
    if (initial != nullptr) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto it = initial->find(graph.nodes()[i].id);
            if (it == initial->end()) continue;
            x[i] = it->second.x;
            y[i] = it->second.y;
        }
    }

    Positions out;
    if (n == 1) {
        const auto& id = graph.nodes()[0].id;
        out[id] = {id, side / 2, side / 2};
        return out;
    }

    // Forces ignore direction; an edge present both ways pulls once.
    std::set<std::pair<std::size_t, std::size_t>> undirected;
    for (const auto& e : graph.edges()) {
        auto a = *graph.index_of(e.source);
        auto b = *graph.index_of(e.target);
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        undirected.emplace(a, b);
    }

    const double k = optimal_distance(params, n);
    const double k2 = k * k;
    const int iterations = params.iterations.value_or(50 * static_cast<int>(std::ceil(std::sqrt(double(n)))));
    double t = params.initial_temperature.value_or(0.1 * side);
    constexpr double kMinDistance = 1e-9;

    std::vector<double> dx(n);
    std::vector<double> dy(n);
    for (int it = 0; it < iterations; ++it) {
        std::fill(dx.begin(), dx.end(), 0.0);
        std::fill(dy.begin(), dy.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                double ex = x[i] - x[j];
                double ey = y[i] - y[j];
                double d = std::hypot(ex, ey);
                if (d < kMinDistance) {
                    // Coincident nodes: push apart along a fixed axis.
                    ex = kMinDistance;
                    ey = 0.0;
                    d = kMinDistance;
                }
                const double f = k2 / d;
                dx[i] += ex / d * f;
                dy[i] += ey / d * f;
                dx[j] -= ex / d * f;
                dy[j] -= ey / d * f;
            }
        }
        for (const auto& [a, b] : undirected) {
            const double ex = x[a] - x[b];
            const double ey = y[a] - y[b];
            const double d = std::hypot(ex, ey);
            if (d < kMinDistance) continue;
            const double f = d * d / k;
            dx[a] -= ex / d * f;
            dy[a] -= ey / d * f;
            dx[b] += ex / d * f;
            dy[b] += ey / d * f;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double len = std::hypot(dx[i], dy[i]);
            if (len <= 0) continue;
            const double step = std::min(len, t);
            x[i] += dx[i] / len * step;
            y[i] += dy[i] / len * step;
        }
        t *= params.cooling;
    }

    for (std::size_t i = 0; i < n; ++i) {
        const auto& id = graph.nodes()[i].id;
        out[id] = {id, x[i], y[i]};
    }
    return out;
}

std::vector<double> shortest_paths(const std::vector<std::vector<std::pair<std::size_t, double>>>& out,
                                   std::size_t source) {
    if (source >= out.size()) throw UnknownSource("source index out of range");
    std::vector<double> dist(out.size(), kUnreachable);
    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
    dist[source] = 0.0;
    queue.emplace(0.0, source);
    while (!queue.empty()) {
        const auto [d, u] = queue.top();
        queue.pop();
        if (d > dist[u]) continue;
        for (const auto& [v, w] : out[u]) {
            if (w < 0 || std::isnan(w)) throw NegativeWeight("negative edge weight");
            if (d + w < dist[v]) {
                dist[v] = d + w;
                queue.emplace(dist[v], v);
            }
        }
    }
    return dist;
}

std::map<std::string, double> dijkstra(const EvalGraph& graph, const std::string& source,
                                       const EdgeWeights& weights) {
    const auto src = graph.index_of(source);
    if (!src) throw UnknownSource("unknown source node: " + source);
    for (const auto& [edge, w] : weights) {
        if (w < 0 || std::isnan(w)) throw NegativeWeight(edge.first + " -> " + edge.second);
    }
    std::vector<std::vector<std::pair<std::size_t, double>>> out(graph.node_count());
    std::size_t matched = 0;
    for (const auto& e : graph.edges()) {
        const auto it = weights.find({e.source, e.target});
        double w = 1.0;
        if (it != weights.end()) {
            w = it->second;
            ++matched;
        }
        out[*graph.index_of(e.source)].emplace_back(*graph.index_of(e.target), w);
    }
    if (matched != weights.size()) throw std::invalid_argument("weight given for an edge not in the graph");

    const auto dist = shortest_paths(out, *src);
    std::map<std::string, double> result;
    for (std::size_t i = 0; i < dist.size(); ++i) result[graph.nodes()[i].id] = dist[i];
    return result;
}

GraphMetrics graph_metrics(const EvalGraph& graph, const Positions& positions, const std::string& center) {
    const auto c = graph.index_of(center);
    if (!c) throw UnknownCenter("unknown center node: " + center);
    const std::size_t n = graph.node_count();

    std::vector<const NodePosition*> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto it = positions.find(graph.nodes()[i].id);
        if (it == positions.end()) throw std::invalid_argument("no position for node " + graph.nodes()[i].id);
        pos[i] = &it->second;
    }

    GraphMetrics m;
    m.node_count = n;
    m.edge_count = graph.edge_count();
    m.center = center;
    if (n >= 2) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) sum += std::hypot(pos[i]->x - pos[j]->x, pos[i]->y - pos[j]->y);
        }
        m.mean_pairwise_distance = sum / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
    }

    std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
    for (const auto& e : graph.edges()) {
        const auto a = *graph.index_of(e.source);
        const auto b = *graph.index_of(e.target);
        adj[a].emplace_back(b, 1.0);
        adj[b].emplace_back(a, 1.0);
    }
    const auto from_center = shortest_paths(adj, *c);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& id = graph.nodes()[i].id;
        if (from_center[i] == kUnreachable) {
            m.unreachable.insert(id);
        } else {
            m.distances_to_center[id] = from_center[i];
        }
    }

    double hop_sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto d = shortest_paths(adj, i);
        for (std::size_t j = i + 1; j < n; ++j) {
            if (d[j] == kUnreachable) continue;
            hop_sum += d[j];
            ++pairs;
        }
    }
    if (pairs > 0) m.mean_pairwise_hops = hop_sum / static_cast<double>(pairs);
    return m;
}

nlohmann::json to_json(const GraphMetrics& m) {
    return {{"node_count", m.node_count},
            {"edge_count", m.edge_count},
            {"mean_pairwise_distance", m.mean_pairwise_distance},
            {"mean_pairwise_hops", m.mean_pairwise_hops},
            {"center", m.center},
            {"distances_to_center", m.distances_to_center},
            {"unreachable", m.unreachable}};
}

namespace {

std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (const char ch : s) {
        switch (ch) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\r': break;
        default: out += ch;
        }
    }
    return out + "\"";
}

std::string fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

std::string to_dot(const EvalGraph& graph, const Positions& positions, const std::string& name) {
    std::ostringstream os;
    os << "digraph " << quoted(name) << " {\n";
    for (const auto& n : graph.nodes()) {
        os << "  " << quoted(n.id) << " [label=" << quoted(n.label) << ", color=" << quoted(n.color)
           << ", size=" << n.size;
        if (const auto it = positions.find(n.id); it != positions.end()) {
            os << ", pos=\"" << fixed(it->second.x) << ',' << fixed(it->second.y) << "!\"";
        }
        os << "];\n";
    }
    for (const auto& e : graph.edges()) os << "  " << quoted(e.source) << " -> " << quoted(e.target) << ";\n";
    os << "}\n";
    return os.str();
}

nlohmann::json to_json(const EvalGraph& graph, const Positions& positions) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : graph.nodes()) {
        nlohmann::json j = {{"id", n.id}, {"label", n.label}, {"color", n.color}, {"size", n.size}};
        if (const auto it = positions.find(n.id); it != positions.end()) {
            j["x"] = it->second.x;
            j["y"] = it->second.y;
        }
        nodes.push_back(std::move(j));
    }
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : graph.edges()) edges.push_back({{"source", e.source}, {"target", e.target}});
    return {{"nodes", nodes}, {"edges", edges}};
}

std::pair<EvalGraph, Positions> graph_from_json(const nlohmann::json& j) {
    EvalGraph g;
    Positions p;
    try {
        for (const auto& n : j.at("nodes")) {
            Node node{n.at("id").get<std::string>(), n.at("label").get<std::string>(),
                      n.at("color").get<std::string>(), n.at("size").get<int>()};
            if (n.contains("x") && n.contains("y")) {
                p[node.id] = {node.id, n.at("x").get<double>(), n.at("y").get<double>()};
            }
            g.add_node(std::move(node));
        }
        for (const auto& e : j.at("edges")) g.add_edge(e.at("source").get<std::string>(), e.at("target").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("graph document: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw SchemaError(std::string("graph document: ") + e.what());
    }
    return {std::move(g), std::move(p)};
}

std::vector<std::filesystem::path> export_graph(const EvalGraph& graph, const Positions& positions,
                                                const std::filesystem::path& dir, const std::string& stem) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    const auto dot_path = dir / (stem + ".dot");
    const auto json_path = dir / (stem + ".json");
    auto write = [](const std::filesystem::path& path, const std::string& text) {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f << text;
        if (!f) throw IoError("cannot write " + path.string());
    };
    write(dot_path, to_dot(graph, positions, stem));
    write(json_path, to_json(graph, positions).dump(2) + "\n");
    return {dot_path, json_path};
}

}  // namespace vidharness::graph
