#include "corrgraph/incident_graph.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "corrgraph/errors.hpp"

namespace corrgraph {

namespace {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0U); }

    std::uint32_t find(std::uint32_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    bool unite(std::uint32_t x, std::uint32_t y) {
        x = find(x);
        y = find(y);
        if (x == y) {
            return false;
        }
        if (size_[x] < size_[y]) {
            std::swap(x, y);
        }
        parent_[y] = x;
        size_[x] += size_[y];
        return true;
    }

private:
    std::vector<std::uint32_t> parent_;
    std::vector<std::uint32_t> size_;
};

GraphNode node_of(const Alert& a) {
    return GraphNode{a.alert_id, a.org_id, a.detector_id, a.detector_kind, a.timestamp};
}

long long weight_of(const Correlation& c, EdgeWeight weight) {
    switch (weight) {
    case EdgeWeight::priority: return c.priority;
    case EdgeWeight::time_delta: return c.time_delta.count();
    case EdgeWeight::uniform: return 0;
    }
    return 0;
}

}  // namespace

IncidentGraph::IncidentGraph(std::vector<GraphNode> nodes, std::vector<GraphEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {}

std::optional<std::uint32_t> IncidentGraph::node_index(std::string_view alert_id) const noexcept {
    const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), alert_id,
                                     [](const GraphNode& n, std::string_view id) { return n.alert_id < id; });
    if (it == nodes_.end() || it->alert_id != alert_id) {
        return std::nullopt;
    }
    return static_cast<std::uint32_t>(it - nodes_.begin());
}

IncidentGraph IncidentGraph::with_edges(std::vector<GraphEdge> edges) const {
    return IncidentGraph(nodes_, std::move(edges));
}

IncidentGraph build_graph(std::span<const Correlation> correlations, const AlertTable& alerts,
                          const AlertTable* isolated_nodes) {
    const AlertIndex index(alerts);
    std::vector<GraphNode> nodes;
    std::unordered_set<std::string_view> seen;
    auto add_node = [&](const Alert& a) {
        if (seen.insert(a.alert_id).second) {
            nodes.push_back(node_of(a));
        }
    };
    auto resolve = [&](const std::string& id) -> const Alert& {
        const Alert* a = index.find(id);
        if (a == nullptr) {
            throw DanglingEndpoint("correlation references unknown alert '" + id + "'");
        }
        return *a;
    };
    for (const auto& c : correlations) {
        if (c.alert_a == c.alert_b) {
            throw InvariantViolation("self-correlation on alert '" + c.alert_a + "'");
        }
        if (!(c.alert_a < c.alert_b)) {
            throw InvariantViolation("correlation pair is not canonical: " + c.alert_a + ", " + c.alert_b);
        }
        const Alert& a = resolve(c.alert_a);
        const Alert& b = resolve(c.alert_b);
        if (a.org_id != c.org_id || b.org_id != c.org_id) {
            throw InvariantViolation("correlation " + c.alert_a + "-" + c.alert_b + " crosses organizations");
        }
        add_node(a);
        add_node(b);
    }
    if (isolated_nodes != nullptr) {
        for (const auto& a : isolated_nodes->rows()) {
            add_node(a);
        }
    }
    std::sort(nodes.begin(), nodes.end(), [](const GraphNode& x, const GraphNode& y) { return x.alert_id < y.alert_id; });
    IncidentGraph skeleton(std::move(nodes), {});

    std::vector<GraphEdge> edges;
    edges.reserve(correlations.size());
    std::unordered_set<std::string> pairs;
    for (const auto& c : correlations) {
        if (!pairs.insert(c.alert_a + '\x1f' + c.alert_b).second) {
            throw InvariantViolation("more than one edge between " + c.alert_a + " and " + c.alert_b);
        }
        edges.push_back(GraphEdge{*skeleton.node_index(c.alert_a), *skeleton.node_index(c.alert_b), c});
    }
    std::sort(edges.begin(), edges.end(),
              [](const GraphEdge& x, const GraphEdge& y) { return canonical_less(x.correlation, y.correlation); });
    return skeleton.with_edges(std::move(edges));
}

ForestResult spanning_forest(const IncidentGraph& graph, EdgeWeight weight) {
    const auto edges = graph.edges();
    std::vector<std::uint32_t> order(edges.size());
    std::iota(order.begin(), order.end(), 0U);
    std::sort(order.begin(), order.end(), [&](std::uint32_t i, std::uint32_t j) {
        const auto& x = edges[i].correlation;
        const auto& y = edges[j].correlation;
        const long long wx = weight_of(x, weight);
        const long long wy = weight_of(y, weight);
        if (wx != wy) return wx < wy;
        if (x.priority != y.priority) return x.priority < y.priority;
        if (x.entity_type != y.entity_type) return x.entity_type < y.entity_type;
        if (x.alert_a != y.alert_a) return x.alert_a < y.alert_a;
        return x.alert_b < y.alert_b;
    });

    DisjointSets sets(graph.nodes().size());
    std::vector<bool> keep(edges.size(), false);
    for (const std::uint32_t i : order) {
        keep[i] = sets.unite(edges[i].a, edges[i].b);
    }

    ForestResult result;
    std::vector<GraphEdge> kept;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (keep[i]) {
            kept.push_back(edges[i]);
        } else {
            result.pruned.push_back(
                RejectedCorrelation{edges[i].correlation, RejectStage::mst_pruned, "redundant within incident"});
        }
    }
    result.forest = graph.with_edges(std::move(kept));
    return result;
}

std::string incident_id_for(std::string_view min_alert_id) { return "inc:" + std::string(min_alert_id); }

IncidentAssignment assign_incidents(const IncidentGraph& graph) {
    const auto nodes = graph.nodes();
    DisjointSets sets(nodes.size());
    for (const auto& e : graph.edges()) {
        sets.unite(e.a, e.b);
    }
    IncidentAssignment out;
    std::unordered_map<std::uint32_t, std::size_t> incident_of_root;
    // Nodes are sorted by alert_id, so the first node met in a component is its minimum.
    for (std::uint32_t i = 0; i < nodes.size(); ++i) {
        const std::uint32_t root = sets.find(i);
        auto [it, inserted] = incident_of_root.try_emplace(root, out.incidents.size());
        if (inserted) {
            out.incidents.push_back(Incident{incident_id_for(nodes[i].alert_id), nodes[i].org_id, {}});
        }
        auto& incident = out.incidents[it->second];
        incident.alert_ids.push_back(nodes[i].alert_id);
        out.incident_of.emplace(nodes[i].alert_id, incident.incident_id);
    }
    std::sort(out.incidents.begin(), out.incidents.end(),
              [](const Incident& x, const Incident& y) { return x.incident_id < y.incident_id; });
    return out;
}

CorrelationStats mine_stats(const CorrelationBatchResult& result, const IncidentGraph& graph,
                            const IncidentGraph& forest, const IncidentAssignment& assignment,
                            const StageTimings& timings) {
    CorrelationStats stats;
    const auto nodes = graph.nodes();
    for (const auto& c : result.final) {
        ++stats.per_entity_type[ordinal(c.entity_type)];
        const auto ia = graph.node_index(c.alert_a);
        const auto ib = graph.node_index(c.alert_b);
        if (!ia || !ib) {
            continue;
        }
        auto ka = nodes[*ia].detector_kind;
        auto kb = nodes[*ib].detector_kind;
        if (ka == DetectorKind::custom && kb == DetectorKind::builtin) {
            std::swap(ka, kb);
        }
        ++stats.per_detector_pair_kind[std::string(detector_kind_name(ka)) + "-" + std::string(detector_kind_name(kb))];
    }
    for (const auto& incident : assignment.incidents) {
        ++stats.incident_size_histogram[incident.alert_ids.size()];
        if (incident.alert_ids.size() == 1) {
            ++stats.singleton_count;
        }
    }
    stats.incident_count = assignment.incidents.size();
    stats.singleton_ratio =
        stats.incident_count > 0 ? static_cast<double>(stats.singleton_count) / static_cast<double>(stats.incident_count)
                                 : 0.0;
    stats.edges_before = graph.edges().size();
    stats.edges_after = forest.edges().size();
    if (stats.edges_after > 0) {
        stats.compression_ratio = static_cast<double>(stats.edges_before) / static_cast<double>(stats.edges_after);
    }
    stats.stage_counts = result.counts;
    stats.stage_runtimes_ms = timings;
    return stats;
}

nlohmann::json stats_to_json(const CorrelationStats& s) {
    nlohmann::json per_entity = nlohmann::json::object();
    for (const auto type : kAllEntityTypes) {
        per_entity[std::string(entity_name(type))] = s.per_entity_type[ordinal(type)];
    }
    nlohmann::json histogram = nlohmann::json::object();
    for (const auto& [size, count] : s.incident_size_histogram) {
        histogram[std::to_string(size)] = count;
    }
    nlohmann::json runtimes = nlohmann::json::object();
    for (const auto& [name, ms] : s.stage_runtimes_ms) {
        runtimes[name] = ms;
    }
    const auto& c = s.stage_counts;
    return {{"schema_version", 1},
            {"correlations_per_entity_type", per_entity},
            {"correlations_per_detector_pair_kind", s.per_detector_pair_kind},
            {"incident_size_histogram", histogram},
            {"incident_count", s.incident_count},
            {"singleton_count", s.singleton_count},
            {"singleton_ratio", s.singleton_ratio},
            {"edges_before_mst", s.edges_before},
            {"edges_after_mst", s.edges_after},
            {"compression_ratio", s.compression_ratio ? nlohmann::json(*s.compression_ratio) : nlohmann::json(nullptr)},
            {"stage_counts",
             {{"candidates", c.candidates},
              {"deduplicated", c.deduplicated},
              {"time_window", c.time_window},
              {"threat_intel", c.threat_intel},
              {"black_hole", c.black_hole},
              {"prioritized", c.prioritized},
              {"final", c.final}}},
            {"stage_runtime_ms", runtimes},
            {"batch_success", s.batch_success}};
}

std::vector<nlohmann::json> incidents_to_json(const IncidentAssignment& assignment, const IncidentGraph& forest) {
    std::unordered_map<std::string_view, nlohmann::json> edges_of;
    for (const auto& e : forest.edges()) {
        const auto it = assignment.incident_of.find(e.correlation.alert_a);
        if (it == assignment.incident_of.end()) {
            continue;
        }
        auto edge = correlation_to_json(e.correlation);
        edge.erase("org_id");
        edges_of[it->second].push_back(std::move(edge));
    }
    std::vector<nlohmann::json> out;
    out.reserve(assignment.incidents.size());
    for (const auto& incident : assignment.incidents) {
        const auto it = edges_of.find(incident.incident_id);
        out.push_back({{"schema_version", 1},
                       {"incident_id", incident.incident_id},
                       {"org_id", incident.org_id},
                       {"alert_ids", incident.alert_ids},
                       {"edges", it == edges_of.end() ? nlohmann::json::array() : std::move(it->second)}});
    }
    return out;
}

}  // namespace corrgraph
