#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "corrgraph/alert.hpp"
#include "corrgraph/correlation.hpp"
#include "corrgraph/correlator.hpp"

namespace corrgraph {

struct GraphNode {
    std::string alert_id;
    std::string org_id;
    std::string detector_id;
    DetectorKind detector_kind = DetectorKind::builtin;
    Timestamp timestamp;
};

struct GraphEdge {
    std::uint32_t a = 0;  // node index of correlation.alert_a
    std::uint32_t b = 0;  // node index of correlation.alert_b
    Correlation correlation;
};

/// Simple undirected graph over alerts: at most one edge per pair, no self
/// loops, edges never cross organizations. Nodes are ordered by alert_id.
class IncidentGraph {
public:
    IncidentGraph() = default;
    IncidentGraph(std::vector<GraphNode> nodes, std::vector<GraphEdge> edges);

    std::span<const GraphNode> nodes() const noexcept { return nodes_; }
    std::span<const GraphEdge> edges() const noexcept { return edges_; }
    std::optional<std::uint32_t> node_index(std::string_view alert_id) const noexcept;

    /// Same nodes, different edge subset.
    IncidentGraph with_edges(std::vector<GraphEdge> edges) const;

private:
    std::vector<GraphNode> nodes_;
    std::vector<GraphEdge> edges_;
};

/// Builds the graph from final correlations. Endpoints are resolved in
/// `alerts`; every alert of `isolated_nodes` is added as a node even when it
/// has no edge, for singleton accounting. Throws DanglingEndpoint for unknown
/// endpoints and InvariantViolation for a repeated pair, a self loop or a
/// cross-organization edge.
IncidentGraph build_graph(std::span<const Correlation> correlations, const AlertTable& alerts,
                          const AlertTable* isolated_nodes = nullptr);

enum class EdgeWeight { priority, time_delta, uniform };

struct ForestResult {
    IncidentGraph forest;
    std::vector<RejectedCorrelation> pruned;  // stage mst_pruned, canonical order
};

/// Minimum spanning forest (Kruskal with union-find). Edges are taken in
/// (weight, priority, entity ordinal, alert_a, alert_b) order.
ForestResult spanning_forest(const IncidentGraph& graph, EdgeWeight weight = EdgeWeight::priority);

struct Incident {
    std::string incident_id;
    std::string org_id;
    std::vector<std::string> alert_ids;  // sorted
};

struct IncidentAssignment {
    std::map<std::string, std::string, std::less<>> incident_of;  // alert_id -> incident_id
    std::vector<Incident> incidents;                              // ordered by incident_id
};

/// Connected components. An incident is named after its smallest alert_id.
IncidentAssignment assign_incidents(const IncidentGraph& graph);

std::string incident_id_for(std::string_view min_alert_id);

struct CorrelationStats {
    std::array<std::uint64_t, kEntityTypeCount> per_entity_type{};
    std::map<std::string, std::uint64_t> per_detector_pair_kind;  // builtin-builtin, builtin-custom, custom-custom
    std::map<std::size_t, std::uint64_t> incident_size_histogram;
    std::uint64_t incident_count = 0;
    std::uint64_t singleton_count = 0;
    double singleton_ratio = 0.0;
    std::uint64_t edges_before = 0;
    std::uint64_t edges_after = 0;
    std::optional<double> compression_ratio;
    StageCounts stage_counts;
    StageTimings stage_runtimes_ms;
    bool batch_success = true;
};

CorrelationStats mine_stats(const CorrelationBatchResult& result, const IncidentGraph& graph,
                            const IncidentGraph& forest, const IncidentAssignment& assignment,
                            const StageTimings& timings);

nlohmann::json stats_to_json(const CorrelationStats& stats);

/// One JSON object per incident (ordered by incident_id) with its alerts and
/// the forest edges that connect them.
std::vector<nlohmann::json> incidents_to_json(const IncidentAssignment& assignment, const IncidentGraph& forest);

}  // namespace corrgraph
