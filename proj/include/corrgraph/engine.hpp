#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "corrgraph/alert.hpp"
#include "corrgraph/correlator.hpp"
#include "corrgraph/entity_catalog.hpp"
#include "corrgraph/generator.hpp"
#include "corrgraph/incident_graph.hpp"
#include "corrgraph/optimizer.hpp"
#include "corrgraph/profiler.hpp"
#include "corrgraph/store.hpp"
#include "corrgraph/ti_store.hpp"

namespace corrgraph {

struct PipelineOptions {
    Seconds source_window = std::chrono::minutes(35);
    Seconds target_window = std::chrono::hours(72);
    unsigned parallelism = 1;
    EdgeWeight edge_weight = EdgeWeight::priority;
    WindowPolicy window_policy;
};

/// Everything one batch produces, before anything is written or committed.
struct BatchOutcome {
    std::size_t source_alerts = 0;
    std::size_t target_alerts = 0;
    CorrelationBatchResult stage;
    IncidentGraph graph;
    ForestResult forest;
    IncidentAssignment assignment;
    CorrelationStats stats;
    std::vector<TimeDeltaStats> time_deltas;
    std::vector<WindowSuggestion> suggestions;
    GapReport gaps;
};

/// Slices the table, runs the correlation stage, builds and compresses the
/// incident graph and derives the reports. Pure: nothing is persisted.
BatchOutcome run_pipeline(const AlertTable& alerts, Timestamp now, const EntityCatalog& catalog, const TiStore& ti,
                          const ProfileMap& profiles, const SafetyThresholds& thresholds,
                          const CorrelationStore* store, const PipelineOptions& options = {});

struct BatchConfig {
    std::vector<std::filesystem::path> alerts;
    AlertFormat format = AlertFormat::jsonl;
    LoadMode load_mode = LoadMode::lenient;
    std::optional<std::filesystem::path> ti;
    std::optional<std::filesystem::path> profiles;  // computed from the alerts when absent
    int profile_window_days = 7;
    std::filesystem::path store;
    Timestamp now;
    std::optional<std::filesystem::path> catalog;
    std::optional<std::filesystem::path> thresholds;
    std::filesystem::path out;
    std::string batch_id;  // defaults to "batch-" + now
    PipelineOptions pipeline;
};

struct BatchReport {
    BatchOutcome outcome;
    CommitReceipt receipt;
    std::vector<RowError> row_errors;
};

/// Loads inputs, runs the pipeline, stages the six artifacts next to `out`,
/// commits the final correlations and then moves the artifacts into place.
/// A failure before the commit leaves neither artifacts nor store changes.
BatchReport run_batch(const BatchConfig& config);

/// Artifact names inside the output directory.
inline constexpr const char* kIncidentsFile = "incidents.jsonl";
inline constexpr const char* kCorrelationsFile = "correlations.jsonl";
inline constexpr const char* kRejectedFile = "rejected.jsonl";
inline constexpr const char* kStatsFile = "stats.json";
inline constexpr const char* kTimeDeltaFile = "timedelta_stats.json";
inline constexpr const char* kGapReportFile = "gap_report.json";
inline constexpr const char* kTimeDeltaCsvFile = "timedelta_stats.csv";

void write_artifacts(const std::filesystem::path& dir, const BatchOutcome& outcome);

std::vector<Correlation> read_correlations(const std::filesystem::path& path);
std::vector<RejectedCorrelation> read_rejected(const std::filesystem::path& path);

struct ReportDocuments {
    std::vector<TimeDeltaStats> time_deltas;
    std::vector<WindowSuggestion> suggestions;
    GapReport gaps;
};

/// Rebuilds the time-delta and gap documents from a run's output directory.
/// The prioritized finals are the kept correlations plus the mst_pruned rejects.
ReportDocuments rebuild_reports(const std::filesystem::path& out_dir, const EntityCatalog& catalog,
                                WindowPolicy policy = {});

struct BenchConfig {
    std::vector<std::size_t> sizes = {10'000, 100'000, 1'000'000};
    std::uint64_t seed = 1;
    int repeats = 3;
    unsigned parallelism = 1;
};

struct BenchRow {
    std::size_t requested = 0;
    std::size_t alerts = 0;
    std::size_t source = 0;
    std::size_t target = 0;
    StageCounts counts;
    double best_seconds = 0.0;  // correlation stage, minimum over repeats
    std::vector<double> runs;
    StageTimings stage_ms;      // from the fastest run
};

/// Generator workload of roughly `alerts` alerts with a fixed per-org shape,
/// so incident density stays constant as the org count grows.
GeneratorConfig bench_workload(std::size_t alerts, std::uint64_t seed);

/// Sizes must be ascending. Throws ConfigError otherwise.
std::vector<BenchRow> run_bench(const BenchConfig& config);
nlohmann::json bench_to_json(const std::vector<BenchRow>& rows);

}  // namespace corrgraph
