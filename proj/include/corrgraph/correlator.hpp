#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "corrgraph/alert.hpp"
#include "corrgraph/correlation.hpp"
#include "corrgraph/entity_catalog.hpp"
#include "corrgraph/profiler.hpp"
#include "corrgraph/ti_store.hpp"

namespace corrgraph {

class CorrelationStore;

/// Survivor and reject counts per stage. Flow conservation:
/// candidates == final + deduplicated + time_window + threat_intel + black_hole + prioritized.
struct StageCounts {
    std::uint64_t candidates = 0;
    std::uint64_t deduplicated = 0;  // already linked in the store
    std::uint64_t time_window = 0;
    std::uint64_t threat_intel = 0;
    std::uint64_t black_hole = 0;
    std::uint64_t prioritized = 0;   // lower-priority duplicates of a surviving pair
    std::uint64_t final = 0;

    bool conserved() const noexcept {
        return candidates == final + deduplicated + time_window + threat_intel + black_hole + prioritized;
    }
    bool operator==(const StageCounts&) const = default;
};

struct CorrelationBatchResult {
    std::vector<Correlation> final;             // canonical order
    std::vector<RejectedCorrelation> rejected;  // canonical order
    StageCounts counts;
    StageTimings timings;
};

/// Hash join of source against target on every entity type: one candidate per
/// (source alert, target alert, shared value) within one organization, no
/// self pairs, duplicates collapsed. Output is in canonical order.
std::vector<CandidateCorrelation> correlate_all(const AlertTable& source, const AlertTable& target,
                                                const EntityCatalog& catalog);

/// Drops candidates whose pair is already persisted. A null store is empty.
FilterResult dedup_against_store(std::vector<CandidateCorrelation> candidates, const CorrelationStore* store);

/// Keeps candidates with time_delta <= the entity window (inclusive).
FilterResult filter_time_window(std::vector<CandidateCorrelation> candidates, const EntityCatalog& catalog);

/// TI-gated entity types survive only with a malicious verdict; other types pass.
FilterResult filter_threat_intel(std::vector<CandidateCorrelation> candidates, const TiStore& ti, Timestamp now);

/// Same-detector pairs pass. Cross-detector pairs pass only when both
/// detectors are profiled and safe and both alerts are low-evidence.
FilterResult filter_black_hole(std::vector<CandidateCorrelation> candidates, const AlertIndex& alerts,
                               const ProfileMap& profiles, const SafetyThresholds& thresholds);

/// Keeps one correlation per pair: lowest priority number, then entity
/// ordinal, then entity value. The others are rejected as deduplicated.
FilterResult prioritize_duplicates(std::vector<CandidateCorrelation> candidates);

struct StageOptions {
    /// Worker threads; above 1 the batch is partitioned by organization.
    unsigned parallelism = 1;
};

/// join -> store dedup -> time window -> TI -> black hole -> prioritization.
CorrelationBatchResult run_correlation_stage(const AlertTable& source, const AlertTable& target,
                                             const EntityCatalog& catalog, const TiStore& ti,
                                             const ProfileMap& profiles, const CorrelationStore* store, Timestamp now,
                                             const SafetyThresholds& thresholds, StageOptions options = {});

}  // namespace corrgraph
