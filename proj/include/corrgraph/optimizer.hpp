#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "corrgraph/correlation.hpp"
#include "corrgraph/entity_catalog.hpp"

namespace corrgraph {

enum class Population { valid, rejected, combined };

std::string_view population_name(Population p) noexcept;

enum class Percentile { p50, p90, p95, p99 };

std::string_view percentile_name(Percentile p) noexcept;
std::optional<Percentile> parse_percentile(std::string_view name) noexcept;

struct TimeDeltaStats {
    EntityType entity_type = EntityType::SessionId;
    Population population = Population::valid;
    std::uint64_t count = 0;
    double mean_seconds = 0.0;
    double median_seconds = 0.0;
    Seconds p50{0};
    Seconds p90{0};
    Seconds p95{0};
    Seconds p99{0};

    Seconds percentile(Percentile p) const noexcept;
};

/// Nearest-rank percentile of sorted values, q in (0, 100].
Seconds nearest_rank(std::span<const Seconds> sorted, double q);

/// Per entity type present in either input: valid, rejected and combined rows
/// in that order, empty populations omitted. Rows ordered by entity ordinal.
/// Only time_window rejects are considered.
std::vector<TimeDeltaStats> time_delta_stats(std::span<const Correlation> valid,
                                             std::span<const RejectedCorrelation> rejected);

struct WindowPolicy {
    Percentile percentile = Percentile::p99;
    double slack_factor = 1.2;
};

struct WindowSuggestion {
    EntityType entity_type = EntityType::SessionId;
    Seconds current{0};
    Seconds suggested{0};
    Seconds observed{0};  // the chosen percentile of the combined population
    std::uint64_t observations = 0;
};

/// slack x percentile of the combined population, rounded up to a whole hour
/// (at least one hour). Entities without observations get no suggestion.
/// Throws ConfigError when slack_factor < 1.
std::vector<WindowSuggestion> suggest_time_windows(std::span<const TimeDeltaStats> stats,
                                                   const EntityCatalog& catalog, WindowPolicy policy = {});

struct GapEntry {
    RejectStage stage = RejectStage::time_window;
    EntityType entity_type = EntityType::SessionId;
    std::string detector_a;  // detector_a <= detector_b
    std::string detector_b;
    std::uint64_t count = 0;
    std::vector<CandidateCorrelation> samples;  // first five in canonical order
};

struct GapReport {
    std::vector<GapEntry> entries;  // count desc, then stage, entity ordinal, detectors
};

inline constexpr std::size_t kGapSamples = 5;

/// Groups time window, threat intel and black hole rejects by stage, entity
/// type and detector pair. Other stages are not gaps and are ignored.
GapReport gap_report(std::span<const RejectedCorrelation> rejected);

nlohmann::json time_delta_stats_to_json(std::span<const TimeDeltaStats> stats,
                                        std::span<const WindowSuggestion> suggestions);
nlohmann::json gap_report_to_json(const GapReport& report);
void write_time_delta_csv(std::ostream& out, std::span<const TimeDeltaStats> stats);

}  // namespace corrgraph
