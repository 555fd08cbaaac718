#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "corrgraph/entity_catalog.hpp"
#include "corrgraph/time.hpp"

namespace corrgraph {

/// An undirected link between two alerts of one organization justified by a
/// shared entity value. The pair is canonical: alert_a < alert_b, and
/// detector_a/detector_b are the detectors of alert_a/alert_b.
struct CandidateCorrelation {
    std::string org_id;
    std::string alert_a;
    std::string alert_b;
    std::string detector_a;
    std::string detector_b;
    EntityType entity_type = EntityType::SessionId;
    std::string entity_value;
    Seconds time_delta{0};
    int priority = 0;

    bool operator==(const CandidateCorrelation&) const = default;
};

/// A candidate that survived every filter and won duplicate prioritization.
using Correlation = CandidateCorrelation;

/// Canonical order: (org_id, alert_a, alert_b, entity ordinal, entity_value).
bool canonical_less(const CandidateCorrelation& x, const CandidateCorrelation& y) noexcept;

bool same_pair(const CandidateCorrelation& x, const CandidateCorrelation& y) noexcept;

enum class RejectStage : std::uint8_t { time_window, threat_intel, black_hole, deduplicated, mst_pruned };

inline constexpr std::size_t kRejectStageCount = 5;

std::string_view stage_name(RejectStage stage) noexcept;
std::optional<RejectStage> parse_stage(std::string_view name) noexcept;

struct RejectedCorrelation {
    CandidateCorrelation candidate;
    RejectStage stage = RejectStage::time_window;
    std::string detail;

    bool operator==(const RejectedCorrelation&) const = default;
};

/// Orders by stage, then canonical candidate order.
bool canonical_less(const RejectedCorrelation& x, const RejectedCorrelation& y) noexcept;

struct FilterResult {
    std::vector<CandidateCorrelation> valid;
    std::vector<RejectedCorrelation> rejected;
};

/// Named wall-clock durations in milliseconds, in execution order.
using StageTimings = std::vector<std::pair<std::string, double>>;

nlohmann::json correlation_to_json(const CandidateCorrelation& c);
CandidateCorrelation correlation_from_json(const nlohmann::json& obj);
nlohmann::json rejected_to_json(const RejectedCorrelation& r);
RejectedCorrelation rejected_from_json(const nlohmann::json& obj);

}  // namespace corrgraph
