#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>

#include <json.hpp>

#include "corrgraph/alert.hpp"

namespace corrgraph {

struct DetectorKey {
    std::string org_id;
    std::string detector_id;

    auto operator<=>(const DetectorKey&) const = default;
};

/// Aggregates for one (organization, detector) over a trailing window. The
/// ratios are derived from integer totals so threshold checks stay exact.
struct DetectorProfile {
    std::string org_id;
    std::string detector_id;
    int window_days = 7;
    std::uint64_t total_alerts = 0;
    std::uint64_t org_total_alerts = 0;
    /// Sum over the detector's alerts of the number of distinct values of each type.
    std::array<std::uint64_t, kEntityTypeCount> distinct_value_totals{};

    double alerts_per_day() const noexcept;
    double share_of_org_alerts() const noexcept;
    double avg_distinct(EntityType type) const noexcept;

    bool operator==(const DetectorProfile&) const = default;
};

struct SafetyThresholds {
    double max_share = 0.06;
    std::uint64_t max_per_day = 20;
    std::uint64_t max_avg_distinct_default = 4;
    std::uint64_t max_avg_distinct_high = 10;
    std::set<EntityType> high_fanout_types = {EntityType::SHA1, EntityType::FileName, EntityType::URL,
                                              EntityType::EmailId, EntityType::AppId};

    std::uint64_t limit_for(EntityType type) const noexcept;

    /// Throws ConfigError unless every limit is positive and the high limit
    /// is at least the default one.
    void validate() const;

    static SafetyThresholds from_json(const nlohmann::json& doc);
    nlohmann::json to_json() const;
};

using ProfileMap = std::map<DetectorKey, DetectorProfile>;

/// Profiles every detector over alerts with 0 <= now - timestamp <= window_days.
/// Throws ConfigError when window_days < 1.
ProfileMap profile_detectors(const AlertTable& alerts, Timestamp now, int window_days = 7);

/// Low-volume and low-evidence detector checks. Volume limits are strict
/// ("below", "fewer than"); entity-count limits are inclusive maxima.
bool detector_is_safe(const DetectorProfile& profile, const SafetyThresholds& thresholds);

/// Low-evidence alert check: every per-type distinct-value count within its limit.
bool alert_is_low_evidence(const Alert& alert, const SafetyThresholds& thresholds);

nlohmann::json profile_to_json(const DetectorProfile& profile);
DetectorProfile profile_from_json(const nlohmann::json& obj);

void write_profiles(std::ostream& out, const ProfileMap& profiles);
ProfileMap read_profiles(std::istream& in);
ProfileMap read_profiles(const std::filesystem::path& path);

}  // namespace corrgraph
