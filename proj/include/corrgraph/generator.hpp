#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "corrgraph/alert.hpp"
#include "corrgraph/entity_catalog.hpp"
#include "corrgraph/ti_store.hpp"

namespace corrgraph {

/// mt19937_64 with bounded draws defined here rather than by the standard
/// library distributions, so output is identical across toolchains.
class PortableRng {
public:
    explicit PortableRng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform in [lo, hi].
    std::int64_t uniform(std::int64_t lo, std::int64_t hi);
    /// Uniform in [0, 1).
    double unit();
    bool chance(double p) { return unit() < p; }

private:
    std::mt19937_64 engine_;
};

struct SizeRange {
    int min = 4;
    int max = 4;
};

struct NoisyDetectorSpec {
    int alerts_per_day = 100;
    int entity_fanout = 12;
    EntityType fanout_type = EntityType::IP;
};

struct GeneratorConfig {
    std::uint64_t seed = 1;
    int org_count = 1;
    int incidents_per_org = 1;
    SizeRange incident_size;
    /// Weights for the entity type that links an incident. Missing types weigh 0.
    std::map<EntityType, double> entity_mix;
    /// Share of all emitted org alerts that belong to no incident, in [0, 1).
    double noise_alert_fraction = 0.0;
    std::optional<NoisyDetectorSpec> noisy_detector;
    Seconds time_span = std::chrono::hours(72);
    Timestamp end_time;
    /// Upper bound on the time spread of one incident (also capped by its link window).
    Seconds incident_spread = std::chrono::hours(6);
    /// Place the newest alert of every incident inside the source window.
    bool anchor_in_source = true;
    Seconds source_window = std::chrono::minutes(35);
    int detectors_per_org = 40;
    double custom_detector_fraction = 0.2;
    /// Probability that a noise alert carries a value from a small pool shared by all orgs.
    double collision_rate = 0.0;
    int collision_pool_size = 32;
    /// Probability that a planted TI-gated value is malicious in the generated feed.
    double ti_malicious_fraction = 1.0;
    Seconds ti_max_age = std::chrono::hours(24);
    /// Probability that an incident shares a second planted entity type.
    double second_link_probability = 0.0;
    int extra_entities_max = 2;

    /// Default config with a non-gated entity mix and end_time 2024-01-01T00:00:00Z.
    static GeneratorConfig defaults();
    /// Missing keys keep their defaults. Throws ConfigError.
    static GeneratorConfig from_json(const nlohmann::json& obj);
    nlohmann::json to_json() const;
    /// Throws ConfigError for non-positive sizes or out-of-range fractions.
    void validate() const;
};

struct GroundTruthLabel {
    std::string alert_id;
    std::string incident;  // empty for background noise, "noisy" for the noisy detector
};

struct GeneratedData {
    AlertTable alerts;
    std::vector<GroundTruthLabel> labels;  // ordered by alert_id
    std::vector<TiRecord> ti_feed;         // ordered by (entity_type, value)
};

GeneratedData generate_synthetic_alerts(const GeneratorConfig& config,
                                        const EntityCatalog& catalog = EntityCatalog::defaults());

void write_ground_truth(std::ostream& out, const std::vector<GroundTruthLabel>& labels);

}  // namespace corrgraph
