#include <doctest.h>

#include <map>
#include <sstream>

#include "corrgraph/errors.hpp"
#include "corrgraph/generator.hpp"
#include "corrgraph/profiler.hpp"
#include "testkit.hpp"

using namespace corrgraph;
using namespace std::chrono_literals;

namespace {

std::string serialize(const GeneratedData& d) {
    std::ostringstream out;
    write_alerts(out, d.alerts, AlertFormat::jsonl);
    write_ground_truth(out, d.labels);
    write_ti(out, d.ti_feed);
    return out.str();
}

}  // namespace

TEST_CASE("same seed and config give byte-identical output") {
    auto config = GeneratorConfig::defaults();
    config.seed = 1;
    config.org_count = 3;
    config.incidents_per_org = 6;
    config.incident_size = {2, 9};
    config.noise_alert_fraction = 0.5;
    config.noisy_detector = NoisyDetectorSpec{};
    config.collision_rate = 0.2;
    config.entity_mix[EntityType::SHA1] = 1.0;
    const auto a = serialize(generate_synthetic_alerts(config));
    const auto b = serialize(generate_synthetic_alerts(config));
    CHECK(a == b);
    config.seed = 2;
    CHECK(serialize(generate_synthetic_alerts(config)) != a);
}

TEST_CASE("one incident of four without noise") {
    auto config = GeneratorConfig::defaults();
    config.incidents_per_org = 1;
    config.incident_size = {4, 4};
    const auto d = generate_synthetic_alerts(config);
    CHECK(d.alerts.size() == 4);
    std::map<std::string, int> groups;
    for (const auto& l : d.labels) ++groups[l.incident];
    REQUIRE(groups.size() == 1);
    CHECK(groups.begin()->second == 4);
    CHECK_FALSE(groups.begin()->first.empty());
}

TEST_CASE("noisy detector at 100 per day is profiled unsafe") {
    auto config = GeneratorConfig::defaults();
    config.incidents_per_org = 3;
    config.noisy_detector = NoisyDetectorSpec{100, 12, EntityType::IP};
    const auto d = generate_synthetic_alerts(config);
    const auto profiles = profile_detectors(d.alerts, config.end_time);
    const auto it = profiles.find(DetectorKey{"org-0", "org-0/noisy"});
    REQUIRE(it != profiles.end());
    CHECK(it->second.alerts_per_day() > 20.0);
    CHECK_FALSE(detector_is_safe(it->second, SafetyThresholds{}));
}

TEST_CASE("planted incidents respect their link windows") {
    const auto catalog = EntityCatalog::defaults();
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto config = GeneratorConfig::defaults();
        config.seed = seed;
        config.org_count = 2;
        config.incidents_per_org = 5;
        config.incident_size = {2, 8};
        config.incident_spread = 80h;
        config.second_link_probability = 0.5;
        config.anchor_in_source = seed % 2 == 0;
        config.entity_mix = {{EntityType::IP, 1}, {EntityType::CampaignId, 1}, {EntityType::EmailSubject, 1},
                             {EntityType::IPRange, 1}, {EntityType::SHA1, 1}};
        const auto d = generate_synthetic_alerts(config);
        std::map<std::string, std::vector<const Alert*>> groups;
        std::map<std::string, std::string> label_of;
        for (const auto& l : d.labels) label_of[l.alert_id] = l.incident;
        for (const auto& a : d.alerts.rows()) {
            if (!label_of[a.alert_id].empty()) groups[label_of[a.alert_id]].push_back(&a);
        }
        for (const auto& [label, members] : groups) {
            for (std::size_t i = 0; i < members.size(); ++i) {
                for (std::size_t j = i + 1; j < members.size(); ++j) {
                    const auto gap = members[i]->timestamp > members[j]->timestamp
                                         ? members[i]->timestamp - members[j]->timestamp
                                         : members[j]->timestamp - members[i]->timestamp;
                    bool linked = false;
                    for (const auto& v : members[i]->entities.all()) {
                        if (members[j]->entities.contains(v) && gap <= catalog.window(v.type)) linked = true;
                    }
                    CAPTURE(label);
                    CHECK(linked);
                }
            }
        }
    }
}

TEST_CASE("every alert lies inside the time span") {
    auto config = GeneratorConfig::defaults();
    config.incidents_per_org = 10;
    config.noise_alert_fraction = 0.5;
    config.noisy_detector = NoisyDetectorSpec{};
    const auto d = generate_synthetic_alerts(config);
    for (const auto& a : d.alerts.rows()) {
        CHECK(a.timestamp <= config.end_time);
        CHECK(config.end_time - a.timestamp <= config.time_span);
    }
}

TEST_CASE("anchored incidents have an alert in the source window") {
    auto config = GeneratorConfig::defaults();
    config.incidents_per_org = 8;
    const auto d = generate_synthetic_alerts(config);
    std::map<std::string, bool> anchored;
    std::map<std::string, std::string> label_of;
    for (const auto& l : d.labels) label_of[l.alert_id] = l.incident;
    for (const auto& a : d.alerts.rows()) {
        auto& flag = anchored[label_of[a.alert_id]];
        flag = flag || config.end_time - a.timestamp <= config.source_window;
    }
    CHECK(anchored.size() == 8);
    for (const auto& [label, ok] : anchored) CHECK(ok);
}

TEST_CASE("planted intel values are malicious by default") {
    auto config = GeneratorConfig::defaults();
    config.incidents_per_org = 6;
    config.entity_mix = {{EntityType::SHA1, 1}, {EntityType::FileName, 1}, {EntityType::IPRange, 1}};
    const auto d = generate_synthetic_alerts(config);
    CHECK(d.ti_feed.size() == 6);
    for (const auto& r : d.ti_feed) {
        CHECK(r.verdict == Verdict::malicious);
        CHECK(config.end_time - r.last_confirmed <= config.ti_max_age);
    }
}

TEST_CASE("invalid configs") {
    auto check = [](auto mutate) {
        auto config = GeneratorConfig::defaults();
        mutate(config);
        CHECK_THROWS_AS(generate_synthetic_alerts(config), ConfigError);
    };
    check([](GeneratorConfig& c) { c.org_count = 0; });
    check([](GeneratorConfig& c) { c.incident_size = {0, 3}; });
    check([](GeneratorConfig& c) { c.incident_size = {5, 3}; });
    check([](GeneratorConfig& c) { c.noise_alert_fraction = 1.0; });
    check([](GeneratorConfig& c) { c.detectors_per_org = 0; });
    check([](GeneratorConfig& c) { c.entity_mix.clear(); });
    check([](GeneratorConfig& c) { c.time_span = 0s; });
}

TEST_CASE("config json") {
    const auto c = GeneratorConfig::from_json(nlohmann::json::parse(
        R"({"seed": 9, "org_count": 2, "incident_size": 5, "time_span": "48h", "entity_mix": {"URL": 1},
            "noisy_detector": {"alerts_per_day": 50}})"));
    CHECK(c.seed == 9);
    CHECK(c.incident_size.min == 5);
    CHECK(c.incident_size.max == 5);
    CHECK(c.time_span == 48h);
    CHECK(c.entity_mix.size() == 1);
    REQUIRE(c.noisy_detector.has_value());
    CHECK(c.noisy_detector->alerts_per_day == 50);
    CHECK(GeneratorConfig::from_json(c.to_json()).to_json() == c.to_json());

    CHECK_THROWS_AS(GeneratorConfig::from_json(nlohmann::json::parse(R"({"seed": "one"})")), ConfigError);
    CHECK_THROWS_AS(GeneratorConfig::from_json(nlohmann::json::parse(R"({"org_count": -1})")), ConfigError);
    CHECK_THROWS_AS(GeneratorConfig::from_json(nlohmann::json::parse(R"({"entity_mix": {"Host": 1}})")), ConfigError);
    CHECK_THROWS_AS(GeneratorConfig::from_json(nlohmann::json::parse("[]")), ConfigError);
}

TEST_CASE("portable rng bounds") {
    PortableRng rng(7);
    for (int i = 0; i < 10000; ++i) {
        const auto x = rng.uniform(-3, 3);
        CHECK(x >= -3);
        CHECK(x <= 3);
        const double u = rng.unit();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    PortableRng a(42);
    PortableRng b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform(0, 1000) == b.uniform(0, 1000));
}
