#include "corrgraph/generator.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "corrgraph/errors.hpp"
#include "corrgraph/time.hpp"

namespace corrgraph {

std::int64_t PortableRng::uniform(std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) {
        return lo;
    }
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) {
        return static_cast<std::int64_t>(next());
    }
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x = next();
    while (x >= limit) {
        x = next();
    }
    return lo + static_cast<std::int64_t>(x % span);
}

double PortableRng::unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

GeneratorConfig GeneratorConfig::defaults() {
    GeneratorConfig c;
    c.end_time = parse_rfc3339("2024-01-01T00:00:00Z");
    c.entity_mix = {{EntityType::UserId, 2.0},    {EntityType::IP, 2.0},       {EntityType::URL, 1.0},
                    {EntityType::DeviceId, 1.0},  {EntityType::SessionId, 1.0}, {EntityType::EmailId, 1.0},
                    {EntityType::AppId, 1.0},     {EntityType::EmailAddress, 0.5}};
    return c;
}

void GeneratorConfig::validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("generator: " + m); };
    if (org_count < 1) fail("org_count must be positive");
    if (incidents_per_org < 0) fail("incidents_per_org must not be negative");
    if (incident_size.min < 1 || incident_size.max < incident_size.min) fail("incident_size must satisfy 1 <= min <= max");
    if (!(noise_alert_fraction >= 0.0 && noise_alert_fraction < 1.0)) fail("noise_alert_fraction must be in [0, 1)");
    if (time_span <= Seconds{0}) fail("time_span must be positive");
    if (incident_spread < Seconds{0}) fail("incident_spread must not be negative");
    if (source_window <= Seconds{0} || source_window > time_span) fail("source_window must be in (0, time_span]");
    if (detectors_per_org < 1) fail("detectors_per_org must be positive");
    if (extra_entities_max < 0) fail("extra_entities_max must not be negative");
    if (collision_pool_size < 1) fail("collision_pool_size must be positive");
    for (double p : {custom_detector_fraction, collision_rate, ti_malicious_fraction, second_link_probability}) {
        if (!(p >= 0.0 && p <= 1.0)) fail("probabilities must be in [0, 1]");
    }
    double total = 0;
    for (const auto& [type, w] : entity_mix) {
        if (!(w >= 0.0)) fail("entity_mix weights must not be negative");
        total += w;
    }
    if (incidents_per_org > 0 && !(total > 0.0)) fail("entity_mix needs a positive weight");
    if (noisy_detector && (noisy_detector->alerts_per_day < 1 || noisy_detector->entity_fanout < 0)) {
        fail("noisy_detector needs alerts_per_day >= 1 and entity_fanout >= 0");
    }
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& obj) {
    if (!obj.is_object()) {
        throw ConfigError("generator config must be a JSON object");
    }
    GeneratorConfig c = defaults();
    std::string key;
    auto has = [&](const char* name) {
        key = name;
        return obj.contains(name);
    };
    try {
        auto duration = [&](const char* name, Seconds& out) {
            if (has(name)) out = parse_duration(obj.at(name).get<std::string>());
        };
        if (has("seed")) c.seed = obj.at("seed").get<std::uint64_t>();
        if (has("org_count")) c.org_count = obj.at("org_count").get<int>();
        if (has("incidents_per_org")) c.incidents_per_org = obj.at("incidents_per_org").get<int>();
        if (has("incident_size")) {
            const auto& s = obj.at("incident_size");
            if (s.is_number_integer()) {
                c.incident_size.min = c.incident_size.max = s.get<int>();
            } else {
                c.incident_size.min = s.at("min").get<int>();
                c.incident_size.max = s.at("max").get<int>();
            }
        }
        if (has("entity_mix")) {
            c.entity_mix.clear();
            for (const auto& [name, w] : obj.at("entity_mix").items()) {
                const auto type = parse_entity_type(name);
                if (!type) throw ConfigError("generator: unknown entity type '" + name + "'");
                c.entity_mix[*type] = w.get<double>();
            }
        }
        if (has("noise_alert_fraction")) c.noise_alert_fraction = obj.at("noise_alert_fraction").get<double>();
        if (has("noisy_detector") && !obj.at("noisy_detector").is_null()) {
            const auto& n = obj.at("noisy_detector");
            NoisyDetectorSpec spec;
            spec.alerts_per_day = n.value("alerts_per_day", spec.alerts_per_day);
            spec.entity_fanout = n.value("entity_fanout", spec.entity_fanout);
            if (n.contains("fanout_type")) {
                const auto name = n.at("fanout_type").get<std::string>();
                const auto type = parse_entity_type(name);
                if (!type) throw ConfigError("generator: unknown entity type '" + name + "'");
                spec.fanout_type = *type;
            }
            c.noisy_detector = spec;
        }
        duration("time_span", c.time_span);
        if (has("end_time")) c.end_time = parse_rfc3339(obj.at("end_time").get<std::string>());
        duration("incident_spread", c.incident_spread);
        if (has("anchor_in_source")) c.anchor_in_source = obj.at("anchor_in_source").get<bool>();
        duration("source_window", c.source_window);
        if (has("detectors_per_org")) c.detectors_per_org = obj.at("detectors_per_org").get<int>();
        if (has("custom_detector_fraction")) c.custom_detector_fraction = obj.at("custom_detector_fraction").get<double>();
        if (has("collision_rate")) c.collision_rate = obj.at("collision_rate").get<double>();
        if (has("collision_pool_size")) c.collision_pool_size = obj.at("collision_pool_size").get<int>();
        if (has("ti_malicious_fraction")) c.ti_malicious_fraction = obj.at("ti_malicious_fraction").get<double>();
        duration("ti_max_age", c.ti_max_age);
        if (has("second_link_probability")) c.second_link_probability = obj.at("second_link_probability").get<double>();
        if (has("extra_entities_max")) c.extra_entities_max = obj.at("extra_entities_max").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("generator config: " + key + ": " + e.what());
    } catch (const ParseError& e) {
        throw ConfigError("generator config: " + key + ": " + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json GeneratorConfig::to_json() const {
    nlohmann::json mix = nlohmann::json::object();
    for (const auto& [type, w] : entity_mix) {
        mix[std::string(entity_name(type))] = w;
    }
    nlohmann::json noisy = nullptr;
    if (noisy_detector) {
        noisy = {{"alerts_per_day", noisy_detector->alerts_per_day},
                 {"entity_fanout", noisy_detector->entity_fanout},
                 {"fanout_type", entity_name(noisy_detector->fanout_type)}};
    }
    return {{"seed", seed},
            {"org_count", org_count},
            {"incidents_per_org", incidents_per_org},
            {"incident_size", {{"min", incident_size.min}, {"max", incident_size.max}}},
            {"entity_mix", mix},
            {"noise_alert_fraction", noise_alert_fraction},
            {"noisy_detector", noisy},
            {"time_span", format_duration(time_span)},
            {"end_time", format_rfc3339(end_time)},
            {"incident_spread", format_duration(incident_spread)},
            {"anchor_in_source", anchor_in_source},
            {"source_window", format_duration(source_window)},
            {"detectors_per_org", detectors_per_org},
            {"custom_detector_fraction", custom_detector_fraction},
            {"collision_rate", collision_rate},
            {"collision_pool_size", collision_pool_size},
            {"ti_malicious_fraction", ti_malicious_fraction},
            {"ti_max_age", format_duration(ti_max_age)},
            {"second_link_probability", second_link_probability},
            {"extra_entities_max", extra_entities_max}};
}

namespace {

std::string hex40(std::uint64_t n) {
    std::string out;
    std::uint64_t x = n + 0x9e3779b97f4a7c15ULL;
    char buf[17];
    for (int i = 0; i < 3; ++i) {
        x ^= x >> 30;
        x *= 0xbf58476d1ce4e5b9ULL;
        x ^= x >> 27;
        x *= 0x94d049bb133111ebULL;
        x ^= x >> 31;
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
        out += buf;
    }
    out.resize(40);
    return out;
}

std::string block_prefix(std::uint64_t block) {
    return std::to_string(1 + (block >> 16) % 254) + "." + std::to_string((block >> 8) & 255) + "." +
           std::to_string(block & 255);
}

class ValueFactory {
public:
    /// A value of `type` that no other call returns.
    std::string fresh(EntityType type) {
        const std::uint64_t n = counter_++;
        switch (type) {
        case EntityType::SessionId: return "sess-" + std::to_string(n);
        case EntityType::EmailId: return "msg-" + std::to_string(n) + "@mail.example";
        case EntityType::CampaignId: return "campaign-" + std::to_string(n);
        case EntityType::EmailCluster: return "cluster-" + std::to_string(n);
        case EntityType::UserId: return "user-" + std::to_string(n);
        case EntityType::URL: return "http://site-" + std::to_string(n) + ".example/login";
        case EntityType::DeviceId: return "device-" + std::to_string(n);
        case EntityType::SHA1: return hex40(n);
        case EntityType::FileName: return "payload-" + std::to_string(n) + ".exe";
        case EntityType::AppId: return "app-" + std::to_string(n);
        case EntityType::EmailAddress: return "person-" + std::to_string(n) + "@corp.example";
        case EntityType::EmailSubject: return "invoice " + std::to_string(n);
        case EntityType::RegistryKey: return "hklm\\software\\key-" + std::to_string(n);
        case EntityType::RegistryValue: return "value-" + std::to_string(n);
        case EntityType::ResourceId: return "/subscriptions/res-" + std::to_string(n);
        case EntityType::IP: return block_prefix(fresh_block()) + ".10";
        case EntityType::IPRange: return block_prefix(fresh_block()) + ".0/24";
        }
        return std::to_string(n);
    }

    std::uint64_t fresh_block() { return blocks_++; }

private:
    std::uint64_t counter_ = 0;
    std::uint64_t blocks_ = 0;
};

struct Builder {
    const GeneratorConfig& config;
    const EntityCatalog& catalog;
    PortableRng rng;
    ValueFactory values;
    std::vector<Alert> alerts;
    std::vector<GroundTruthLabel> labels;
    std::vector<TiRecord> ti;
    std::uint64_t next_alert = 0;

    Builder(const GeneratorConfig& c, const EntityCatalog& cat) : config(c), catalog(cat), rng(c.seed) {}

    Alert& emit(const std::string& org, std::string detector, DetectorKind kind, Timestamp t, std::string label) {
        char id[32];
        std::snprintf(id, sizeof id, "a%09llu", static_cast<unsigned long long>(next_alert++));
        Alert a;
        a.alert_id = id;
        a.org_id = org;
        a.detector_id = std::move(detector);
        a.detector_kind = kind;
        a.timestamp = t;
        alerts.push_back(std::move(a));
        labels.push_back(GroundTruthLabel{id, std::move(label)});
        return alerts.back();
    }

    void add(Alert& a, EntityType type, std::string value) { a.entities.insert(EntityValue{type, std::move(value)}); }

    void add_extras(Alert& a) {
        const auto n = rng.uniform(0, config.extra_entities_max);
        for (std::int64_t i = 0; i < n; ++i) {
            const auto type = kAllEntityTypes[static_cast<std::size_t>(rng.uniform(0, kEntityTypeCount - 1))];
            add(a, type, values.fresh(type));
        }
    }

    Timestamp random_time() {
        return config.end_time - Seconds{rng.uniform(0, config.time_span.count())};
    }

    EntityType pick_link_type() {
        double total = 0;
        for (const auto& [type, w] : config.entity_mix) total += w;
        double r = rng.unit() * total;
        EntityType last = config.entity_mix.begin()->first;
        for (const auto& [type, w] : config.entity_mix) {
            if (w <= 0) continue;
            last = type;
            if (r < w) return type;
            r -= w;
        }
        return last;
    }

    void plant_ti(EntityType type, const std::string& value) {
        if (!catalog.ti_gated(type)) {
            return;
        }
        const Verdict verdict = rng.chance(config.ti_malicious_fraction) ? Verdict::malicious : Verdict::benign;
        ti.push_back(TiRecord{type, value, verdict, config.end_time - Seconds{rng.uniform(0, config.ti_max_age.count())}});
    }

    struct Planted {
        EntityType type;
        std::string value;
        Timestamp newest;
        Seconds spread;
    };

    void generate_org(int org_index) {
        const std::string org = "org-" + std::to_string(org_index);
        std::vector<std::pair<std::string, DetectorKind>> detectors;
        const int custom = static_cast<int>(config.custom_detector_fraction * config.detectors_per_org);
        for (int j = 0; j < config.detectors_per_org; ++j) {
            detectors.emplace_back(org + "/det-" + std::to_string(j), j < custom ? DetectorKind::custom : DetectorKind::builtin);
        }
        std::size_t round_robin = static_cast<std::size_t>(rng.uniform(0, config.detectors_per_org - 1));
        auto next_detector = [&]() -> const std::pair<std::string, DetectorKind>& {
            return detectors[round_robin++ % detectors.size()];
        };

        std::vector<Planted> planted;
        std::uint64_t incident_alerts = 0;
        for (int inc = 0; inc < config.incidents_per_org; ++inc) {
            const std::string label = org + "/inc-" + std::to_string(inc);
            const int size = static_cast<int>(rng.uniform(config.incident_size.min, config.incident_size.max));
            const EntityType link = pick_link_type();
            Seconds spread = std::min({config.incident_spread, catalog.window(link), config.time_span - config.source_window});
            const Timestamp newest = config.anchor_in_source
                                         ? config.end_time - Seconds{rng.uniform(0, config.source_window.count())}
                                         : config.end_time - Seconds{rng.uniform(0, (config.time_span - spread).count())};
            std::optional<EntityType> second;
            if (rng.chance(config.second_link_probability)) {
                const EntityType t = pick_link_type();
                if (t != link && catalog.window(t) >= spread) second = t;
            }
            const std::uint64_t block = values.fresh_block();
            const std::string link_value =
                link == EntityType::IPRange ? block_prefix(block) + ".0/24" : values.fresh(link);
            const std::string second_value = second ? values.fresh(*second) : std::string();
            plant_ti(link, link_value);
            if (second) plant_ti(*second, second_value);
            planted.push_back(Planted{link, link_value, newest, spread});

            for (int k = 0; k < size; ++k) {
                const Timestamp t = k == 0 ? newest : newest - Seconds{rng.uniform(0, spread.count())};
                const auto& [det, kind] = next_detector();
                Alert& a = emit(org, det, kind, t, label);
                if (link == EntityType::IPRange) {
                    add(a, EntityType::IP, block_prefix(block) + "." + std::to_string(1 + k % 254));
                }
                add(a, link, link_value);
                if (second) add(a, *second, second_value);
                add_extras(a);
                ++incident_alerts;
            }
        }

        const auto noise = static_cast<std::uint64_t>(
            static_cast<double>(incident_alerts) * config.noise_alert_fraction / (1.0 - config.noise_alert_fraction) + 0.5);
        for (std::uint64_t i = 0; i < noise; ++i) {
            const auto& [det, kind] = next_detector();
            Alert& a = emit(org, det, kind, random_time(), "");
            if (rng.chance(config.collision_rate)) {
                const auto slot = rng.uniform(0, config.collision_pool_size - 1);
                add(a, EntityType::UserId, "shared-user-" + std::to_string(slot));
            }
            add_extras(a);
            if (a.entities.empty()) add(a, EntityType::DeviceId, values.fresh(EntityType::DeviceId));
        }

        if (config.noisy_detector) {
            const auto& spec = *config.noisy_detector;
            const double days = static_cast<double>(config.time_span.count()) / 86400.0;
            const auto count = static_cast<std::uint64_t>(std::ceil(spec.alerts_per_day * days - 1e-9));
            const std::string det = org + "/noisy";
            for (std::uint64_t i = 0; i < count; ++i) {
                Timestamp t = random_time();
                const Planted* target = nullptr;
                if (!planted.empty()) {
                    target = &planted[static_cast<std::size_t>(rng.uniform(0, static_cast<std::int64_t>(planted.size()) - 1))];
                    t = target->newest - Seconds{rng.uniform(0, target->spread.count())};
                }
                Alert& a = emit(org, det, DetectorKind::custom, t, "noisy");
                if (target != nullptr) add(a, target->type, target->value);
                for (int f = 0; f < spec.entity_fanout; ++f) add(a, spec.fanout_type, values.fresh(spec.fanout_type));
            }
        }
    }
};

}  // namespace

GeneratedData generate_synthetic_alerts(const GeneratorConfig& config, const EntityCatalog& catalog) {
    config.validate();
    Builder b(config, catalog);
    for (int org = 0; org < config.org_count; ++org) {
        b.generate_org(org);
    }
    for (auto& a : b.alerts) {
        derive_missing_ip_ranges(a.entities);
    }
    GeneratedData out;
    out.alerts = AlertTable(std::move(b.alerts));
    out.labels = std::move(b.labels);
    std::sort(b.ti.begin(), b.ti.end(), [](const TiRecord& x, const TiRecord& y) {
        return std::tie(x.entity_type, x.value) < std::tie(y.entity_type, y.value);
    });
    out.ti_feed = std::move(b.ti);
    return out;
}

void write_ground_truth(std::ostream& out, const std::vector<GroundTruthLabel>& labels) {
    for (const auto& l : labels) {
        out << nlohmann::json{{"alert_id", l.alert_id}, {"incident", l.incident}}.dump() << '\n';
    }
}

}  // namespace corrgraph
