#include "corrgraph/profiler.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "corrgraph/errors.hpp"

namespace corrgraph {

double DetectorProfile::alerts_per_day() const noexcept {
    return window_days > 0 ? static_cast<double>(total_alerts) / window_days : 0.0;
}

double DetectorProfile::share_of_org_alerts() const noexcept {
    return org_total_alerts > 0 ? static_cast<double>(total_alerts) / static_cast<double>(org_total_alerts) : 0.0;
}

double DetectorProfile::avg_distinct(EntityType type) const noexcept {
    return total_alerts > 0
               ? static_cast<double>(distinct_value_totals[ordinal(type)]) / static_cast<double>(total_alerts)
               : 0.0;
}

std::uint64_t SafetyThresholds::limit_for(EntityType type) const noexcept {
    return high_fanout_types.contains(type) ? max_avg_distinct_high : max_avg_distinct_default;
}

void SafetyThresholds::validate() const {
    if (!(max_share > 0.0) || max_per_day == 0 || max_avg_distinct_default == 0 || max_avg_distinct_high == 0) {
        throw ConfigError("safety thresholds must be positive");
    }
    if (max_avg_distinct_high < max_avg_distinct_default) {
        throw ConfigError("max_avg_distinct_high must be at least max_avg_distinct_default");
    }
}

SafetyThresholds SafetyThresholds::from_json(const nlohmann::json& doc) {
    SafetyThresholds t;
    if (!doc.is_object()) {
        throw ConfigError("thresholds must be a JSON object");
    }
    try {
        if (doc.contains("max_share")) t.max_share = doc.at("max_share").get<double>();
        if (doc.contains("max_per_day")) t.max_per_day = doc.at("max_per_day").get<std::uint64_t>();
        if (doc.contains("max_avg_distinct_default"))
            t.max_avg_distinct_default = doc.at("max_avg_distinct_default").get<std::uint64_t>();
        if (doc.contains("max_avg_distinct_high"))
            t.max_avg_distinct_high = doc.at("max_avg_distinct_high").get<std::uint64_t>();
        if (doc.contains("high_fanout_types")) {
            t.high_fanout_types.clear();
            for (const auto& name : doc.at("high_fanout_types")) {
                const auto type = parse_entity_type(name.get<std::string>());
                if (!type) {
                    throw ConfigError("unknown entity type in high_fanout_types: " + name.get<std::string>());
                }
                t.high_fanout_types.insert(*type);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("thresholds: ") + e.what());
    }
    t.validate();
    return t;
}

nlohmann::json SafetyThresholds::to_json() const {
    nlohmann::json types = nlohmann::json::array();
    for (const auto t : high_fanout_types) {
        types.push_back(entity_name(t));
    }
    return {{"max_share", max_share},
            {"max_per_day", max_per_day},
            {"max_avg_distinct_default", max_avg_distinct_default},
            {"max_avg_distinct_high", max_avg_distinct_high},
            {"high_fanout_types", types}};
}

ProfileMap profile_detectors(const AlertTable& alerts, Timestamp now, int window_days) {
    if (window_days < 1) {
        throw ConfigError("profiling window must be at least one day");
    }
    const auto window = alerts.slice_by_time(now - std::chrono::days{window_days}, now);
    ProfileMap profiles;
    std::map<std::string, std::uint64_t, std::less<>> org_totals;
    for (const auto& a : window.rows()) {
        auto [it, inserted] = profiles.try_emplace(DetectorKey{a.org_id, a.detector_id});
        auto& p = it->second;
        if (inserted) {
            p.org_id = a.org_id;
            p.detector_id = a.detector_id;
            p.window_days = window_days;
        }
        ++p.total_alerts;
        for (const auto& v : a.entities.all()) {
            ++p.distinct_value_totals[ordinal(v.type)];
        }
        ++org_totals[a.org_id];
    }
    for (auto& [key, p] : profiles) {
        p.org_total_alerts = org_totals.find(key.org_id)->second;
    }
    return profiles;
}

bool detector_is_safe(const DetectorProfile& profile, const SafetyThresholds& thresholds) {
    if (profile.total_alerts == 0 || profile.window_days < 1) {
        return false;  // no history
    }
    if (!(profile.share_of_org_alerts() < thresholds.max_share)) {
        return false;
    }
    // alerts_per_day < max_per_day, kept in integers
    if (profile.total_alerts >= thresholds.max_per_day * static_cast<std::uint64_t>(profile.window_days)) {
        return false;
    }
    for (const auto type : kAllEntityTypes) {
        // avg_distinct <= limit, kept in integers
        if (profile.distinct_value_totals[ordinal(type)] > thresholds.limit_for(type) * profile.total_alerts) {
            return false;
        }
    }
    return true;
}

bool alert_is_low_evidence(const Alert& alert, const SafetyThresholds& thresholds) {
    for (const auto type : kAllEntityTypes) {
        if (alert.entities.count(type) > thresholds.limit_for(type)) {
            return false;
        }
    }
    return true;
}

nlohmann::json profile_to_json(const DetectorProfile& p) {
    nlohmann::json totals = nlohmann::json::object();
    nlohmann::json averages = nlohmann::json::object();
    for (const auto type : kAllEntityTypes) {
        if (p.distinct_value_totals[ordinal(type)] > 0) {
            totals[std::string(entity_name(type))] = p.distinct_value_totals[ordinal(type)];
            averages[std::string(entity_name(type))] = p.avg_distinct(type);
        }
    }
    return {{"schema_version", 1},
            {"org_id", p.org_id},
            {"detector_id", p.detector_id},
            {"window_days", p.window_days},
            {"total_alerts", p.total_alerts},
            {"org_total_alerts", p.org_total_alerts},
            {"alerts_per_day", p.alerts_per_day()},
            {"share_of_org_alerts", p.share_of_org_alerts()},
            {"distinct_value_totals", totals},
            {"avg_distinct_per_entity", averages}};
}

DetectorProfile profile_from_json(const nlohmann::json& obj) {
    DetectorProfile p;
    try {
        p.org_id = obj.at("org_id").get<std::string>();
        p.detector_id = obj.at("detector_id").get<std::string>();
        p.window_days = obj.at("window_days").get<int>();
        p.total_alerts = obj.at("total_alerts").get<std::uint64_t>();
        p.org_total_alerts = obj.at("org_total_alerts").get<std::uint64_t>();
        if (obj.contains("distinct_value_totals")) {
            for (const auto& [name, value] : obj.at("distinct_value_totals").items()) {
                const auto type = parse_entity_type(name);
                if (!type) {
                    throw SchemaError("unknown entity type '" + name + "' in profile");
                }
                p.distinct_value_totals[ordinal(*type)] = value.get<std::uint64_t>();
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("profile: ") + e.what());
    }
    if (p.window_days < 1 || p.org_total_alerts < p.total_alerts) {
        throw SchemaError("profile has inconsistent totals");
    }
    return p;
}

void write_profiles(std::ostream& out, const ProfileMap& profiles) {
    for (const auto& [key, p] : profiles) {
        out << profile_to_json(p).dump() << '\n';
    }
}

ProfileMap read_profiles(std::istream& in) {
    ProfileMap profiles;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            auto p = profile_from_json(nlohmann::json::parse(line));
            DetectorKey key{p.org_id, p.detector_id};
            profiles.insert_or_assign(std::move(key), std::move(p));
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(e.what(), row);
        } catch (const SchemaError& e) {
            throw SchemaError(e.what(), row);
        }
        ++row;
    }
    return profiles;
}

ProfileMap read_profiles(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw SchemaError("cannot open profiles " + path.string());
    }
    return read_profiles(in);
}

}  // namespace corrgraph
