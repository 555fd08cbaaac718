#include "corrgraph/correlation.hpp"

#include <array>
#include <tuple>

#include "corrgraph/errors.hpp"

namespace corrgraph {

namespace {

constexpr std::array<std::string_view, kRejectStageCount> kStageNames = {"time_window", "threat_intel", "black_hole",
                                                                         "deduplicated", "mst_pruned"};

EntityType entity_field(const nlohmann::json& obj) {
    const auto name = obj.at("entity_type").get<std::string>();
    const auto type = parse_entity_type(name);
    if (!type) {
        throw SchemaError("unknown entity type '" + name + "'");
    }
    return *type;
}

}  // namespace

bool canonical_less(const CandidateCorrelation& x, const CandidateCorrelation& y) noexcept {
    if (const int c = x.org_id.compare(y.org_id)) return c < 0;
    if (const int c = x.alert_a.compare(y.alert_a)) return c < 0;
    if (const int c = x.alert_b.compare(y.alert_b)) return c < 0;
    if (x.entity_type != y.entity_type) return x.entity_type < y.entity_type;
    return x.entity_value < y.entity_value;
}

bool same_pair(const CandidateCorrelation& x, const CandidateCorrelation& y) noexcept {
    return x.org_id == y.org_id && x.alert_a == y.alert_a && x.alert_b == y.alert_b;
}

bool canonical_less(const RejectedCorrelation& x, const RejectedCorrelation& y) noexcept {
    if (x.stage != y.stage) return x.stage < y.stage;
    if (canonical_less(x.candidate, y.candidate)) return true;
    if (canonical_less(y.candidate, x.candidate)) return false;
    return x.detail < y.detail;
}

std::string_view stage_name(RejectStage stage) noexcept { return kStageNames[static_cast<std::size_t>(stage)]; }

std::optional<RejectStage> parse_stage(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kStageNames.size(); ++i) {
        if (kStageNames[i] == name) {
            return static_cast<RejectStage>(i);
        }
    }
    return std::nullopt;
}

nlohmann::json correlation_to_json(const CandidateCorrelation& c) {
    return {{"org_id", c.org_id},
            {"alert_a", c.alert_a},
            {"alert_b", c.alert_b},
            {"detector_a", c.detector_a},
            {"detector_b", c.detector_b},
            {"entity_type", entity_name(c.entity_type)},
            {"entity_value", c.entity_value},
            {"time_delta_seconds", c.time_delta.count()},
            {"priority", c.priority}};
}

CandidateCorrelation correlation_from_json(const nlohmann::json& obj) {
    try {
        CandidateCorrelation c;
        c.org_id = obj.at("org_id").get<std::string>();
        c.alert_a = obj.at("alert_a").get<std::string>();
        c.alert_b = obj.at("alert_b").get<std::string>();
        c.detector_a = obj.value("detector_a", "");
        c.detector_b = obj.value("detector_b", "");
        c.entity_type = entity_field(obj);
        c.entity_value = obj.at("entity_value").get<std::string>();
        c.time_delta = Seconds{obj.at("time_delta_seconds").get<long long>()};
        c.priority = obj.at("priority").get<int>();
        if (!(c.alert_a < c.alert_b)) {
            throw SchemaError("correlation pair is not canonical (alert_a < alert_b)");
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("correlation: ") + e.what());
    }
}

nlohmann::json rejected_to_json(const RejectedCorrelation& r) {
    auto obj = correlation_to_json(r.candidate);
    obj["stage"] = stage_name(r.stage);
    obj["detail"] = r.detail;
    return obj;
}

RejectedCorrelation rejected_from_json(const nlohmann::json& obj) {
    RejectedCorrelation r;
    r.candidate = correlation_from_json(obj);
    try {
        const auto name = obj.at("stage").get<std::string>();
        const auto stage = parse_stage(name);
        if (!stage) {
            throw SchemaError("unknown reject stage '" + name + "'");
        }
        r.stage = *stage;
        r.detail = obj.value("detail", "");
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("rejected correlation: ") + e.what());
    }
    return r;
}

}  // namespace corrgraph
