#include "corrgraph/entity_catalog.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "corrgraph/errors.hpp"

namespace corrgraph {

namespace {

constexpr std::array<std::string_view, kEntityTypeCount> kNames = {
    "SessionId",   "EmailId",      "CampaignId", "EmailCluster", "UserId",        "URL",
    "DeviceId",    "SHA1",         "FileName",   "AppId",        "EmailAddress",  "EmailSubject",
    "RegistryKey", "RegistryValue", "ResourceId", "IP",          "IPRange",
};

constexpr EntitySpec row(EntityType type, int priority, int hours, bool gated) {
    return EntitySpec{type, priority, Seconds{hours * 3600LL}, gated};
}

constexpr std::array<EntitySpec, kEntityTypeCount> kDefaultSpecs = {
    row(EntityType::SessionId, 1, 48, false),
    row(EntityType::EmailId, 2, 48, false),
    row(EntityType::CampaignId, 3, 72, false),
    row(EntityType::EmailCluster, 4, 72, false),
    row(EntityType::UserId, 5, 24, false),
    row(EntityType::URL, 6, 48, false),
    row(EntityType::DeviceId, 7, 24, false),
    row(EntityType::SHA1, 8, 24, true),
    row(EntityType::FileName, 9, 24, true),
    row(EntityType::AppId, 10, 48, false),
    row(EntityType::EmailAddress, 11, 12, false),
    row(EntityType::EmailSubject, 12, 12, false),
    row(EntityType::RegistryKey, 14, 24, false),
    row(EntityType::RegistryValue, 13, 24, false),
    row(EntityType::ResourceId, 15, 24, false),
    row(EntityType::IP, 16, 8, false),
    row(EntityType::IPRange, 17, 8, true),
};

bool case_insensitive(EntityType type) {
    switch (type) {
    case EntityType::FileName:
    case EntityType::URL:
    case EntityType::EmailAddress:
    case EntityType::SHA1:
        return true;
    default:
        return false;
    }
}

// Parses one decimal octet without leading '+' or '-'; rejects > 255.
std::optional<int> parse_octet(std::string_view part) {
    if (part.empty() || part.size() > 3) {
        return std::nullopt;
    }
    int value = 0;
    for (const char c : part) {
        if (!std::isdigit(static_cast<unsigned char>(c))) {
            return std::nullopt;
        }
        value = value * 10 + (c - '0');
    }
    if (value > 255) {
        return std::nullopt;
    }
    return value;
}

}  // namespace

std::string_view entity_name(EntityType type) noexcept { return kNames[ordinal(type)]; }

std::optional<EntityType> parse_entity_type(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kNames.size(); ++i) {
        if (kNames[i] == name) {
            return kAllEntityTypes[i];
        }
    }
    return std::nullopt;
}

EntityCatalog::EntityCatalog(const std::array<EntitySpec, kEntityTypeCount>& specs) : specs_(specs) {
    std::array<bool, kEntityTypeCount + 1> seen{};
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        const auto& s = specs_[i];
        if (s.type != kAllEntityTypes[i]) {
            throw ConfigError("catalog rows must be indexed by entity ordinal");
        }
        if (s.priority < 1 || s.priority > static_cast<int>(kEntityTypeCount)) {
            throw ConfigError("priority of " + std::string(entity_name(s.type)) + " outside 1..17");
        }
        if (seen[s.priority]) {
            throw ConfigError("priority " + std::to_string(s.priority) + " assigned twice; priorities must be a permutation of 1..17");
        }
        seen[s.priority] = true;
        if (s.max_window <= Seconds{0}) {
            throw ConfigError("window of " + std::string(entity_name(s.type)) + " must be positive");
        }
        max_window_ = std::max(max_window_, s.max_window);
    }
}

EntityCatalog EntityCatalog::defaults() { return EntityCatalog(kDefaultSpecs); }

EntityCatalog EntityCatalog::with_overrides(const nlohmann::json& overrides, const EntityCatalog& base) {
    if (!overrides.is_object()) {
        throw ConfigError("catalog override must be a JSON object keyed by entity name");
    }
    auto specs = base.specs_;
    for (const auto& [name, fields] : overrides.items()) {
        const auto type = parse_entity_type(name);
        if (!type) {
            throw ConfigError("unknown entity type in catalog override: " + name);
        }
        if (!fields.is_object()) {
            throw ConfigError("catalog override for " + name + " must be an object");
        }
        auto& spec = specs[ordinal(*type)];
        try {
            if (fields.contains("priority")) {
                spec.priority = fields.at("priority").get<int>();
            }
            if (fields.contains("window_hours")) {
                const double hours = fields.at("window_hours").get<double>();
                spec.max_window = Seconds{static_cast<long long>(hours * 3600.0)};
            }
            if (fields.contains("ti_gated")) {
                spec.ti_gated = fields.at("ti_gated").get<bool>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("catalog override for " + name + ": " + e.what());
        }
    }
    return EntityCatalog(specs);
}

EntityCatalog EntityCatalog::load_overrides(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open catalog override " + path.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("catalog override " + path.string() + ": " + e.what());
    }
    return with_overrides(doc, defaults());
}

nlohmann::json EntityCatalog::to_json() const {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& s : specs_) {
        out[std::string(entity_name(s.type))] = {
            {"priority", s.priority},
            {"window_hours", static_cast<double>(s.max_window.count()) / 3600.0},
            {"ti_gated", s.ti_gated},
        };
    }
    return out;
}

std::vector<EntitySpec> default_catalog() { return {kDefaultSpecs.begin(), kDefaultSpecs.end()}; }

std::optional<EntityValue> normalize_entity_value(EntityType type, std::string_view raw) {
    auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!raw.empty() && is_space(raw.front())) {
        raw.remove_prefix(1);
    }
    while (!raw.empty() && is_space(raw.back())) {
        raw.remove_suffix(1);
    }
    if (raw.empty()) {
        return std::nullopt;
    }
    std::string value(raw);
    if (case_insensitive(type)) {
        std::transform(value.begin(), value.end(), value.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    }
    return EntityValue{type, std::move(value)};
}

EntityValue derive_ip_range(const EntityValue& ip) {
    if (ip.type != EntityType::IP) {
        throw ParseError("IPRange can only be derived from an IP entity");
    }
    std::array<int, 4> octets{};
    std::string_view rest = ip.value;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto dot = rest.find('.');
        const bool last = i == 3;
        if (last != (dot == std::string_view::npos)) {
            throw ParseError("not an IPv4 address: '" + ip.value + "'");
        }
        const auto part = last ? rest : rest.substr(0, dot);
        const auto octet = parse_octet(part);
        if (!octet) {
            throw ParseError("not an IPv4 address: '" + ip.value + "'");
        }
        octets[i] = *octet;
        if (!last) {
            rest.remove_prefix(dot + 1);
        }
    }
    return EntityValue{EntityType::IPRange, std::to_string(octets[0]) + "." + std::to_string(octets[1]) + "." +
                                                std::to_string(octets[2]) + ".0/24"};
}

}  // namespace corrgraph
