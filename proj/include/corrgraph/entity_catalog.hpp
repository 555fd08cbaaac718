#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "corrgraph/time.hpp"

namespace corrgraph {

/// The seventeen correlatable entity types. The enumerator order is the
/// stable ordinal used for every deterministic tie-break in the engine.
enum class EntityType : std::uint8_t {
    SessionId,
    EmailId,
    CampaignId,
    EmailCluster,
    UserId,
    URL,
    DeviceId,
    SHA1,
    FileName,
    AppId,
    EmailAddress,
    EmailSubject,
    RegistryKey,
    RegistryValue,
    ResourceId,
    IP,
    IPRange,
};

inline constexpr std::size_t kEntityTypeCount = 17;

constexpr std::size_t ordinal(EntityType type) noexcept { return static_cast<std::size_t>(type); }

inline constexpr std::array<EntityType, kEntityTypeCount> kAllEntityTypes = {
    EntityType::SessionId,    EntityType::EmailId,      EntityType::CampaignId,  EntityType::EmailCluster,
    EntityType::UserId,       EntityType::URL,          EntityType::DeviceId,    EntityType::SHA1,
    EntityType::FileName,     EntityType::AppId,        EntityType::EmailAddress, EntityType::EmailSubject,
    EntityType::RegistryKey,  EntityType::RegistryValue, EntityType::ResourceId, EntityType::IP,
    EntityType::IPRange,
};

std::string_view entity_name(EntityType type) noexcept;
std::optional<EntityType> parse_entity_type(std::string_view name) noexcept;

struct EntitySpec {
    EntityType type;
    int priority;       // 1 = highest
    Seconds max_window; // maximum correlation time between two alerts sharing this entity
    bool ti_gated;

    bool operator==(const EntitySpec&) const = default;
};

/// A canonical (already normalized) entity value.
struct EntityValue {
    EntityType type;
    std::string value;

    auto operator<=>(const EntityValue&) const = default;
};

/// Immutable entity specification table. Construction validates that the
/// priorities form a permutation of 1..17 and that every window is positive.
class EntityCatalog {
public:
    EntityCatalog() : EntityCatalog(defaults()) {}
    explicit EntityCatalog(const std::array<EntitySpec, kEntityTypeCount>& specs);

    static EntityCatalog defaults();

    /// Applies overrides of the form {"IP": {"priority": 16, "window_hours": 12, "ti_gated": false}}
    /// on top of `base`. Throws ConfigError on unknown names or an invalid result.
    static EntityCatalog with_overrides(const nlohmann::json& overrides, const EntityCatalog& base);
    static EntityCatalog load_overrides(const std::filesystem::path& path);

    const EntitySpec& spec(EntityType type) const noexcept { return specs_[ordinal(type)]; }
    int priority(EntityType type) const noexcept { return spec(type).priority; }
    Seconds window(EntityType type) const noexcept { return spec(type).max_window; }
    bool ti_gated(EntityType type) const noexcept { return spec(type).ti_gated; }
    Seconds max_window() const noexcept { return max_window_; }

    std::span<const EntitySpec, kEntityTypeCount> specs() const noexcept { return specs_; }

    nlohmann::json to_json() const;

private:
    std::array<EntitySpec, kEntityTypeCount> specs_;
    Seconds max_window_{0};
};

/// The default table: priorities, windows and TI gating per entity type.
std::vector<EntitySpec> default_catalog();

/// Trims surrounding whitespace and case-folds FileName, URL, EmailAddress and
/// SHA1. Returns nullopt when nothing usable remains.
std::optional<EntityValue> normalize_entity_value(EntityType type, std::string_view raw);

/// Maps an IPv4 address to its /24 network ("10.1.2.77" -> "10.1.2.0/24").
/// Throws ParseError for anything that is not a dotted-quad IPv4 address.
EntityValue derive_ip_range(const EntityValue& ip);

}  // namespace corrgraph
