#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "corrgraph/entity_catalog.hpp"
#include "corrgraph/time.hpp"

namespace corrgraph {

enum class Verdict { malicious, benign, unknown };

std::string_view verdict_name(Verdict v) noexcept;
std::optional<Verdict> parse_verdict(std::string_view name) noexcept;

enum class TiVerdict { malicious, not_malicious };

struct TiRecord {
    EntityType entity_type;
    std::string value;
    Verdict verdict;
    Timestamp last_confirmed;

    bool operator==(const TiRecord&) const = default;
};

/// In-memory threat-intelligence index keyed by (entity_type, value).
///
/// SHA1 and FileName verdicts never expire. An IPRange is malicious only if it
/// was confirmed within `ip_range_recency` of the lookup instant. Records with
/// verdict benign or unknown are retained and read as not_malicious.
class TiStore {
public:
    static constexpr Seconds kDefaultIpRangeRecency = std::chrono::hours{48};

    explicit TiStore(const EntityCatalog& catalog = EntityCatalog::defaults(),
                     Seconds ip_range_recency = kDefaultIpRangeRecency);

    /// Adds a record; for an existing key the later last_confirmed wins (a tie
    /// keeps the record added last). Throws SchemaError for non-gated types.
    void add(TiRecord record);

    /// Throws NotGated if the entity type is not TI-gated.
    TiVerdict lookup(const EntityValue& entity, Timestamp now) const;
    bool is_malicious(EntityType type, std::string_view value, Timestamp now) const;

    bool gated(EntityType type) const noexcept { return gated_[ordinal(type)]; }
    const TiRecord* find(EntityType type, std::string_view value) const;
    std::size_t size() const noexcept { return records_.size(); }
    std::vector<TiRecord> records() const;

private:
    std::array<bool, kEntityTypeCount> gated_{};
    Seconds ip_range_recency_;
    std::map<std::pair<EntityType, std::string>, TiRecord, std::less<>> records_;
};

/// CSV with header entity_type,value,verdict,last_confirmed. Values are
/// normalized like alert entities. Throws SchemaError carrying the row index.
TiStore load_ti(std::istream& in, const EntityCatalog& catalog = EntityCatalog::defaults());
TiStore load_ti(const std::filesystem::path& path, const EntityCatalog& catalog = EntityCatalog::defaults());

void write_ti(std::ostream& out, std::span<const TiRecord> records);

}  // namespace corrgraph
