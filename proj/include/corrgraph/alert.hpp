#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "corrgraph/entity_catalog.hpp"
#include "corrgraph/time.hpp"

namespace corrgraph {

enum class DetectorKind : std::uint8_t { builtin, custom };

std::string_view detector_kind_name(DetectorKind kind) noexcept;
std::optional<DetectorKind> parse_detector_kind(std::string_view name) noexcept;

/// Set of entity values per type, stored flat and sorted by (type, value).
class EntityBag {
public:
    EntityBag() = default;

    /// Inserts a value; duplicates collapse. Returns false if already present.
    bool insert(EntityValue value);

    std::span<const EntityValue> values(EntityType type) const noexcept;
    std::size_t count(EntityType type) const noexcept { return values(type).size(); }
    bool contains(const EntityValue& value) const noexcept;

    std::span<const EntityValue> all() const noexcept { return items_; }
    std::size_t size() const noexcept { return items_.size(); }
    bool empty() const noexcept { return items_.empty(); }

    bool operator==(const EntityBag&) const = default;

private:
    std::vector<EntityValue> items_;
};

struct Alert {
    std::string alert_id;
    std::string org_id;
    std::string detector_id;
    DetectorKind detector_kind = DetectorKind::builtin;
    Timestamp timestamp;
    EntityBag entities;

    bool operator==(const Alert&) const = default;
};

/// Adds the /24 IPRange of every IPv4 address when the alert carries no
/// IPRange of its own. Non-IPv4 addresses are left without a range.
void derive_missing_ip_ranges(EntityBag& bag);

/// Immutable, canonically ordered (timestamp, alert_id) collection of alerts.
/// Time slices share storage with their parent table.
class AlertTable {
public:
    AlertTable() = default;

    /// Sorts into canonical order. Throws SchemaError on a duplicate alert_id
    /// or an empty org_id.
    explicit AlertTable(std::vector<Alert> rows);

    std::span<const Alert> rows() const noexcept;
    std::size_t size() const noexcept { return end_ - begin_; }
    bool empty() const noexcept { return begin_ == end_; }
    std::optional<Timestamp> watermark() const noexcept;

    /// Alerts with from <= timestamp <= to.
    AlertTable slice_by_time(Timestamp from, Timestamp to) const;

private:
    AlertTable(std::shared_ptr<const std::vector<Alert>> storage, std::size_t begin, std::size_t end)
        : storage_(std::move(storage)), begin_(begin), end_(end) {}

    std::shared_ptr<const std::vector<Alert>> storage_;
    std::size_t begin_ = 0;
    std::size_t end_ = 0;
};

/// alert_id lookup over a table. The table must outlive the index.
class AlertIndex {
public:
    explicit AlertIndex(const AlertTable& table);
    explicit AlertIndex(std::span<const Alert* const> alerts);

    const Alert* find(std::string_view alert_id) const noexcept;

private:
    std::unordered_map<std::string_view, const Alert*> by_id_;
};

enum class AlertFormat { jsonl, csv };

std::optional<AlertFormat> parse_alert_format(std::string_view name) noexcept;

struct RowError {
    std::size_t row;  // 0-based data row (header excluded)
    std::string message;
};

struct LoadResult {
    AlertTable table;
    std::vector<RowError> errors;  // skipped rows
};

enum class LoadMode { lenient, strict };

/// Reads alerts, normalizing entity values and deriving missing IPRanges.
/// Lenient mode skips and reports malformed rows; strict mode throws
/// SchemaError on the first one.
LoadResult load_alerts(std::istream& in, AlertFormat format, LoadMode mode = LoadMode::lenient);
LoadResult load_alerts(const std::filesystem::path& path, AlertFormat format, LoadMode mode = LoadMode::lenient);

void write_alerts(std::ostream& out, const AlertTable& table, AlertFormat format);

nlohmann::json alert_to_json(const Alert& alert);

/// Parses one JSON alert object. Throws SchemaError without a row index.
Alert alert_from_json(const nlohmann::json& obj);

struct WindowSlices {
    AlertTable source;
    AlertTable target;
};

/// Splits a batch into the recent source slice and the historical target
/// slice: both contain alerts with 0 <= now - timestamp <= window. Throws
/// InvalidWindow when source_window > target_window.
WindowSlices window_slice(const AlertTable& table, Timestamp now, Seconds source_window = std::chrono::minutes{35},
                          Seconds target_window = std::chrono::hours{72});

}  // namespace corrgraph
