#include "corrgraph/alert.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "corrgraph/csv.hpp"
#include "corrgraph/errors.hpp"

namespace corrgraph {

namespace {

constexpr std::array<std::string_view, 5> kCsvFixedColumns = {"alert_id", "org_id", "detector_id", "detector_kind",
                                                               "timestamp"};

bool canonical_less(const Alert& a, const Alert& b) {
    if (a.timestamp != b.timestamp) {
        return a.timestamp < b.timestamp;
    }
    return a.alert_id < b.alert_id;
}

const std::string& required_string(const nlohmann::json& obj, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        throw SchemaError(std::string("missing required field '") + key + "'");
    }
    if (!it->is_string()) {
        throw SchemaError(std::string("field '") + key + "' must be a string");
    }
    const auto& value = it->get_ref<const std::string&>();
    if (value.empty()) {
        throw SchemaError(std::string("field '") + key + "' must be non-empty");
    }
    return value;
}

Timestamp parse_row_timestamp(std::string_view text) {
    try {
        return parse_rfc3339(text);
    } catch (const ParseError& e) {
        throw SchemaError(std::string("bad timestamp: ") + e.what());
    }
}

void add_raw_value(EntityBag& bag, EntityType type, std::string_view raw) {
    if (auto value = normalize_entity_value(type, raw)) {
        bag.insert(std::move(*value));
    }
}

Alert alert_from_csv(const std::vector<std::string>& fields, const std::vector<std::optional<EntityType>>& columns,
                     const std::vector<std::string>& header) {
    if (fields.size() != header.size()) {
        throw SchemaError("expected " + std::to_string(header.size()) + " columns, found " +
                          std::to_string(fields.size()));
    }
    Alert alert;
    bool has_timestamp = false;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const auto& name = header[i];
        const auto& field = fields[i];
        if (columns[i]) {
            std::string_view rest = field;
            while (!rest.empty()) {
                const auto semi = rest.find(';');
                add_raw_value(alert.entities, *columns[i], rest.substr(0, semi));
                if (semi == std::string_view::npos) {
                    break;
                }
                rest.remove_prefix(semi + 1);
            }
        } else if (name == "alert_id") {
            alert.alert_id = field;
        } else if (name == "org_id") {
            alert.org_id = field;
        } else if (name == "detector_id") {
            alert.detector_id = field;
        } else if (name == "detector_kind") {
            if (!field.empty()) {
                const auto kind = parse_detector_kind(field);
                if (!kind) {
                    throw SchemaError("unknown detector_kind '" + field + "'");
                }
                alert.detector_kind = *kind;
            }
        } else if (name == "timestamp") {
            if (field.empty()) {
                throw SchemaError("missing required field 'timestamp'");
            }
            alert.timestamp = parse_row_timestamp(field);
            has_timestamp = true;
        }
    }
    const std::pair<const char*, const std::string*> required[] = {
        {"alert_id", &alert.alert_id}, {"org_id", &alert.org_id}, {"detector_id", &alert.detector_id}};
    for (const auto& [key, value] : required) {
        if (value->empty()) {
            throw SchemaError(std::string("missing required field '") + key + "'");
        }
    }
    if (!has_timestamp) {
        throw SchemaError("missing required field 'timestamp'");
    }
    derive_missing_ip_ranges(alert.entities);
    return alert;
}

LoadResult finish_load(std::vector<Alert> rows, std::vector<std::size_t> row_numbers, std::vector<RowError> errors,
                       LoadMode mode) {
    // Duplicate ids: keep the first occurrence, report the rest.
    std::unordered_map<std::string, std::size_t> first_row;
    std::vector<Alert> unique;
    unique.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto [it, inserted] = first_row.emplace(rows[i].alert_id, row_numbers[i]);
        if (!inserted) {
            if (mode == LoadMode::strict) {
                throw SchemaError("duplicate alert_id '" + rows[i].alert_id + "'", row_numbers[i]);
            }
            errors.push_back({row_numbers[i], "duplicate alert_id '" + rows[i].alert_id + "'"});
            continue;
        }
        unique.push_back(std::move(rows[i]));
    }
    std::sort(errors.begin(), errors.end(), [](const RowError& a, const RowError& b) { return a.row < b.row; });
    return LoadResult{AlertTable(std::move(unique)), std::move(errors)};
}

}  // namespace

std::string_view detector_kind_name(DetectorKind kind) noexcept {
    return kind == DetectorKind::custom ? "custom" : "builtin";
}

std::optional<DetectorKind> parse_detector_kind(std::string_view name) noexcept {
    if (name == "builtin") return DetectorKind::builtin;
    if (name == "custom") return DetectorKind::custom;
    return std::nullopt;
}

bool EntityBag::insert(EntityValue value) {
    const auto it = std::lower_bound(items_.begin(), items_.end(), value);
    if (it != items_.end() && *it == value) {
        return false;
    }
    items_.insert(it, std::move(value));
    return true;
}

std::span<const EntityValue> EntityBag::values(EntityType type) const noexcept {
    const auto lo = std::partition_point(items_.begin(), items_.end(),
                                         [type](const EntityValue& v) { return v.type < type; });
    const auto hi = std::partition_point(lo, items_.end(), [type](const EntityValue& v) { return v.type == type; });
    return {lo, hi};
}

bool EntityBag::contains(const EntityValue& value) const noexcept {
    return std::binary_search(items_.begin(), items_.end(), value);
}

void derive_missing_ip_ranges(EntityBag& bag) {
    if (bag.count(EntityType::IPRange) > 0) {
        return;
    }
    const auto ips = bag.values(EntityType::IP);
    std::vector<EntityValue> ranges;
    for (const auto& ip : ips) {
        try {
            ranges.push_back(derive_ip_range(ip));
        } catch (const ParseError&) {
            // IPv6 and other non-dotted-quad values carry no /24.
        }
    }
    for (auto& r : ranges) {
        bag.insert(std::move(r));
    }
}

AlertTable::AlertTable(std::vector<Alert> rows) {
    std::sort(rows.begin(), rows.end(), canonical_less);
    std::vector<const Alert*> by_id;
    by_id.reserve(rows.size());
    for (const auto& a : rows) {
        if (a.org_id.empty()) {
            throw SchemaError("alert '" + a.alert_id + "' has an empty org_id");
        }
        by_id.push_back(&a);
    }
    std::sort(by_id.begin(), by_id.end(), [](const Alert* a, const Alert* b) { return a->alert_id < b->alert_id; });
    const auto dup = std::adjacent_find(by_id.begin(), by_id.end(),
                                        [](const Alert* a, const Alert* b) { return a->alert_id == b->alert_id; });
    if (dup != by_id.end()) {
        throw SchemaError("duplicate alert_id '" + (*dup)->alert_id + "'");
    }
    end_ = rows.size();
    storage_ = std::make_shared<const std::vector<Alert>>(std::move(rows));
}

std::span<const Alert> AlertTable::rows() const noexcept {
    if (!storage_) {
        return {};
    }
    return std::span<const Alert>(storage_->data() + begin_, end_ - begin_);
}

std::optional<Timestamp> AlertTable::watermark() const noexcept {
    if (empty()) {
        return std::nullopt;
    }
    return rows().back().timestamp;
}

AlertTable AlertTable::slice_by_time(Timestamp from, Timestamp to) const {
    const auto r = rows();
    const auto lo = std::partition_point(r.begin(), r.end(), [from](const Alert& a) { return a.timestamp < from; });
    const auto hi = std::partition_point(lo, r.end(), [to](const Alert& a) { return a.timestamp <= to; });
    if (lo == hi) {
        return AlertTable{};
    }
    return AlertTable(storage_, begin_ + static_cast<std::size_t>(lo - r.begin()),
                      begin_ + static_cast<std::size_t>(hi - r.begin()));
}

AlertIndex::AlertIndex(const AlertTable& table) {
    by_id_.reserve(table.size());
    for (const auto& a : table.rows()) {
        by_id_.emplace(a.alert_id, &a);
    }
}

AlertIndex::AlertIndex(std::span<const Alert* const> alerts) {
    by_id_.reserve(alerts.size());
    for (const Alert* a : alerts) {
        by_id_.emplace(a->alert_id, a);
    }
}

const Alert* AlertIndex::find(std::string_view alert_id) const noexcept {
    const auto it = by_id_.find(alert_id);
    return it == by_id_.end() ? nullptr : it->second;
}

std::optional<AlertFormat> parse_alert_format(std::string_view name) noexcept {
    if (name == "jsonl") return AlertFormat::jsonl;
    if (name == "csv") return AlertFormat::csv;
    return std::nullopt;
}

nlohmann::json alert_to_json(const Alert& alert) {
    nlohmann::json entities = nlohmann::json::object();
    for (const auto& v : alert.entities.all()) {
        entities[std::string(entity_name(v.type))].push_back(v.value);
    }
    return {
        {"alert_id", alert.alert_id},
        {"org_id", alert.org_id},
        {"detector_id", alert.detector_id},
        {"detector_kind", detector_kind_name(alert.detector_kind)},
        {"timestamp", format_rfc3339(alert.timestamp)},
        {"entities", std::move(entities)},
    };
}

Alert alert_from_json(const nlohmann::json& obj) {
    if (!obj.is_object()) {
        throw SchemaError("alert must be a JSON object");
    }
    Alert alert;
    alert.alert_id = required_string(obj, "alert_id");
    alert.org_id = required_string(obj, "org_id");
    alert.detector_id = required_string(obj, "detector_id");
    if (const auto it = obj.find("detector_kind"); it != obj.end() && !it->is_null()) {
        const auto kind = it->is_string() ? parse_detector_kind(it->get_ref<const std::string&>()) : std::nullopt;
        if (!kind) {
            throw SchemaError("detector_kind must be \"builtin\" or \"custom\"");
        }
        alert.detector_kind = *kind;
    }
    alert.timestamp = parse_row_timestamp(required_string(obj, "timestamp"));
    if (const auto it = obj.find("entities"); it != obj.end() && !it->is_null()) {
        if (!it->is_object()) {
            throw SchemaError("entities must be an object");
        }
        for (const auto& [name, values] : it->items()) {
            const auto type = parse_entity_type(name);
            if (!type) {
                throw SchemaError("unknown entity type '" + name + "'");
            }
            if (!values.is_array()) {
                throw SchemaError("entity '" + name + "' must be an array of strings");
            }
            for (const auto& v : values) {
                if (!v.is_string()) {
                    throw SchemaError("entity '" + name + "' must be an array of strings");
                }
                add_raw_value(alert.entities, *type, v.get_ref<const std::string&>());
            }
        }
    }
    derive_missing_ip_ranges(alert.entities);
    return alert;
}

LoadResult load_alerts(std::istream& in, AlertFormat format, LoadMode mode) {
    std::vector<Alert> rows;
    std::vector<std::size_t> row_numbers;
    std::vector<RowError> errors;

    auto fail = [&](std::size_t row, const std::string& message) {
        if (mode == LoadMode::strict) {
            throw SchemaError(message, row);
        }
        errors.push_back({row, message});
    };

    if (format == AlertFormat::jsonl) {
        std::string line;
        std::size_t row = 0;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) {
                continue;
            }
            const std::size_t this_row = row++;
            try {
                rows.push_back(alert_from_json(nlohmann::json::parse(line)));
                row_numbers.push_back(this_row);
            } catch (const nlohmann::json::exception& e) {
                fail(this_row, std::string("invalid JSON: ") + e.what());
            } catch (const SchemaError& e) {
                fail(this_row, e.what());
            }
        }
        return finish_load(std::move(rows), std::move(row_numbers), std::move(errors), mode);
    }

    const auto header = csv::read_record(in);
    if (!header) {
        return LoadResult{};
    }
    std::vector<std::optional<EntityType>> columns;
    for (const auto& name : *header) {
        const auto type = parse_entity_type(name);
        const bool fixed = std::find(kCsvFixedColumns.begin(), kCsvFixedColumns.end(), name) != kCsvFixedColumns.end();
        if (!type && !fixed) {
            throw SchemaError("unknown CSV column '" + name + "'");
        }
        columns.push_back(type);
    }
    for (const char* required : {"alert_id", "org_id", "detector_id", "timestamp"}) {
        if (std::find(header->begin(), header->end(), required) == header->end()) {
            throw SchemaError(std::string("CSV header lacks required column '") + required + "'");
        }
    }
    std::size_t row = 0;
    while (true) {
        std::optional<std::vector<std::string>> fields;
        try {
            fields = csv::read_record(in);
        } catch (const ParseError& e) {
            fail(row, e.what());
            break;
        }
        if (!fields) {
            break;
        }
        if (fields->size() == 1 && (*fields)[0].empty()) {
            continue;
        }
        const std::size_t this_row = row++;
        try {
            rows.push_back(alert_from_csv(*fields, columns, *header));
            row_numbers.push_back(this_row);
        } catch (const SchemaError& e) {
            fail(this_row, e.what());
        }
    }
    return finish_load(std::move(rows), std::move(row_numbers), std::move(errors), mode);
}

LoadResult load_alerts(const std::filesystem::path& path, AlertFormat format, LoadMode mode) {
    std::ifstream in(path);
    if (!in) {
        throw SchemaError("cannot open alert file " + path.string());
    }
    return load_alerts(in, format, mode);
}

void write_alerts(std::ostream& out, const AlertTable& table, AlertFormat format) {
    if (format == AlertFormat::jsonl) {
        for (const auto& a : table.rows()) {
            out << alert_to_json(a).dump() << '\n';
        }
        return;
    }
    std::vector<std::string> header(kCsvFixedColumns.begin(), kCsvFixedColumns.end());
    for (const auto type : kAllEntityTypes) {
        header.emplace_back(entity_name(type));
    }
    csv::write_record(out, header);
    for (const auto& a : table.rows()) {
        std::vector<std::string> fields = {a.alert_id, a.org_id, a.detector_id,
                                           std::string(detector_kind_name(a.detector_kind)),
                                           format_rfc3339(a.timestamp)};
        for (const auto type : kAllEntityTypes) {
            std::string joined;
            for (const auto& v : a.entities.values(type)) {
                if (!joined.empty()) {
                    joined.push_back(';');
                }
                joined += v.value;
            }
            fields.push_back(std::move(joined));
        }
        csv::write_record(out, fields);
    }
}

WindowSlices window_slice(const AlertTable& table, Timestamp now, Seconds source_window, Seconds target_window) {
    if (source_window > target_window) {
        throw InvalidWindow("source window " + format_duration(source_window) + " exceeds target window " +
                            format_duration(target_window));
    }
    if (source_window < Seconds{0}) {
        throw InvalidWindow("windows must be non-negative");
    }
    return WindowSlices{table.slice_by_time(now - source_window, now), table.slice_by_time(now - target_window, now)};
}

}  // namespace corrgraph
