#include "corrgraph/ti_store.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "corrgraph/csv.hpp"
#include "corrgraph/errors.hpp"

namespace corrgraph {

std::string_view verdict_name(Verdict v) noexcept {
    switch (v) {
    case Verdict::malicious: return "malicious";
    case Verdict::benign: return "benign";
    case Verdict::unknown: return "unknown";
    }
    return "unknown";
}

std::optional<Verdict> parse_verdict(std::string_view name) noexcept {
    if (name == "malicious") return Verdict::malicious;
    if (name == "benign") return Verdict::benign;
    if (name == "unknown") return Verdict::unknown;
    return std::nullopt;
}

TiStore::TiStore(const EntityCatalog& catalog, Seconds ip_range_recency) : ip_range_recency_(ip_range_recency) {
    for (const auto type : kAllEntityTypes) {
        gated_[ordinal(type)] = catalog.ti_gated(type);
    }
}

void TiStore::add(TiRecord record) {
    if (!gated_[ordinal(record.entity_type)]) {
        throw SchemaError("entity type " + std::string(entity_name(record.entity_type)) + " is not TI-gated");
    }
    auto key = std::make_pair(record.entity_type, record.value);
    const auto it = records_.find(key);
    if (it == records_.end()) {
        records_.emplace(std::move(key), std::move(record));
    } else if (record.last_confirmed >= it->second.last_confirmed) {
        it->second = std::move(record);
    }
}

const TiRecord* TiStore::find(EntityType type, std::string_view value) const {
    const auto it = records_.find(std::make_pair(type, std::string(value)));
    return it == records_.end() ? nullptr : &it->second;
}

bool TiStore::is_malicious(EntityType type, std::string_view value, Timestamp now) const {
    if (!gated_[ordinal(type)]) {
        throw NotGated("entity type " + std::string(entity_name(type)) + " is not TI-gated");
    }
    const TiRecord* rec = find(type, value);
    if (rec == nullptr || rec->verdict != Verdict::malicious) {
        return false;
    }
    if (type == EntityType::IPRange) {
        return now - rec->last_confirmed <= ip_range_recency_;
    }
    return true;
}

TiVerdict TiStore::lookup(const EntityValue& entity, Timestamp now) const {
    return is_malicious(entity.type, entity.value, now) ? TiVerdict::malicious : TiVerdict::not_malicious;
}

std::vector<TiRecord> TiStore::records() const {
    std::vector<TiRecord> out;
    out.reserve(records_.size());
    for (const auto& [key, rec] : records_) {
        out.push_back(rec);
    }
    return out;
}

TiStore load_ti(std::istream& in, const EntityCatalog& catalog) {
    TiStore store(catalog);
    const auto header = csv::read_record(in);
    if (!header) {
        return store;
    }
    const std::vector<std::string> expected = {"entity_type", "value", "verdict", "last_confirmed"};
    if (*header != expected) {
        throw SchemaError("TI header must be entity_type,value,verdict,last_confirmed");
    }
    std::size_t row = 0;
    while (true) {
        std::optional<std::vector<std::string>> fields;
        try {
            fields = csv::read_record(in);
        } catch (const ParseError& e) {
            throw SchemaError(e.what(), row);
        }
        if (!fields) {
            break;
        }
        if (fields->size() == 1 && (*fields)[0].empty()) {
            continue;
        }
        const std::size_t this_row = row++;
        const auto& f = *fields;
        if (f.size() != 4) {
            throw SchemaError("expected 4 columns", this_row);
        }
        const auto type = parse_entity_type(f[0]);
        if (!type) {
            throw SchemaError("unknown entity type '" + f[0] + "'", this_row);
        }
        if (!catalog.ti_gated(*type)) {
            throw SchemaError("entity type " + f[0] + " is not TI-gated", this_row);
        }
        auto value = normalize_entity_value(*type, f[1]);
        if (!value) {
            throw SchemaError("empty value", this_row);
        }
        const auto verdict = parse_verdict(f[2]);
        if (!verdict) {
            throw SchemaError("unknown verdict '" + f[2] + "'", this_row);
        }
        Timestamp confirmed;
        try {
            confirmed = parse_rfc3339(f[3]);
        } catch (const ParseError& e) {
            throw SchemaError(e.what(), this_row);
        }
        store.add(TiRecord{*type, std::move(value->value), *verdict, confirmed});
    }
    return store;
}

TiStore load_ti(const std::filesystem::path& path, const EntityCatalog& catalog) {
    std::ifstream in(path);
    if (!in) {
        throw SchemaError("cannot open TI feed " + path.string());
    }
    return load_ti(in, catalog);
}

void write_ti(std::ostream& out, std::span<const TiRecord> records) {
    csv::write_record(out, {"entity_type", "value", "verdict", "last_confirmed"});
    for (const auto& r : records) {
        csv::write_record(out, {std::string(entity_name(r.entity_type)), r.value, std::string(verdict_name(r.verdict)),
                                format_rfc3339(r.last_confirmed)});
    }
}

}  // namespace corrgraph
