#include "corrgraph/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <tuple>

#include "corrgraph/csv.hpp"
#include "corrgraph/errors.hpp"
#include "corrgraph/time.hpp"

namespace corrgraph {

std::string_view population_name(Population p) noexcept {
    switch (p) {
    case Population::valid: return "valid";
    case Population::rejected: return "rejected";
    case Population::combined: return "combined";
    }
    return "?";
}

std::string_view percentile_name(Percentile p) noexcept {
    switch (p) {
    case Percentile::p50: return "p50";
    case Percentile::p90: return "p90";
    case Percentile::p95: return "p95";
    case Percentile::p99: return "p99";
    }
    return "?";
}

std::optional<Percentile> parse_percentile(std::string_view name) noexcept {
    for (auto p : {Percentile::p50, Percentile::p90, Percentile::p95, Percentile::p99}) {
        if (percentile_name(p) == name) {
            return p;
        }
    }
    return std::nullopt;
}

Seconds TimeDeltaStats::percentile(Percentile p) const noexcept {
    switch (p) {
    case Percentile::p50: return p50;
    case Percentile::p90: return p90;
    case Percentile::p95: return p95;
    case Percentile::p99: return p99;
    }
    return p99;
}

Seconds nearest_rank(std::span<const Seconds> sorted, double q) {
    if (sorted.empty()) {
        return Seconds{0};
    }
    auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(sorted.size()) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

namespace {

TimeDeltaStats summarize(EntityType type, Population population, std::vector<Seconds>& deltas) {
    std::sort(deltas.begin(), deltas.end());
    TimeDeltaStats s;
    s.entity_type = type;
    s.population = population;
    s.count = deltas.size();
    long double sum = 0;
    for (auto d : deltas) {
        sum += static_cast<long double>(d.count());
    }
    s.mean_seconds = static_cast<double>(sum / static_cast<long double>(deltas.size()));
    const std::size_t n = deltas.size();
    s.median_seconds = n % 2 == 1 ? static_cast<double>(deltas[n / 2].count())
                                  : (static_cast<double>(deltas[n / 2 - 1].count()) +
                                     static_cast<double>(deltas[n / 2].count())) / 2.0;
    s.p50 = nearest_rank(deltas, 50);
    s.p90 = nearest_rank(deltas, 90);
    s.p95 = nearest_rank(deltas, 95);
    s.p99 = nearest_rank(deltas, 99);
    return s;
}

}  // namespace

std::vector<TimeDeltaStats> time_delta_stats(std::span<const Correlation> valid,
                                             std::span<const RejectedCorrelation> rejected) {
    std::array<std::vector<Seconds>, kEntityTypeCount> good;
    std::array<std::vector<Seconds>, kEntityTypeCount> bad;
    for (const auto& c : valid) {
        good[ordinal(c.entity_type)].push_back(c.time_delta);
    }
    for (const auto& r : rejected) {
        if (r.stage == RejectStage::time_window) {
            bad[ordinal(r.candidate.entity_type)].push_back(r.candidate.time_delta);
        }
    }
    std::vector<TimeDeltaStats> out;
    for (const auto type : kAllEntityTypes) {
        auto& g = good[ordinal(type)];
        auto& b = bad[ordinal(type)];
        if (g.empty() && b.empty()) {
            continue;
        }
        std::vector<Seconds> all;
        all.reserve(g.size() + b.size());
        all.insert(all.end(), g.begin(), g.end());
        all.insert(all.end(), b.begin(), b.end());
        if (!g.empty()) out.push_back(summarize(type, Population::valid, g));
        if (!b.empty()) out.push_back(summarize(type, Population::rejected, b));
        out.push_back(summarize(type, Population::combined, all));
    }
    return out;
}

std::vector<WindowSuggestion> suggest_time_windows(std::span<const TimeDeltaStats> stats,
                                                   const EntityCatalog& catalog, WindowPolicy policy) {
    if (!(policy.slack_factor >= 1.0)) {
        throw ConfigError("slack factor must be >= 1");
    }
    std::vector<WindowSuggestion> out;
    for (const auto& s : stats) {
        if (s.population != Population::combined || s.count == 0) {
            continue;
        }
        const Seconds observed = s.percentile(policy.percentile);
        const double hours = policy.slack_factor * static_cast<double>(observed.count()) / 3600.0;
        const auto rounded = std::max<long long>(1, static_cast<long long>(std::ceil(hours - 1e-9)));
        out.push_back(WindowSuggestion{s.entity_type, catalog.window(s.entity_type),
                                       std::chrono::duration_cast<Seconds>(std::chrono::hours(rounded)), observed,
                                       s.count});
    }
    return out;
}

GapReport gap_report(std::span<const RejectedCorrelation> rejected) {
    using Key = std::tuple<RejectStage, EntityType, std::string, std::string>;
    std::map<Key, GapEntry> groups;
    for (const auto& r : rejected) {
        if (r.stage != RejectStage::time_window && r.stage != RejectStage::threat_intel &&
            r.stage != RejectStage::black_hole) {
            continue;
        }
        const auto& c = r.candidate;
        auto [lo, hi] = std::minmax(c.detector_a, c.detector_b);
        auto [it, inserted] = groups.try_emplace(Key{r.stage, c.entity_type, lo, hi});
        auto& e = it->second;
        if (inserted) {
            e.stage = r.stage;
            e.entity_type = c.entity_type;
            e.detector_a = lo;
            e.detector_b = hi;
        }
        ++e.count;
        e.samples.push_back(c);
    }
    GapReport report;
    report.entries.reserve(groups.size());
    for (auto& [key, entry] : groups) {
        std::sort(entry.samples.begin(), entry.samples.end(),
                  [](const auto& x, const auto& y) { return canonical_less(x, y); });
        if (entry.samples.size() > kGapSamples) {
            entry.samples.resize(kGapSamples);
        }
        report.entries.push_back(std::move(entry));
    }
    // groups is already in (stage, entity, detectors) order; stable sort keeps it on ties.
    std::stable_sort(report.entries.begin(), report.entries.end(),
                     [](const GapEntry& x, const GapEntry& y) { return x.count > y.count; });
    return report;
}

nlohmann::json time_delta_stats_to_json(std::span<const TimeDeltaStats> stats,
                                        std::span<const WindowSuggestion> suggestions) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& s : stats) {
        rows.push_back({{"entity_type", entity_name(s.entity_type)},
                        {"population", population_name(s.population)},
                        {"count", s.count},
                        {"mean_seconds", s.mean_seconds},
                        {"median_seconds", s.median_seconds},
                        {"p50_seconds", s.p50.count()},
                        {"p90_seconds", s.p90.count()},
                        {"p95_seconds", s.p95.count()},
                        {"p99_seconds", s.p99.count()}});
    }
    nlohmann::json advice = nlohmann::json::array();
    for (const auto& w : suggestions) {
        advice.push_back({{"entity_type", entity_name(w.entity_type)},
                          {"current_window", format_duration(w.current)},
                          {"suggested_window", format_duration(w.suggested)},
                          {"observed_seconds", w.observed.count()},
                          {"observations", w.observations}});
    }
    return {{"schema_version", 1}, {"stats", rows}, {"suggested_windows", advice}};
}

nlohmann::json gap_report_to_json(const GapReport& report) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : report.entries) {
        nlohmann::json samples = nlohmann::json::array();
        for (const auto& c : e.samples) {
            samples.push_back(correlation_to_json(c));
        }
        entries.push_back({{"stage", stage_name(e.stage)},
                           {"entity_type", entity_name(e.entity_type)},
                           {"detector_a", e.detector_a},
                           {"detector_b", e.detector_b},
                           {"count", e.count},
                           {"samples", samples}});
    }
    return {{"schema_version", 1}, {"entries", entries}};
}

void write_time_delta_csv(std::ostream& out, std::span<const TimeDeltaStats> stats) {
    csv::write_record(out, {"entity_type", "population", "count", "mean_seconds", "median_seconds", "p50_seconds",
                       "p90_seconds", "p95_seconds", "p99_seconds"});
    for (const auto& s : stats) {
        csv::write_record(out, {std::string(entity_name(s.entity_type)), std::string(population_name(s.population)),
                           std::to_string(s.count), std::to_string(s.mean_seconds), std::to_string(s.median_seconds),
                           std::to_string(s.p50.count()), std::to_string(s.p90.count()),
                           std::to_string(s.p95.count()), std::to_string(s.p99.count())});
    }
}

}  // namespace corrgraph
