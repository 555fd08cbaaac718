#include "corrgraph/correlator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <map>
#include <thread>
#include <unordered_map>

#include "corrgraph/errors.hpp"
#include "corrgraph/store.hpp"

namespace corrgraph {

namespace {

using AlertRefs = std::vector<const Alert*>;

struct JoinKey {
    std::string_view org;
    EntityType type;
    std::string_view value;

    bool operator==(const JoinKey&) const = default;
};

struct JoinKeyHash {
    std::size_t operator()(const JoinKey& k) const noexcept {
        const std::size_t h1 = std::hash<std::string_view>{}(k.org);
        const std::size_t h2 = std::hash<std::string_view>{}(k.value);
        return h1 ^ (h2 * 0x9E3779B97F4A7C15ULL + static_cast<std::size_t>(k.type) + (h1 << 6) + (h1 >> 2));
    }
};

class StageClock {
public:
    explicit StageClock(StageTimings& timings) : timings_(timings), start_(std::chrono::steady_clock::now()) {}

    void lap(const char* name) {
        const auto now = std::chrono::steady_clock::now();
        timings_.emplace_back(name, std::chrono::duration<double, std::milli>(now - start_).count());
        start_ = now;
    }

private:
    StageTimings& timings_;
    std::chrono::steady_clock::time_point start_;
};

AlertRefs refs_of(const AlertTable& table) {
    AlertRefs refs;
    refs.reserve(table.size());
    for (const auto& a : table.rows()) {
        refs.push_back(&a);
    }
    return refs;
}

CandidateCorrelation make_candidate(const Alert& u, const Alert& v, const EntityValue& shared,
                                    const EntityCatalog& catalog) {
    const bool u_first = u.alert_id < v.alert_id;
    const Alert& a = u_first ? u : v;
    const Alert& b = u_first ? v : u;
    CandidateCorrelation c;
    c.org_id = a.org_id;
    c.alert_a = a.alert_id;
    c.alert_b = b.alert_id;
    c.detector_a = a.detector_id;
    c.detector_b = b.detector_id;
    c.entity_type = shared.type;
    c.entity_value = shared.value;
    c.time_delta = a.timestamp > b.timestamp ? a.timestamp - b.timestamp : b.timestamp - a.timestamp;
    c.priority = catalog.priority(shared.type);
    return c;
}

// Builds the hash table on the (small) source side and streams the target
// side through it. A pair with both alerts in the source is emitted once, when
// the later source alert is streamed.
std::vector<CandidateCorrelation> join(const AlertRefs& source, const AlertRefs& target,
                                       const EntityCatalog& catalog) {
    std::unordered_map<JoinKey, std::vector<std::uint32_t>, JoinKeyHash> table;
    std::unordered_map<std::string_view, std::uint32_t> source_pos;
    source_pos.reserve(source.size());
    for (std::uint32_t i = 0; i < source.size(); ++i) {
        const Alert& u = *source[i];
        source_pos.emplace(u.alert_id, i);
        for (const auto& e : u.entities.all()) {
            table[JoinKey{u.org_id, e.type, e.value}].push_back(i);
        }
    }

    std::vector<CandidateCorrelation> out;
    if (table.empty()) {
        return out;
    }
    for (const Alert* vp : target) {
        const Alert& v = *vp;
        const auto pos_it = source_pos.find(v.alert_id);
        const bool v_in_source = pos_it != source_pos.end();
        for (const auto& e : v.entities.all()) {
            const auto hit = table.find(JoinKey{v.org_id, e.type, e.value});
            if (hit == table.end()) {
                continue;
            }
            for (const std::uint32_t ui : hit->second) {
                if (v_in_source && ui >= pos_it->second) {
                    continue;
                }
                out.push_back(make_candidate(*source[ui], v, e, catalog));
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return canonical_less(x, y); });
    return out;
}

void tag(FilterResult& result, CandidateCorrelation&& c, RejectStage stage, std::string detail) {
    result.rejected.push_back(RejectedCorrelation{std::move(c), stage, std::move(detail)});
}

bool priority_less(const CandidateCorrelation& x, const CandidateCorrelation& y) {
    if (x.priority != y.priority) return x.priority < y.priority;
    if (x.entity_type != y.entity_type) return x.entity_type < y.entity_type;
    return x.entity_value < y.entity_value;
}

CorrelationBatchResult run_partition(const AlertRefs& source, const AlertRefs& target, const EntityCatalog& catalog,
                                     const TiStore& ti, const ProfileMap& profiles, const CorrelationStore* store,
                                     Timestamp now, const SafetyThresholds& thresholds) {
    CorrelationBatchResult result;
    StageClock clock(result.timings);

    auto candidates = join(source, target, catalog);
    result.counts.candidates = candidates.size();
    clock.lap("correlate");

    auto fresh = dedup_against_store(std::move(candidates), store);
    result.counts.deduplicated = fresh.rejected.size();
    clock.lap("dedup");

    auto timely = filter_time_window(std::move(fresh.valid), catalog);
    result.counts.time_window = timely.rejected.size();
    clock.lap("time_window");

    auto trusted = filter_threat_intel(std::move(timely.valid), ti, now);
    result.counts.threat_intel = trusted.rejected.size();
    clock.lap("threat_intel");

    const AlertIndex index{std::span<const Alert* const>(target)};
    auto safe = filter_black_hole(std::move(trusted.valid), index, profiles, thresholds);
    result.counts.black_hole = safe.rejected.size();
    clock.lap("black_hole");

    auto best = prioritize_duplicates(std::move(safe.valid));
    result.counts.prioritized = best.rejected.size();
    result.counts.final = best.valid.size();
    result.final = std::move(best.valid);
    clock.lap("prioritize");

    for (auto* part : {&fresh.rejected, &timely.rejected, &trusted.rejected, &safe.rejected, &best.rejected}) {
        std::move(part->begin(), part->end(), std::back_inserter(result.rejected));
    }
    std::sort(result.rejected.begin(), result.rejected.end(),
              [](const auto& x, const auto& y) { return canonical_less(x, y); });
    return result;
}

}  // namespace

std::vector<CandidateCorrelation> correlate_all(const AlertTable& source, const AlertTable& target,
                                                const EntityCatalog& catalog) {
    return join(refs_of(source), refs_of(target), catalog);
}

FilterResult dedup_against_store(std::vector<CandidateCorrelation> candidates, const CorrelationStore* store) {
    FilterResult result;
    if (store == nullptr) {
        result.valid = std::move(candidates);
        return result;
    }
    result.valid.reserve(candidates.size());
    for (auto& c : candidates) {
        if (store->contains(c.org_id, c.alert_a, c.alert_b)) {
            tag(result, std::move(c), RejectStage::deduplicated, "pair already correlated in store");
        } else {
            result.valid.push_back(std::move(c));
        }
    }
    return result;
}

FilterResult filter_time_window(std::vector<CandidateCorrelation> candidates, const EntityCatalog& catalog) {
    FilterResult result;
    result.valid.reserve(candidates.size());
    for (auto& c : candidates) {
        const Seconds window = catalog.window(c.entity_type);
        if (c.time_delta <= window) {
            result.valid.push_back(std::move(c));
        } else {
            std::string detail = "delta " + format_duration(c.time_delta) + " exceeds " +
                                 std::string(entity_name(c.entity_type)) + " window " + format_duration(window);
            tag(result, std::move(c), RejectStage::time_window, std::move(detail));
        }
    }
    return result;
}

FilterResult filter_threat_intel(std::vector<CandidateCorrelation> candidates, const TiStore& ti, Timestamp now) {
    FilterResult result;
    result.valid.reserve(candidates.size());
    for (auto& c : candidates) {
        if (!ti.gated(c.entity_type) || ti.is_malicious(c.entity_type, c.entity_value, now)) {
            result.valid.push_back(std::move(c));
            continue;
        }
        const TiRecord* rec = ti.find(c.entity_type, c.entity_value);
        std::string detail = rec == nullptr                         ? "no threat intelligence for value"
                             : rec->verdict != Verdict::malicious   ? "verdict " + std::string(verdict_name(rec->verdict))
                                                                    : "malicious verdict is stale";
        tag(result, std::move(c), RejectStage::threat_intel, std::move(detail));
    }
    return result;
}

FilterResult filter_black_hole(std::vector<CandidateCorrelation> candidates, const AlertIndex& alerts,
                               const ProfileMap& profiles, const SafetyThresholds& thresholds) {
    FilterResult result;
    result.valid.reserve(candidates.size());
    std::map<DetectorKey, bool> detector_safe;
    auto is_safe = [&](const std::string& org, const std::string& detector) {
        DetectorKey key{org, detector};
        if (const auto it = detector_safe.find(key); it != detector_safe.end()) {
            return it->second;
        }
        const auto p = profiles.find(key);
        const bool safe = p != profiles.end() && detector_is_safe(p->second, thresholds);
        detector_safe.emplace(std::move(key), safe);
        return safe;
    };
    auto endpoint = [&](const std::string& id) -> const Alert& {
        const Alert* a = alerts.find(id);
        if (a == nullptr) {
            throw DanglingEndpoint("candidate references unknown alert '" + id + "'");
        }
        return *a;
    };

    for (auto& c : candidates) {
        if (c.detector_a == c.detector_b) {
            result.valid.push_back(std::move(c));
            continue;
        }
        std::string detail;
        if (!is_safe(c.org_id, c.detector_a)) {
            detail = "detector " + c.detector_a + " fails volume/evidence checks";
        } else if (!is_safe(c.org_id, c.detector_b)) {
            detail = "detector " + c.detector_b + " fails volume/evidence checks";
        } else if (!alert_is_low_evidence(endpoint(c.alert_a), thresholds)) {
            detail = "alert " + c.alert_a + " exceeds entity limits";
        } else if (!alert_is_low_evidence(endpoint(c.alert_b), thresholds)) {
            detail = "alert " + c.alert_b + " exceeds entity limits";
        }
        if (detail.empty()) {
            result.valid.push_back(std::move(c));
        } else {
            tag(result, std::move(c), RejectStage::black_hole, std::move(detail));
        }
    }
    return result;
}

FilterResult prioritize_duplicates(std::vector<CandidateCorrelation> candidates) {
    std::sort(candidates.begin(), candidates.end(), [](const auto& x, const auto& y) { return canonical_less(x, y); });
    FilterResult result;
    std::size_t i = 0;
    while (i < candidates.size()) {
        std::size_t j = i + 1;
        std::size_t best = i;
        while (j < candidates.size() && same_pair(candidates[i], candidates[j])) {
            if (priority_less(candidates[j], candidates[best])) {
                best = j;
            }
            ++j;
        }
        const std::string winner(entity_name(candidates[best].entity_type));
        for (std::size_t k = i; k < j; ++k) {
            if (k != best) {
                tag(result, std::move(candidates[k]), RejectStage::deduplicated, "superseded by " + winner + " link");
            }
        }
        result.valid.push_back(std::move(candidates[best]));
        i = j;
    }
    return result;
}

CorrelationBatchResult run_correlation_stage(const AlertTable& source, const AlertTable& target,
                                             const EntityCatalog& catalog, const TiStore& ti,
                                             const ProfileMap& profiles, const CorrelationStore* store, Timestamp now,
                                             const SafetyThresholds& thresholds, StageOptions options) {
    // Correlations never span organizations, so each org is an independent batch.
    std::map<std::string_view, std::pair<AlertRefs, AlertRefs>> by_org;
    for (const auto& a : source.rows()) {
        by_org[a.org_id].first.push_back(&a);
    }
    for (const auto& a : target.rows()) {
        const auto it = by_org.find(a.org_id);
        if (it != by_org.end()) {
            it->second.second.push_back(&a);
        }
    }
    std::vector<const std::pair<AlertRefs, AlertRefs>*> work;
    for (const auto& [org, refs] : by_org) {
        work.push_back(&refs);
    }
    std::vector<CorrelationBatchResult> partials(work.size());
    std::vector<std::exception_ptr> errors(work.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < work.size(); i = next++) {
            try {
                partials[i] = run_partition(work[i]->first, work[i]->second, catalog, ti, profiles, store, now,
                                            thresholds);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (options.parallelism <= 1) {
        worker();
    } else {
        std::vector<std::jthread> threads;
        const unsigned n = std::min<unsigned>(options.parallelism, static_cast<unsigned>(work.size()));
        for (unsigned t = 0; t < n; ++t) {
            threads.emplace_back(worker);
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }

    CorrelationBatchResult merged;
    for (auto& p : partials) {
        std::move(p.final.begin(), p.final.end(), std::back_inserter(merged.final));
        merged.counts.candidates += p.counts.candidates;
        merged.counts.deduplicated += p.counts.deduplicated;
        merged.counts.time_window += p.counts.time_window;
        merged.counts.threat_intel += p.counts.threat_intel;
        merged.counts.black_hole += p.counts.black_hole;
        merged.counts.prioritized += p.counts.prioritized;
        merged.counts.final += p.counts.final;
        for (const auto& [name, ms] : p.timings) {
            const auto it = std::find_if(merged.timings.begin(), merged.timings.end(),
                                         [&](const auto& t) { return t.first == name; });
            if (it == merged.timings.end()) {
                merged.timings.emplace_back(name, ms);
            } else {
                it->second += ms;
            }
        }
    }
    // Partials come in org order and are each canonical, so stitching by
    // stage keeps the merged output canonical without a global sort.
    for (std::size_t stage = 0; stage < kRejectStageCount; ++stage) {
        for (auto& p : partials) {
            for (auto& r : p.rejected) {
                if (static_cast<std::size_t>(r.stage) == stage) merged.rejected.push_back(std::move(r));
            }
        }
    }
    return merged;
}

}  // namespace corrgraph
