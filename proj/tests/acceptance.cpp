#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "corrgraph/engine.hpp"
#include "corrgraph/errors.hpp"
#include "corrgraph/time.hpp"
#include "testkit.hpp"

using namespace corrgraph;
using namespace std::chrono_literals;
using testkit::TempDir;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double x, int digits = 3) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(digits);
    out << x;
    return out.str();
}

TiStore ti_of(const std::vector<TiRecord>& feed) {
    TiStore ti;
    for (const auto& r : feed) ti.add(r);
    return ti;
}

GeneratorConfig random_scenario(std::uint64_t seed) {
    PortableRng rng(seed * 7919 + 1);
    auto c = GeneratorConfig::defaults();
    c.seed = seed;
    c.org_count = static_cast<int>(rng.uniform(1, 4));
    c.incidents_per_org = static_cast<int>(rng.uniform(1, 12));
    const int lo = static_cast<int>(rng.uniform(1, 6));
    c.incident_size = {lo, lo + static_cast<int>(rng.uniform(0, 8))};
    c.entity_mix.clear();
    for (const auto type : kAllEntityTypes) {
        if (rng.chance(0.5)) c.entity_mix[type] = static_cast<double>(rng.uniform(1, 4));
    }
    if (c.entity_mix.empty()) c.entity_mix[EntityType::UserId] = 1;
    c.noise_alert_fraction = rng.unit() * 0.7;
    if (rng.chance(0.5)) {
        c.noisy_detector = NoisyDetectorSpec{static_cast<int>(rng.uniform(5, 120)), static_cast<int>(rng.uniform(0, 14)),
                                             kAllEntityTypes[static_cast<std::size_t>(rng.uniform(0, 16))]};
    }
    c.incident_spread = Seconds(rng.uniform(0, 40 * 3600));
    c.anchor_in_source = rng.chance(0.7);
    c.detectors_per_org = static_cast<int>(rng.uniform(3, 40));
    c.custom_detector_fraction = rng.unit();
    c.collision_rate = rng.unit() * 0.5;
    c.collision_pool_size = static_cast<int>(rng.uniform(2, 40));
    c.ti_malicious_fraction = rng.unit();
    c.ti_max_age = Seconds(rng.uniform(3600, 96 * 3600));
    c.second_link_probability = rng.unit() * 0.6;
    c.extra_entities_max = static_cast<int>(rng.uniform(0, 6));
    if (seed % 40 == 0) {
        // a few large batches near the size cap
        c.org_count = 2;
        c.incidents_per_org = 180;
        c.incident_size = {4, 12};
        c.noise_alert_fraction = 0.4;
    }
    return c;
}

// 1. Final pair sets equal the quadratic oracle on randomized scenarios.
Outcome oracle_equivalence() {
    const auto catalog = EntityCatalog::defaults();
    int scenarios = 0;
    std::size_t finals = 0;
    std::size_t largest = 0;
    std::size_t rejects = 0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        const auto config = random_scenario(seed);
        const auto data = generate_synthetic_alerts(config, catalog);
        if (data.alerts.size() > 5000) {
            return {false, "scenario " + std::to_string(seed) + " exceeds 5000 alerts"};
        }
        largest = std::max(largest, data.alerts.size());
        const auto ti = ti_of(data.ti_feed);
        const auto profiles = profile_detectors(data.alerts, config.end_time);
        const auto s = window_slice(data.alerts, config.end_time);
        const auto result = run_correlation_stage(s.source, s.target, catalog, ti, profiles, nullptr, config.end_time,
                                                  SafetyThresholds{});
        testkit::OracleInputs in;
        in.alerts = &data.alerts;
        in.now = config.end_time;
        in.ti = &data.ti_feed;
        const auto expected = testkit::oracle_finals(in);
        const auto actual = testkit::keys_of(result.final);
        if (actual != expected) {
            return {false, "seed " + std::to_string(seed) + ": pipeline " + std::to_string(actual.size()) +
                               " finals, oracle " + std::to_string(expected.size())};
        }
        ++scenarios;
        finals += actual.size();
        rejects += result.rejected.size();
    }
    return {true, std::to_string(scenarios) + " scenarios, " + std::to_string(finals) + " finals, " +
                      std::to_string(rejects) + " rejects, largest batch " + std::to_string(largest) + " alerts"};
}

// 2. Forest weight optimality, k/2 clique compression and the mixed workload band.
Outcome mst_optimality() {
    PortableRng rng(2024);
    std::size_t cases = 0;
    auto check_graph = [&](int n, const std::vector<testkit::WeightedEdge>& edges) -> std::string {
        const auto f = testkit::graph_fixture(n, edges);
        const auto g = build_graph(f.correlations, f.alerts, &f.alerts);
        const auto forest = spanning_forest(g);
        long long weight = 0;
        for (const auto& e : forest.forest.edges()) weight += e.correlation.priority;
        ++cases;
        if (weight != testkit::brute_force_forest_weight(n, edges)) return "weight differs from exhaustive oracle";
        if (forest.forest.edges().size() != static_cast<std::size_t>(n - 1)) return "kept edges != n-1";
        if (assign_incidents(forest.forest).incidents.size() != 1) return "forest disconnected a component";
        return "";
    };

    for (int n = 1; n <= 5; ++n) {
        std::vector<std::pair<int, int>> slots;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) slots.emplace_back(i, j);
        for (std::uint32_t mask = 0; mask < (1U << slots.size()); ++mask) {
            std::vector<testkit::WeightedEdge> shape;
            for (std::size_t k = 0; k < slots.size(); ++k)
                if (mask & (1U << k)) shape.push_back({slots[k].first, slots[k].second, 1});
            if (testkit::component_count(n, shape) != 1) continue;
            for (int draw = 0; draw < 3; ++draw) {
                for (auto& e : shape) e.w = rng.uniform(1, 17);
                if (auto err = check_graph(n, shape); !err.empty()) return {false, "n=" + std::to_string(n) + ": " + err};
            }
        }
    }
    while (cases < 10'500) {
        const int n = static_cast<int>(rng.uniform(6, 8));
        const double density = 0.25 + rng.unit() * 0.75;
        std::vector<testkit::WeightedEdge> edges;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (rng.chance(density)) edges.push_back({i, j, rng.uniform(1, 17)});
        if (testkit::component_count(n, edges) != 1) continue;
        if (auto err = check_graph(n, edges); !err.empty()) return {false, "n=" + std::to_string(n) + ": " + err};
    }

    const auto catalog = EntityCatalog::defaults();
    auto clique = GeneratorConfig::defaults();
    clique.incidents_per_org = 1;
    clique.incident_size = {16, 16};
    clique.entity_mix = {{EntityType::UserId, 1.0}};
    clique.incident_spread = 0s;
    clique.noise_alert_fraction = 0.5;
    clique.extra_entities_max = 0;
    const auto cd = generate_synthetic_alerts(clique, catalog);
    const auto co = run_pipeline(cd.alerts, clique.end_time, catalog, TiStore{}, profile_detectors(cd.alerts, clique.end_time),
                                 SafetyThresholds{}, nullptr);
    if (co.stats.edges_before != 120 || co.stats.edges_after != 15 || co.stats.compression_ratio != 8.0) {
        return {false, "16-clique: " + std::to_string(co.stats.edges_before) + "/" + std::to_string(co.stats.edges_after)};
    }

    auto mixed = GeneratorConfig::defaults();
    mixed.seed = 15;
    mixed.org_count = 8;
    mixed.incidents_per_org = 10;
    mixed.incident_size = {10, 20};
    mixed.noise_alert_fraction = 0.3;
    mixed.second_link_probability = 0.3;
    const auto md = generate_synthetic_alerts(mixed, catalog);
    PipelineOptions whole_history;
    whole_history.source_window = 72h;
    const auto mo = run_pipeline(md.alerts, mixed.end_time, catalog, ti_of(md.ti_feed),
                                 profile_detectors(md.alerts, mixed.end_time), SafetyThresholds{}, nullptr, whole_history);
    const double ratio = mo.stats.compression_ratio.value_or(0.0);
    std::size_t planted = 0;
    std::size_t members = 0;
    std::map<std::string, int> sizes;
    for (const auto& l : md.labels)
        if (!l.incident.empty()) ++sizes[l.incident];
    for (const auto& [label, n] : sizes) {
        ++planted;
        members += static_cast<std::size_t>(n);
    }
    const double mean_size = static_cast<double>(members) / static_cast<double>(planted);
    if (ratio < 6.0 || ratio > 9.0) {
        return {false, "mixed workload compression " + fmt(ratio) + " outside [6, 9]"};
    }
    return {true, std::to_string(cases) + " graphs match the exhaustive forest; 16-clique 120/15 = 8.0; mixed workload "
                      "(mean incident size " + fmt(mean_size, 1) + ") compresses " + fmt(ratio) + "x"};
}

// 3. Idempotent reruns and crash convergence through the command line.
Outcome idempotent_reruns() {
    TempDir dir;
    const auto gen = dir / "gen";
    testkit::write_file(dir / "cfg.json", nlohmann::json{{"seed", 31},
                                                         {"org_count", 2},
                                                         {"incidents_per_org", 6},
                                                         {"incident_size", {{"min", 3}, {"max", 6}}},
                                                         {"noise_alert_fraction", 0.4}}
                                              .dump());
    if (testkit::cli({"generate", "--config", (dir / "cfg.json").string(), "--out", gen.string()}).code != 0) {
        return {false, "generate failed"};
    }
    const std::string now1 = "2023-12-31T23:00:00Z";
    const std::string now2 = "2024-01-01T00:00:00Z";
    auto run = [&](const std::filesystem::path& store, const std::string& now, const std::string& out) {
        return testkit::cli({"run", "--alerts", (gen / "alerts.jsonl").string(), "--ti", (gen / "ti_feed.csv").string(),
                             "--store", store.string(), "--now", now, "--out", (dir / out).string()});
    };

    const auto clean = dir / "clean.journal";
    if (run(clean, now1, "c1").code != 0 || run(clean, now2, "c2").code != 0) return {false, "clean run failed"};
    const auto first_finals = read_correlations(dir / "c2" / kCorrelationsFile).size();
    if (first_finals == 0) return {false, "second batch produced no correlations to protect"};
    if (run(clean, now2, "c3").code != 0) return {false, "rerun failed"};
    if (!read_correlations(dir / "c3" / kCorrelationsFile).empty()) return {false, "rerun produced correlations"};
    {
        auto store = CorrelationStore::open(clean);
        store.compact();
    }
    const std::string expected = testkit::read_file(clean);

    // Reproduce the second batch in a child process and kill it at every commit step.
    const auto catalog = EntityCatalog::defaults();
    const auto alerts = load_alerts(gen / "alerts.jsonl", AlertFormat::jsonl).table;
    const auto ti = load_ti(gen / "ti_feed.csv", catalog);
    const Timestamp t2 = parse_rfc3339(now2);
    const auto profiles = profile_detectors(alerts, t2);

    int points = 0;
    for (std::size_t point = 0;; ++point) {
        bool reached_end = false;
        for (const bool torn : {false, true}) {
            const auto path = dir / ("crash-" + std::to_string(point) + (torn ? "t" : "") + ".journal");
            if (run(path, now1, "x1").code != 0) return {false, "setup batch failed"};
            std::cout.flush();
            const pid_t pid = ::fork();
            if (pid == 0) {
                try {
                    auto store = CorrelationStore::open(path);
                    const auto outcome = run_pipeline(alerts, t2, catalog, ti, profiles, SafetyThresholds{}, &store);
                    store.inject_fault(FaultPlan{point, torn, [] { ::_exit(77); }});
                    store.commit_batch("batch-" + now2, outcome.stage.final, t2);
                    ::_exit(0);
                } catch (...) {
                    ::_exit(1);
                }
            }
            int status = 0;
            ::waitpid(pid, &status, 0);
            if (!WIFEXITED(status)) return {false, "child did not exit"};
            if (WEXITSTATUS(status) == 0) {
                reached_end = true;
                break;
            }
            if (WEXITSTATUS(status) != 77) return {false, "child failed before the injection point"};
            ++points;
            const auto rerun = run(path, now2, "x2");
            if (rerun.code != 0) return {false, "rerun after crash at step " + std::to_string(point) + ": " + rerun.err};
            {
                auto store = CorrelationStore::open(path);
                store.compact();
            }
            if (testkit::read_file(path) != expected) {
                return {false, "store diverged after crash at step " + std::to_string(point) + (torn ? " (torn)" : "")};
            }
        }
        if (reached_end) break;
    }
    if (points < 20) return {false, "only " + std::to_string(points) + " injection points"};
    return {true, "second run empty; " + std::to_string(points) + " crash runs (" + std::to_string(first_finals) +
                      " kept edges in the batch) converge byte-identically after compaction"};
}

// 4. Every paper constant, with off-by-one cases on both sides.
Outcome filter_fidelity() {
    const auto catalog = EntityCatalog::defaults();
    std::vector<std::string> failures;
    auto expect = [&](bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    };
    struct Row {
        EntityType type;
        int priority;
        int hours;
        bool gated;
    };
    const Row table[] = {
        {EntityType::SessionId, 1, 48, false},    {EntityType::EmailId, 2, 48, false},
        {EntityType::CampaignId, 3, 72, false},   {EntityType::EmailCluster, 4, 72, false},
        {EntityType::UserId, 5, 24, false},       {EntityType::URL, 6, 48, false},
        {EntityType::DeviceId, 7, 24, false},     {EntityType::SHA1, 8, 24, true},
        {EntityType::FileName, 9, 24, true},      {EntityType::AppId, 10, 48, false},
        {EntityType::EmailAddress, 11, 12, false}, {EntityType::EmailSubject, 12, 12, false},
        {EntityType::RegistryValue, 13, 24, false}, {EntityType::RegistryKey, 14, 24, false},
        {EntityType::ResourceId, 15, 24, false},  {EntityType::IP, 16, 8, false},
        {EntityType::IPRange, 17, 8, true},
    };
    int checks = 0;
    const Timestamp now = testkit::base_time();
    for (const auto& row : table) {
        const std::string name(entity_name(row.type));
        expect(catalog.priority(row.type) == row.priority, name + " priority");
        expect(catalog.window(row.type) == std::chrono::hours(row.hours), name + " window");
        expect(catalog.ti_gated(row.type) == row.gated, name + " gating");
        const Seconds window = std::chrono::hours(row.hours);
        for (const auto& [offset, keep] : {std::pair{-1, true}, std::pair{0, true}, std::pair{1, false}}) {
            const Seconds delta = window + Seconds(offset);
            // end to end: one alert in the source, the other delta earlier
            const std::string value = row.type == EntityType::IPRange ? "10.9.8.0/24" : "value-1";
            Alert a = testkit::make_alert("a", "o", "d", now, {});
            Alert b = testkit::make_alert("b", "o", "d", now - delta, {});
            a.entities.insert({row.type, value});
            b.entities.insert({row.type, value});
            TiStore ti;
            if (row.gated) ti.add({row.type, value, Verdict::malicious, now});
            const AlertTable alerts({a, b});
            const auto s = window_slice(alerts, now, 35min, 80h);
            const auto r = run_correlation_stage(s.source, s.target, catalog, ti, ProfileMap{}, nullptr, now,
                                                 SafetyThresholds{});
            expect((r.final.size() == 1) == keep, name + " at window" + (offset < 0 ? "-1s" : offset > 0 ? "+1s" : ""));
            if (!keep) expect(r.counts.time_window == 1, name + " reject stage");
            checks += 2;
        }
        checks += 3;
    }

    TiStore ti;
    const std::pair<long long, bool> recency[] = {{47 * 3600, true}, {48 * 3600 - 1, true}, {48 * 3600, true},
                                                  {48 * 3600 + 1, false}, {49 * 3600, false}};
    int k = 0;
    for (const auto& [age, malicious] : recency) {
        const std::string range = "10.0." + std::to_string(k++) + ".0/24";
        ti.add({EntityType::IPRange, range, Verdict::malicious, now - Seconds(age)});
        expect((ti.lookup({EntityType::IPRange, range}, now) == TiVerdict::malicious) == malicious,
               "IPRange confirmed " + std::to_string(age) + "s ago");
        ++checks;
    }

    const SafetyThresholds t;
    auto profile = [](std::uint64_t total, std::uint64_t org_total) {
        DetectorProfile p;
        p.org_id = "o";
        p.detector_id = "d";
        p.window_days = 7;
        p.total_alerts = total;
        p.org_total_alerts = org_total;
        return p;
    };
    expect(detector_is_safe(profile(59, 1000), t), "share 5.9%");
    expect(!detector_is_safe(profile(60, 1000), t), "share 6.0%");
    expect(!detector_is_safe(profile(61, 1000), t), "share 6.1%");
    expect(detector_is_safe(profile(139, 100000), t), "139 alerts in 7 days");
    expect(!detector_is_safe(profile(140, 100000), t), "140 alerts in 7 days");
    expect(!detector_is_safe(profile(141, 100000), t), "141 alerts in 7 days");
    checks += 6;
    for (const auto type : {EntityType::IP, EntityType::SHA1}) {
        const std::uint64_t limit = type == EntityType::SHA1 ? 10 : 4;
        for (const auto& [delta, safe] : {std::pair{-1, true}, std::pair{0, true}, std::pair{1, false}}) {
            auto p = profile(100, 100000);
            p.distinct_value_totals[ordinal(type)] = static_cast<std::uint64_t>(static_cast<long long>(limit * 100) + delta);
            expect(detector_is_safe(p, t) == safe,
                   std::string(entity_name(type)) + " average distinct at limit" + std::to_string(delta));
            Alert a = testkit::make_alert("a", "o", "d", now, {});
            for (long long i = 0; i < static_cast<long long>(limit) + delta; ++i) {
                a.entities.insert({type, "10.0.0." + std::to_string(i)});
            }
            expect(alert_is_low_evidence(a, t) == safe,
                   std::string(entity_name(type)) + " alert evidence at limit" + std::to_string(delta));
            checks += 2;
        }
    }
    for (const auto type : {EntityType::FileName, EntityType::URL, EntityType::EmailId, EntityType::AppId}) {
        expect(t.limit_for(type) == 10, std::string(entity_name(type)) + " high limit");
        ++checks;
    }
    expect(t.limit_for(EntityType::UserId) == 4, "default limit");
    ++checks;

    if (!failures.empty()) {
        std::string detail = std::to_string(failures.size()) + " failing:";
        for (const auto& f : failures) detail += " [" + f + "]";
        return {false, detail};
    }
    return {true, std::to_string(checks) + " boundary checks over the 17-row table, TI recency and safety limits"};
}

std::string fingerprint(const BatchOutcome& o) {
    std::ostringstream out;
    for (const auto& c : o.stage.final) out << correlation_to_json(c).dump() << '\n';
    for (const auto& r : o.stage.rejected) out << rejected_to_json(r).dump() << '\n';
    for (const auto& r : o.forest.pruned) out << rejected_to_json(r).dump() << '\n';
    for (const auto& doc : incidents_to_json(o.assignment, o.forest.forest)) out << doc.dump() << '\n';
    auto stats = stats_to_json(o.stats);
    stats.erase("stage_runtime_ms");
    out << stats.dump() << '\n';
    out << time_delta_stats_to_json(o.time_deltas, o.suggestions).dump() << '\n';
    out << gap_report_to_json(o.gaps).dump() << '\n';
    return out.str();
}

// 5. Parallel per-org execution equals serial execution.
Outcome parallel_determinism() {
    const auto catalog = EntityCatalog::defaults();
    std::size_t bytes = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        auto config = random_scenario(seed + 1000);
        config.org_count = static_cast<int>(2 + seed % 6);
        const auto data = generate_synthetic_alerts(config, catalog);
        const auto ti = ti_of(data.ti_feed);
        const auto profiles = profile_detectors(data.alerts, config.end_time);
        PipelineOptions serial;
        const auto base = fingerprint(run_pipeline(data.alerts, config.end_time, catalog, ti, profiles, SafetyThresholds{},
                                                   nullptr, serial));
        for (unsigned threads : {2U, 4U}) {
            PipelineOptions parallel;
            parallel.parallelism = threads;
            const auto other = fingerprint(run_pipeline(data.alerts, config.end_time, catalog, ti, profiles,
                                                        SafetyThresholds{}, nullptr, parallel));
            if (other != base) {
                return {false, "seed " + std::to_string(seed) + " differs with " + std::to_string(threads) + " threads"};
            }
        }
        bytes += base.size();
    }
    return {true, "50 seeds identical at 1, 2 and 4 threads (" + std::to_string(bytes) + " bytes compared per setting)"};
}

// 6. Correlation-stage time grows near-linearly.
Outcome scaling() {
    TempDir dir;
    const auto r = testkit::cli({"bench", "--sizes", "10000,100000,1000000", "--seed", "1", "--repeats", "3", "--json",
                                 (dir / "bench.json").string()});
    if (r.code != 0) return {false, "bench failed: " + r.err};
    std::cout << r.out;
    const auto doc = nlohmann::json::parse(testkit::read_file(dir / "bench.json"));
    const auto& rows = doc.at("rows");
    if (rows.size() != 3) return {false, "expected three rows"};
    const double t10k = rows[0].at("best_seconds").get<double>();
    const double t100k = rows[1].at("best_seconds").get<double>();
    const double t1m = rows[2].at("best_seconds").get<double>();
    const double ratio = t1m / t100k;
    const std::string curve = "10k " + fmt(t10k, 4) + "s, 100k " + fmt(t100k, 4) + "s, 1M " + fmt(t1m, 4) +
                              "s; time(1M)/time(100k) = " + fmt(ratio, 2);
    return {ratio <= 15.0, curve};
}

struct GroupKey {
    int stage;
    int type;
    std::string a;
    std::string b;
    auto operator<=>(const GroupKey&) const = default;
};

// 7. Flow conservation, percentile order, count additivity and gap ranking.
Outcome report_integrity() {
    const auto catalog = EntityCatalog::defaults();
    int batches = 0;
    std::size_t gap_entries = 0;
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        const auto config = random_scenario(seed + 5000);
        const auto data = generate_synthetic_alerts(config, catalog);
        const auto o = run_pipeline(data.alerts, config.end_time, catalog, ti_of(data.ti_feed),
                                    profile_detectors(data.alerts, config.end_time), SafetyThresholds{}, nullptr);
        const auto& c = o.stage.counts;
        const std::string where = "seed " + std::to_string(seed) + ": ";
        if (!c.conserved() || c.candidates != o.stage.final.size() + o.stage.rejected.size()) {
            return {false, where + "flow not conserved"};
        }
        std::map<RejectStage, std::uint64_t> by_stage;
        for (const auto& r : o.stage.rejected) ++by_stage[r.stage];
        if (by_stage[RejectStage::time_window] != c.time_window || by_stage[RejectStage::threat_intel] != c.threat_intel ||
            by_stage[RejectStage::black_hole] != c.black_hole ||
            by_stage[RejectStage::deduplicated] != c.deduplicated + c.prioritized) {
            return {false, where + "stage tallies disagree with reject tags"};
        }
        if (o.forest.forest.edges().size() + o.forest.pruned.size() != o.stage.final.size()) {
            return {false, where + "forest does not partition the finals"};
        }

        std::map<std::pair<EntityType, Population>, std::uint64_t> counts;
        for (const auto& row : o.time_deltas) {
            if (!(row.p50 <= row.p90 && row.p90 <= row.p95 && row.p95 <= row.p99)) {
                return {false, where + "percentiles out of order"};
            }
            counts[{row.entity_type, row.population}] = row.count;
        }
        std::map<EntityType, std::uint64_t> valid;
        std::map<EntityType, std::uint64_t> late;
        for (const auto& f : o.stage.final) ++valid[f.entity_type];
        for (const auto& r : o.stage.rejected)
            if (r.stage == RejectStage::time_window) ++late[r.candidate.entity_type];
        for (const auto type : kAllEntityTypes) {
            if (counts[{type, Population::valid}] != valid[type] || counts[{type, Population::rejected}] != late[type] ||
                counts[{type, Population::combined}] != valid[type] + late[type]) {
                return {false, where + "population counts for " + std::string(entity_name(type))};
            }
        }

        std::map<GroupKey, std::vector<const CandidateCorrelation*>> groups;
        for (const auto& r : o.stage.rejected) {
            if (r.stage == RejectStage::deduplicated || r.stage == RejectStage::mst_pruned) continue;
            const auto& d = r.candidate;
            GroupKey key{static_cast<int>(r.stage), static_cast<int>(d.entity_type), std::min(d.detector_a, d.detector_b),
                         std::max(d.detector_a, d.detector_b)};
            groups[key].push_back(&d);
        }
        std::vector<std::pair<GroupKey, std::size_t>> ranked;
        for (const auto& [key, members] : groups) ranked.emplace_back(key, members.size());
        std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
            if (x.second != y.second) return x.second > y.second;
            return x.first < y.first;
        });
        const auto& entries = o.gaps.entries;
        if (entries.size() != ranked.size()) return {false, where + "gap entry count"};
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            const auto& e = entries[i];
            const GroupKey key{static_cast<int>(e.stage), static_cast<int>(e.entity_type), e.detector_a, e.detector_b};
            if (!(key == ranked[i].first) || e.count != ranked[i].second) {
                return {false, where + "gap ranking differs at position " + std::to_string(i)};
            }
            auto members = groups[key];
            std::sort(members.begin(), members.end(), [](const auto* x, const auto* y) {
                return std::tie(x->org_id, x->alert_a, x->alert_b, x->entity_type, x->entity_value) <
                       std::tie(y->org_id, y->alert_a, y->alert_b, y->entity_type, y->entity_value);
            });
            const std::size_t n = std::min<std::size_t>(5, members.size());
            if (e.samples.size() != n) return {false, where + "sample count"};
            for (std::size_t j = 0; j < n; ++j)
                if (!(e.samples[j] == *members[j])) return {false, where + "samples differ"};
        }
        gap_entries += entries.size();
        ++batches;
    }
    return {true, std::to_string(batches) + " batches; " + std::to_string(gap_entries) +
                      " gap entries match the group-by oracle"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"oracle equivalence", oracle_equivalence},
        {"MST optimality and compression", mst_optimality},
        {"idempotent reruns", idempotent_reruns},
        {"filter fidelity", filter_fidelity},
        {"determinism under parallelism", parallel_determinism},
        {"scaling benchmark", scaling},
        {"report integrity", report_integrity},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int number = static_cast<int>(i + 1);
        if (!selected.empty() && !selected.contains(number)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = criteria[i].second();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cout << (outcome.pass ? "PASS" : "FAIL") << " criterion " << number << " (" << criteria[i].first
                  << "): " << outcome.detail << " [" << fmt(secs, 1) << "s]" << std::endl;
        if (!outcome.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
