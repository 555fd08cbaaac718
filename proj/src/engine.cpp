#include "corrgraph/engine.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <system_error>
#include <unistd.h>

#include "corrgraph/errors.hpp"
#include "corrgraph/time.hpp"

namespace corrgraph {

namespace fs = std::filesystem;

BatchOutcome run_pipeline(const AlertTable& alerts, Timestamp now, const EntityCatalog& catalog, const TiStore& ti,
                          const ProfileMap& profiles, const SafetyThresholds& thresholds,
                          const CorrelationStore* store, const PipelineOptions& options) {
    const auto slices = window_slice(alerts, now, options.source_window, options.target_window);
    BatchOutcome out;
    out.source_alerts = slices.source.size();
    out.target_alerts = slices.target.size();
    out.stage = run_correlation_stage(slices.source, slices.target, catalog, ti, profiles, store, now, thresholds,
                                      StageOptions{options.parallelism});

    out.graph = build_graph(out.stage.final, slices.target, &slices.source);
    out.forest = spanning_forest(out.graph, options.edge_weight);
    out.assignment = assign_incidents(out.forest.forest);
    out.stats = mine_stats(out.stage, out.graph, out.forest.forest, out.assignment, out.stage.timings);

    out.time_deltas = time_delta_stats(out.stage.final, out.stage.rejected);
    out.suggestions = suggest_time_windows(out.time_deltas, catalog, options.window_policy);
    out.gaps = gap_report(out.stage.rejected);
    return out;
}

namespace {

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    body(out);
    out.flush();
    if (!out) {
        throw Error("write failed for " + path.string());
    }
}

void write_json(const fs::path& path, const nlohmann::json& doc) {
    write_file(path, [&](std::ostream& o) { o << doc.dump(2) << '\n'; });
}

std::vector<RejectedCorrelation> all_rejects(const BatchOutcome& outcome) {
    std::vector<RejectedCorrelation> rejects = outcome.stage.rejected;
    rejects.insert(rejects.end(), outcome.forest.pruned.begin(), outcome.forest.pruned.end());
    std::sort(rejects.begin(), rejects.end(), [](const auto& x, const auto& y) { return canonical_less(x, y); });
    return rejects;
}

template <typename T, typename F>
std::vector<T> read_jsonl(const fs::path& path, F&& decode) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw SchemaError("cannot read " + path.string());
    }
    std::vector<T> out;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            out.push_back(decode(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(path.filename().string() + ": " + e.what(), row);
        } catch (const ParseError& e) {
            throw SchemaError(path.filename().string() + ": " + e.what(), row);
        }
        ++row;
    }
    return out;
}

fs::path sibling(const fs::path& dir, const std::string& suffix) {
    fs::path base = dir;
    if (!base.has_filename()) {
        base = base.parent_path();
    }
    return base.parent_path() / (base.filename().string() + suffix + "-" + std::to_string(::getpid()));
}

void publish(const fs::path& staged, const fs::path& out) {
    const fs::path old = sibling(out, ".old");
    const bool had_previous = fs::exists(out);
    if (had_previous) {
        fs::rename(out, old);
    }
    fs::rename(staged, out);
    if (had_previous) {
        fs::remove_all(old);
    }
}

}  // namespace

void write_artifacts(const fs::path& dir, const BatchOutcome& outcome) {
    fs::create_directories(dir);
    write_file(dir / kIncidentsFile, [&](std::ostream& o) {
        for (const auto& doc : incidents_to_json(outcome.assignment, outcome.forest.forest)) {
            o << doc.dump() << '\n';
        }
    });
    write_file(dir / kCorrelationsFile, [&](std::ostream& o) {
        for (const auto& e : outcome.forest.forest.edges()) {
            auto doc = correlation_to_json(e.correlation);
            doc["schema_version"] = 1;
            o << doc.dump() << '\n';
        }
    });
    write_file(dir / kRejectedFile, [&](std::ostream& o) {
        for (const auto& r : all_rejects(outcome)) {
            auto doc = rejected_to_json(r);
            doc["schema_version"] = 1;
            o << doc.dump() << '\n';
        }
    });
    write_json(dir / kStatsFile, stats_to_json(outcome.stats));
    write_json(dir / kTimeDeltaFile, time_delta_stats_to_json(outcome.time_deltas, outcome.suggestions));
    write_json(dir / kGapReportFile, gap_report_to_json(outcome.gaps));
    write_file(dir / kTimeDeltaCsvFile, [&](std::ostream& o) { write_time_delta_csv(o, outcome.time_deltas); });
}

BatchReport run_batch(const BatchConfig& config) {
    if (config.alerts.empty()) {
        throw ConfigError("at least one alert file is required");
    }
    if (config.out.empty()) {
        throw ConfigError("an output directory is required");
    }
    const EntityCatalog catalog = config.catalog ? EntityCatalog::load_overrides(*config.catalog) : EntityCatalog::defaults();
    SafetyThresholds thresholds;
    if (config.thresholds) {
        std::ifstream in(*config.thresholds);
        if (!in) {
            throw ConfigError("cannot read thresholds file " + config.thresholds->string());
        }
        try {
            thresholds = SafetyThresholds::from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("thresholds: ") + e.what());
        }
    }
    if (config.pipeline.source_window > config.pipeline.target_window) {
        throw InvalidWindow("source window " + format_duration(config.pipeline.source_window) +
                            " exceeds target window " + format_duration(config.pipeline.target_window));
    }

    BatchReport report;
    std::vector<Alert> rows;
    for (const auto& path : config.alerts) {
        auto loaded = load_alerts(path, config.format, config.load_mode);
        for (auto& e : loaded.errors) {
            e.message = path.filename().string() + ": " + e.message;
            report.row_errors.push_back(std::move(e));
        }
        rows.insert(rows.end(), loaded.table.rows().begin(), loaded.table.rows().end());
    }
    const AlertTable alerts(std::move(rows));
    const TiStore ti = config.ti ? load_ti(*config.ti, catalog) : TiStore(catalog);
    const ProfileMap profiles =
        config.profiles ? read_profiles(*config.profiles) : profile_detectors(alerts, config.now, config.profile_window_days);

    auto store = CorrelationStore::open(config.store);
    report.outcome = run_pipeline(alerts, config.now, catalog, ti, profiles, thresholds, &store, config.pipeline);

    const fs::path staged = sibling(config.out, ".staging");
    fs::remove_all(staged);
    try {
        write_artifacts(staged, report.outcome);
        const std::string batch_id = config.batch_id.empty() ? "batch-" + format_rfc3339(config.now) : config.batch_id;
        report.receipt = store.commit_batch(batch_id, report.outcome.stage.final, config.now);
        publish(staged, config.out);
    } catch (...) {
        std::error_code ignored;
        fs::remove_all(staged, ignored);
        throw;
    }
    return report;
}

std::vector<Correlation> read_correlations(const fs::path& path) {
    return read_jsonl<Correlation>(path, [](const nlohmann::json& j) { return correlation_from_json(j); });
}

std::vector<RejectedCorrelation> read_rejected(const fs::path& path) {
    return read_jsonl<RejectedCorrelation>(path, [](const nlohmann::json& j) { return rejected_from_json(j); });
}

ReportDocuments rebuild_reports(const fs::path& out_dir, const EntityCatalog& catalog, WindowPolicy policy) {
    auto finals = read_correlations(out_dir / kCorrelationsFile);
    auto rejected = read_rejected(out_dir / kRejectedFile);
    std::vector<RejectedCorrelation> stage_rejects;
    for (auto& r : rejected) {
        if (r.stage == RejectStage::mst_pruned) {
            finals.push_back(std::move(r.candidate));
        } else {
            stage_rejects.push_back(std::move(r));
        }
    }
    std::sort(finals.begin(), finals.end(), [](const auto& x, const auto& y) { return canonical_less(x, y); });
    ReportDocuments docs;
    docs.time_deltas = time_delta_stats(finals, stage_rejects);
    docs.suggestions = suggest_time_windows(docs.time_deltas, catalog, policy);
    docs.gaps = gap_report(stage_rejects);
    return docs;
}

GeneratorConfig bench_workload(std::size_t alerts, std::uint64_t seed) {
    constexpr std::size_t kAlertsPerOrg = 400;
    GeneratorConfig c = GeneratorConfig::defaults();
    c.seed = seed;
    c.org_count = static_cast<int>(std::max<std::size_t>(1, (alerts + kAlertsPerOrg / 2) / kAlertsPerOrg));
    c.incidents_per_org = 25;
    c.incident_size = {4, 12};
    c.noise_alert_fraction = 0.5;
    c.collision_rate = 0.05;
    c.second_link_probability = 0.3;
    return c;
}

std::vector<BenchRow> run_bench(const BenchConfig& config) {
    if (config.sizes.empty() || !std::is_sorted(config.sizes.begin(), config.sizes.end()) ||
        std::adjacent_find(config.sizes.begin(), config.sizes.end()) != config.sizes.end()) {
        throw ConfigError("bench sizes must be non-empty and strictly ascending");
    }
    if (config.repeats < 1) {
        throw ConfigError("bench repeats must be positive");
    }
    const EntityCatalog catalog = EntityCatalog::defaults();
    const SafetyThresholds thresholds;
    std::vector<BenchRow> rows;
    for (const std::size_t size : config.sizes) {
        const GeneratorConfig workload = bench_workload(size, config.seed);
        const GeneratedData data = generate_synthetic_alerts(workload, catalog);
        TiStore ti(catalog);
        for (const auto& r : data.ti_feed) {
            ti.add(r);
        }
        const Timestamp now = workload.end_time;
        const ProfileMap profiles = profile_detectors(data.alerts, now);
        const auto slices = window_slice(data.alerts, now);

        BenchRow row;
        row.requested = size;
        row.alerts = data.alerts.size();
        row.source = slices.source.size();
        row.target = slices.target.size();
        for (int r = 0; r < config.repeats; ++r) {
            const auto start = std::chrono::steady_clock::now();
            auto result = run_correlation_stage(slices.source, slices.target, catalog, ti, profiles, nullptr, now,
                                                thresholds, StageOptions{config.parallelism});
            const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            row.runs.push_back(seconds);
            if (r == 0 || seconds < row.best_seconds) {
                row.best_seconds = seconds;
                row.stage_ms = result.timings;
            }
            row.counts = result.counts;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

nlohmann::json bench_to_json(const std::vector<BenchRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json stages = nlohmann::json::object();
        for (const auto& [name, ms] : r.stage_ms) {
            stages[name] = ms;
        }
        out.push_back({{"requested", r.requested},
                       {"alerts", r.alerts},
                       {"source", r.source},
                       {"target", r.target},
                       {"candidates", r.counts.candidates},
                       {"final", r.counts.final},
                       {"best_seconds", r.best_seconds},
                       {"runs", r.runs},
                       {"stage_ms", stages}});
    }
    return {{"schema_version", 1}, {"rows", out}};
}

}  // namespace corrgraph
