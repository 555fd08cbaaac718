#include "commands.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "corrgraph/engine.hpp"
#include "corrgraph/errors.hpp"
#include "corrgraph/time.hpp"

namespace corrgraph::cli {

namespace fs = std::filesystem;

namespace {

bool verbose() {
    const char* v = std::getenv("CORRGRAPH_VERBOSE");
    return v != nullptr && *v != '\0' && std::string_view(v) != "0";
}

AlertFormat format_of(const std::string& name) {
    const auto f = parse_alert_format(name);
    if (!f) {
        throw ConfigError("unknown alert format '" + name + "'");
    }
    return *f;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    return out;
}

WindowPolicy policy_of(const std::string& percentile, double slack) {
    const auto p = parse_percentile(percentile);
    if (!p) {
        throw ConfigError("percentile must be one of p50, p90, p95, p99");
    }
    return WindowPolicy{*p, slack};
}

struct GenerateArgs {
    std::string config;
    std::string out;
    std::string format = "jsonl";
};

void cmd_generate(const GenerateArgs& a, std::ostream& out) {
    std::ifstream in(a.config);
    if (!in) {
        throw ConfigError("cannot read generator config " + a.config);
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("generator config: ") + e.what());
    }
    const auto config = GeneratorConfig::from_json(doc);
    const auto format = format_of(a.format);
    const auto data = generate_synthetic_alerts(config);
    const fs::path dir(a.out);
    fs::create_directories(dir);
    const std::string alerts_name = format == AlertFormat::csv ? "alerts.csv" : "alerts.jsonl";
    {
        auto f = open_out(dir / alerts_name);
        write_alerts(f, data.alerts, format);
    }
    {
        auto f = open_out(dir / "ground_truth.jsonl");
        write_ground_truth(f, data.labels);
    }
    {
        auto f = open_out(dir / "ti_feed.csv");
        write_ti(f, data.ti_feed);
    }
    out << "generated " << data.alerts.size() << " alerts, " << data.ti_feed.size() << " TI records in "
        << dir.string() << '\n';
}

struct ProfileArgs {
    std::vector<std::string> alerts;
    std::string format = "jsonl";
    std::string now;
    int window_days = 7;
    std::string out;
};

void cmd_profile(const ProfileArgs& a, std::ostream& out, std::ostream& err) {
    if (a.window_days < 1) {
        throw ConfigError("window-days must be at least 1");
    }
    const Timestamp now = parse_rfc3339(a.now);
    std::vector<Alert> rows;
    for (const auto& path : a.alerts) {
        auto loaded = load_alerts(fs::path(path), format_of(a.format));
        for (const auto& e : loaded.errors) {
            err << path << ": skipped row " << e.row << ": " << e.message << '\n';
        }
        rows.insert(rows.end(), loaded.table.rows().begin(), loaded.table.rows().end());
    }
    const auto profiles = profile_detectors(AlertTable(std::move(rows)), now, a.window_days);
    auto f = open_out(a.out);
    write_profiles(f, profiles);
    out << "profiled " << profiles.size() << " detectors\n";
}

struct RunArgs {
    std::vector<std::string> alerts;
    std::string format = "jsonl";
    bool strict = false;
    std::string ti;
    std::string profiles = "compute";
    int profile_window_days = 7;
    std::string store;
    std::string now;
    std::string source_window = "35m";
    std::string target_window = "72h";
    std::string catalog;
    std::string thresholds;
    std::string out;
    std::string batch_id;
    unsigned parallelism = 1;
    std::string edge_weight = "priority";
    std::string percentile = "p99";
    double slack = 1.2;
};

void cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
    BatchConfig c;
    for (const auto& p : a.alerts) c.alerts.emplace_back(p);
    c.format = format_of(a.format);
    c.load_mode = a.strict ? LoadMode::strict : LoadMode::lenient;
    if (!a.ti.empty()) c.ti = a.ti;
    if (a.profiles != "compute") c.profiles = a.profiles;
    c.profile_window_days = a.profile_window_days;
    c.store = a.store;
    c.now = parse_rfc3339(a.now);
    c.pipeline.source_window = parse_duration(a.source_window);
    c.pipeline.target_window = parse_duration(a.target_window);
    if (!a.catalog.empty()) c.catalog = a.catalog;
    if (!a.thresholds.empty()) c.thresholds = a.thresholds;
    c.out = a.out;
    c.batch_id = a.batch_id;
    c.pipeline.parallelism = std::max(1U, a.parallelism);
    if (a.edge_weight == "priority") c.pipeline.edge_weight = EdgeWeight::priority;
    else if (a.edge_weight == "time_delta") c.pipeline.edge_weight = EdgeWeight::time_delta;
    else if (a.edge_weight == "uniform") c.pipeline.edge_weight = EdgeWeight::uniform;
    else throw ConfigError("edge-weight must be priority, time_delta or uniform");
    c.pipeline.window_policy = policy_of(a.percentile, a.slack);

    const auto report = run_batch(c);
    for (const auto& e : report.row_errors) {
        err << "skipped row " << e.row << ": " << e.message << '\n';
    }
    const auto& s = report.outcome.stats;
    const auto& k = s.stage_counts;
    out << "batch " << report.receipt.batch_id << ": " << report.outcome.source_alerts << " source / "
        << report.outcome.target_alerts << " target alerts, " << k.candidates << " candidates, " << k.final
        << " final, " << s.edges_after << " kept edges, " << s.incident_count << " incidents\n";
    if (verbose()) {
        out << "  rejected: deduplicated=" << k.deduplicated << " time_window=" << k.time_window
            << " threat_intel=" << k.threat_intel << " black_hole=" << k.black_hole << " prioritized=" << k.prioritized
            << '\n';
        for (const auto& [stage, ms] : s.stage_runtimes_ms) {
            out << "  " << stage << ": " << ms << " ms\n";
        }
    }
}

struct BenchArgs {
    std::vector<std::size_t> sizes = {10'000, 100'000, 1'000'000};
    std::uint64_t seed = 1;
    int repeats = 3;
    unsigned parallelism = 1;
    std::string json;
};

void cmd_bench(const BenchArgs& a, std::ostream& out) {
    BenchConfig c;
    c.sizes = a.sizes;
    c.seed = a.seed;
    c.repeats = a.repeats;
    c.parallelism = std::max(1U, a.parallelism);
    const auto rows = run_bench(c);
    out << std::left << std::setw(10) << "alerts" << std::setw(9) << "source" << std::setw(10) << "target"
        << std::setw(12) << "candidates" << std::setw(10) << "final" << std::setw(12) << "seconds" << "ratio\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        std::ostringstream ratio;
        if (i > 0 && rows[i - 1].best_seconds > 0) {
            ratio << std::fixed << std::setprecision(2) << r.best_seconds / rows[i - 1].best_seconds;
        } else {
            ratio << "-";
        }
        std::ostringstream secs;
        secs << std::fixed << std::setprecision(4) << r.best_seconds;
        out << std::setw(10) << r.alerts << std::setw(9) << r.source << std::setw(10) << r.target << std::setw(12)
            << r.counts.candidates << std::setw(10) << r.counts.final << std::setw(12) << secs.str() << ratio.str()
            << '\n';
    }
    if (!a.json.empty()) {
        auto f = open_out(a.json);
        f << bench_to_json(rows).dump(2) << '\n';
    }
}

struct ReportArgs {
    std::string dir;
    std::string to;
    std::string catalog;
    std::string percentile = "p99";
    double slack = 1.2;
};

void cmd_report(const ReportArgs& a, std::ostream& out) {
    const EntityCatalog catalog = a.catalog.empty() ? EntityCatalog::defaults() : EntityCatalog::load_overrides(a.catalog);
    const auto docs = rebuild_reports(a.dir, catalog, policy_of(a.percentile, a.slack));
    const fs::path to = a.to.empty() ? fs::path(a.dir) : fs::path(a.to);
    fs::create_directories(to);
    {
        auto f = open_out(to / kTimeDeltaFile);
        f << time_delta_stats_to_json(docs.time_deltas, docs.suggestions).dump(2) << '\n';
    }
    {
        auto f = open_out(to / kGapReportFile);
        f << gap_report_to_json(docs.gaps).dump(2) << '\n';
    }
    {
        auto f = open_out(to / kTimeDeltaCsvFile);
        write_time_delta_csv(f, docs.time_deltas);
    }
    out << "wrote reports for " << docs.time_deltas.size() << " stat rows and " << docs.gaps.entries.size()
        << " gap entries to " << to.string() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Correlates security alerts into incident graphs", "corrgraph"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Write a synthetic alert set, ground truth and TI feed");
    generate->add_option("--config", gen.config, "Generator config (JSON)")->required();
    generate->add_option("--out", gen.out, "Output directory")->required();
    generate->add_option("--format", gen.format, "Alert format: jsonl or csv");

    ProfileArgs prof;
    auto* profile = app.add_subcommand("profile", "Profile detectors over a trailing window");
    profile->add_option("--alerts", prof.alerts, "Alert file(s)")->required();
    profile->add_option("--format", prof.format, "Alert format: jsonl or csv");
    profile->add_option("--now", prof.now, "Profile end instant (RFC 3339)")->required();
    profile->add_option("--window-days", prof.window_days, "Trailing window in days");
    profile->add_option("--out", prof.out, "Profiles file (JSONL)")->required();

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run one correlation batch");
    run_cmd->add_option("--alerts", run.alerts, "Alert file(s)")->required();
    run_cmd->add_option("--format", run.format, "Alert format: jsonl or csv");
    run_cmd->add_flag("--strict", run.strict, "Abort on the first malformed row");
    run_cmd->add_option("--ti", run.ti, "Threat-intelligence feed (CSV)");
    run_cmd->add_option("--profiles", run.profiles, "Profiles file or 'compute'");
    run_cmd->add_option("--profile-window-days", run.profile_window_days, "Window for computed profiles");
    run_cmd->add_option("--store", run.store, "Correlation store journal")->required();
    run_cmd->add_option("--now", run.now, "Batch instant (RFC 3339)")->required();
    run_cmd->add_option("--source-window", run.source_window, "Source window, e.g. 35m");
    run_cmd->add_option("--target-window", run.target_window, "Target window, e.g. 72h");
    run_cmd->add_option("--catalog", run.catalog, "Entity catalog overrides (JSON)");
    run_cmd->add_option("--thresholds", run.thresholds, "Safety threshold overrides (JSON)");
    run_cmd->add_option("--out", run.out, "Output directory")->required();
    run_cmd->add_option("--batch-id", run.batch_id, "Batch identifier");
    run_cmd->add_option("--parallelism", run.parallelism, "Worker threads");
    run_cmd->add_option("--edge-weight", run.edge_weight, "Forest weight: priority, time_delta or uniform");
    run_cmd->add_option("--percentile", run.percentile, "Percentile for window suggestions");
    run_cmd->add_option("--slack", run.slack, "Slack factor for window suggestions");

    BenchArgs bench;
    auto* bench_cmd = app.add_subcommand("bench", "Time the correlation stage at several sizes");
    bench_cmd->add_option("--sizes", bench.sizes, "Alert counts, ascending")->delimiter(',');
    bench_cmd->add_option("--seed", bench.seed, "Generator seed");
    bench_cmd->add_option("--repeats", bench.repeats, "Runs per size; the fastest counts");
    bench_cmd->add_option("--parallelism", bench.parallelism, "Worker threads");
    bench_cmd->add_option("--json", bench.json, "Also write the results as JSON");

    ReportArgs rep;
    auto* report = app.add_subcommand("report", "Rebuild time-delta and gap reports from a run directory");
    report->add_option("--dir", rep.dir, "Run output directory")->required();
    report->add_option("--to", rep.to, "Destination directory (defaults to --dir)");
    report->add_option("--catalog", rep.catalog, "Entity catalog overrides (JSON)");
    report->add_option("--percentile", rep.percentile, "Percentile for window suggestions");
    report->add_option("--slack", rep.slack, "Slack factor for window suggestions");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "corrgraph: " << e.what() << '\n';
        return kUsage;
    }

    try {
        if (generate->parsed()) cmd_generate(gen, out);
        else if (profile->parsed()) cmd_profile(prof, out, err);
        else if (run_cmd->parsed()) cmd_run(run, out, err);
        else if (bench_cmd->parsed()) cmd_bench(bench, out);
        else if (report->parsed()) cmd_report(rep, out);
        return kOk;
    } catch (const StoreUnavailable& e) {
        err << "corrgraph: store: " << e.what() << '\n';
        return kStore;
    } catch (const CorruptStore& e) {
        err << "corrgraph: store: " << e.what() << '\n';
        return kStore;
    } catch (const DanglingEndpoint& e) {
        err << "corrgraph: internal: " << e.what() << '\n';
        return kInternal;
    } catch (const InvariantViolation& e) {
        err << "corrgraph: internal: " << e.what() << '\n';
        return kInternal;
    } catch (const Error& e) {
        err << "corrgraph: " << e.what() << '\n';
        return kSchema;
    } catch (const fs::filesystem_error& e) {
        err << "corrgraph: " << e.what() << '\n';
        return kSchema;
    } catch (const std::exception& e) {
        err << "corrgraph: internal: " << e.what() << '\n';
        return kInternal;
    }
}

}  // namespace corrgraph::cli
