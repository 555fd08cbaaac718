#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "corrgraph/correlation.hpp"
#include "corrgraph/errors.hpp"

namespace corrgraph {

struct StoredCorrelation {
    std::string org_id;
    std::string alert_a;
    std::string alert_b;
    EntityType entity_type = EntityType::SessionId;
    std::string entity_value;
    int priority = 0;
    std::string first_seen_batch;

    bool operator==(const StoredCorrelation&) const = default;
};

struct CommitReceipt {
    std::string batch_id;
    std::uint64_t sequence = 0;      // 1-based commit order
    std::uint64_t record_count = 0;  // records newly persisted by this batch
    Timestamp batch_time;

    bool operator==(const CommitReceipt&) const = default;
};

/// What open() found and repaired.
struct OpenReport {
    std::uint64_t records_read = 0;
    std::uint64_t discarded_batches = 0;  // begun but never committed
    bool torn_tail = false;
    bool checksum_mismatch = false;
    bool compacted = false;
};

struct OpenOptions {
    /// Throw CorruptStore on a checksum mismatch instead of recovering to the
    /// last committed batch.
    bool strict = false;
};

/// Thrown by the default crash handler of a fault plan.
class InjectedCrash : public Error {
public:
    using Error::Error;
};

/// Simulated crash during commit_batch. Write operations of one commit are
/// numbered 0..n+1 (begin marker, n records, commit marker); index n+2 is the
/// point after the last write and before fsync. A torn crash writes half of the
/// record's bytes first.
struct FaultPlan {
    std::size_t write_index = 0;
    bool torn = false;
    std::function<void()> crash;  // defaults to throwing InjectedCrash
};

/// File-backed table of existing correlations with an append-only batch
/// journal.
///
/// On-disk layout: a sequence of records, each a 4-byte little-endian payload
/// length, a 4-byte little-endian CRC-32 of the payload, then the payload as
/// compact JSON. Payload kinds are begin {"t":"begin","batch","time"}, record
/// {"t":"corr",...} and commit {"t":"commit","batch","seq","count"}. Only
/// batches with a commit marker are visible; everything else is dropped and
/// the journal rewritten on open. A single writer per path is enforced with an
/// advisory lock on "<path>.lock".
class CorrelationStore {
public:
    static CorrelationStore open(const std::filesystem::path& path, OpenOptions options = {});

    CorrelationStore(CorrelationStore&& other) noexcept;
    CorrelationStore& operator=(CorrelationStore&& other) noexcept;
    CorrelationStore(const CorrelationStore&) = delete;
    CorrelationStore& operator=(const CorrelationStore&) = delete;
    ~CorrelationStore();

    /// True if a committed correlation exists for the unordered pair.
    bool contains(std::string_view org_id, std::string_view alert_a, std::string_view alert_b) const;

    std::optional<CommitReceipt> receipt(std::string_view batch_id) const;

    /// Appends the batch and its commit marker, then fsyncs. Pairs already
    /// present are not re-recorded. Committing an already committed batch_id
    /// returns the original receipt and writes nothing. Throws StoreUnavailable
    /// on I/O failure; the store must then be reopened.
    CommitReceipt commit_batch(const std::string& batch_id, std::span<const Correlation> finals, Timestamp batch_time);

    /// Rewrites the journal with committed batches only, dropping batches whose
    /// batch_time is before `retain_since`.
    void compact(std::optional<Timestamp> retain_since = std::nullopt);

    std::size_t size() const noexcept { return keys_.size(); }
    std::vector<StoredCorrelation> records() const;
    std::vector<CommitReceipt> batches() const;
    const OpenReport& open_report() const noexcept { return report_; }
    const std::filesystem::path& path() const noexcept { return path_; }

    /// Arms a one-shot simulated crash for the next commit_batch.
    void inject_fault(FaultPlan plan) { fault_ = std::move(plan); }

private:
    struct Batch {
        CommitReceipt receipt;
        std::vector<StoredCorrelation> records;
    };

    CorrelationStore() = default;

    void close() noexcept;
    void append(const std::string& payload, std::size_t& op);
    void fault_point(std::size_t op, const std::string& bytes);
    void rewrite(const std::vector<Batch>& batches);
    void ensure_usable() const;

    std::filesystem::path path_;
    int fd_ = -1;
    int lock_fd_ = -1;
    bool broken_ = false;
    std::vector<Batch> batches_;
    std::unordered_set<std::string> keys_;
    OpenReport report_;
    std::optional<FaultPlan> fault_;
};

}  // namespace corrgraph
