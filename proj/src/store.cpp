#include "corrgraph/store.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <map>

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include <json.hpp>

namespace corrgraph {

namespace {

constexpr std::size_t kHeaderSize = 8;
constexpr std::uint32_t kMaxPayload = 64U << 20;

std::string pair_key(std::string_view org, std::string_view a, std::string_view b) {
    if (b < a) {
        std::swap(a, b);
    }
    std::string key;
    key.reserve(org.size() + a.size() + b.size() + 2);
    key.append(org).push_back('\x1f');
    key.append(a).push_back('\x1f');
    key.append(b);
    return key;
}

std::uint32_t checksum(std::string_view payload) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

std::uint32_t get_u32(const char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    }
    return v;
}

std::string frame(const std::string& payload) {
    std::string out;
    out.reserve(kHeaderSize + payload.size());
    put_u32(out, static_cast<std::uint32_t>(payload.size()));
    put_u32(out, checksum(payload));
    out += payload;
    return out;
}

std::string begin_payload(const std::string& batch, Timestamp time) {
    return nlohmann::json{{"t", "begin"}, {"batch", batch}, {"time", format_rfc3339(time)}}.dump();
}

std::string record_payload(const StoredCorrelation& r) {
    return nlohmann::json{{"t", "corr"},
                          {"batch", r.first_seen_batch},
                          {"org", r.org_id},
                          {"a", r.alert_a},
                          {"b", r.alert_b},
                          {"entity", entity_name(r.entity_type)},
                          {"value", r.entity_value},
                          {"priority", r.priority}}
        .dump();
}

std::string commit_payload(const CommitReceipt& r) {
    return nlohmann::json{{"t", "commit"}, {"batch", r.batch_id}, {"seq", r.sequence}, {"count", r.record_count}}.dump();
}

void write_all(int fd, const char* data, std::size_t size) {
    while (size > 0) {
        const ssize_t n = ::write(fd, data, size);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw StoreUnavailable(std::string("journal write failed: ") + std::strerror(errno));
        }
        data += n;
        size -= static_cast<std::size_t>(n);
    }
}

std::string read_file(int fd) {
    std::string data;
    char buf[1 << 16];
    if (::lseek(fd, 0, SEEK_SET) < 0) {
        throw StoreUnavailable(std::string("journal seek failed: ") + std::strerror(errno));
    }
    while (true) {
        const ssize_t n = ::read(fd, buf, sizeof(buf));
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw StoreUnavailable(std::string("journal read failed: ") + std::strerror(errno));
        }
        if (n == 0) {
            break;
        }
        data.append(buf, static_cast<std::size_t>(n));
    }
    return data;
}

void fsync_dir(const std::filesystem::path& dir) {
    const int dfd = ::open(dir.empty() ? "." : dir.c_str(), O_RDONLY | O_DIRECTORY);
    if (dfd >= 0) {
        ::fsync(dfd);
        ::close(dfd);
    }
}

}  // namespace

CorrelationStore CorrelationStore::open(const std::filesystem::path& path, OpenOptions options) {
    CorrelationStore store;
    store.path_ = path;
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    const auto lock_path = path.string() + ".lock";
    store.lock_fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (store.lock_fd_ < 0) {
        throw StoreUnavailable("cannot open store lock " + lock_path + ": " + std::strerror(errno));
    }
    if (::flock(store.lock_fd_, LOCK_EX | LOCK_NB) != 0) {
        throw StoreUnavailable("store " + path.string() + " is locked by another writer");
    }
    store.fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (store.fd_ < 0) {
        throw StoreUnavailable("cannot open store " + path.string() + ": " + std::strerror(errno));
    }

    const std::string data = read_file(store.fd_);
    struct Pending {
        Timestamp time;
        std::vector<StoredCorrelation> records;
    };
    std::map<std::string, Pending> pending;
    std::size_t pos = 0;
    while (pos < data.size()) {
        if (data.size() - pos < kHeaderSize) {
            store.report_.torn_tail = true;
            break;
        }
        const std::uint32_t len = get_u32(data.data() + pos);
        const std::uint32_t crc = get_u32(data.data() + pos + 4);
        if (len > kMaxPayload) {
            store.report_.checksum_mismatch = true;
            break;
        }
        if (data.size() - pos - kHeaderSize < len) {
            store.report_.torn_tail = true;
            break;
        }
        const std::string_view payload(data.data() + pos + kHeaderSize, len);
        if (checksum(payload) != crc) {
            store.report_.checksum_mismatch = true;
            break;
        }
        nlohmann::json rec = nlohmann::json::parse(payload, nullptr, false);
        if (rec.is_discarded() || !rec.is_object()) {
            store.report_.checksum_mismatch = true;
            break;
        }
        pos += kHeaderSize + len;
        ++store.report_.records_read;
        try {
            const auto kind = rec.at("t").get<std::string>();
            const auto batch = rec.at("batch").get<std::string>();
            if (kind == "begin") {
                pending[batch] = Pending{parse_rfc3339(rec.at("time").get<std::string>()), {}};
            } else if (kind == "corr") {
                const auto it = pending.find(batch);
                if (it == pending.end()) {
                    continue;
                }
                const auto type = parse_entity_type(rec.at("entity").get<std::string>());
                if (!type) {
                    throw CorruptStore("unknown entity type in journal");
                }
                it->second.records.push_back(StoredCorrelation{rec.at("org").get<std::string>(),
                                                               rec.at("a").get<std::string>(),
                                                               rec.at("b").get<std::string>(), *type,
                                                               rec.at("value").get<std::string>(),
                                                               rec.at("priority").get<int>(), batch});
            } else if (kind == "commit") {
                const auto it = pending.find(batch);
                if (it == pending.end() || store.receipt(batch)) {
                    continue;
                }
                Batch committed;
                committed.receipt = CommitReceipt{batch, rec.at("seq").get<std::uint64_t>(),
                                                  rec.at("count").get<std::uint64_t>(), it->second.time};
                for (auto& r : it->second.records) {
                    if (store.keys_.insert(pair_key(r.org_id, r.alert_a, r.alert_b)).second) {
                        committed.records.push_back(std::move(r));
                    }
                }
                store.batches_.push_back(std::move(committed));
                pending.erase(it);
            }
        } catch (const nlohmann::json::exception&) {
            store.report_.checksum_mismatch = true;
            break;
        } catch (const ParseError&) {
            store.report_.checksum_mismatch = true;
            break;
        }
    }
    if (store.report_.checksum_mismatch && options.strict) {
        throw CorruptStore("journal " + path.string() + " failed checksum verification");
    }
    store.report_.discarded_batches = pending.size();
    if (store.report_.torn_tail || store.report_.checksum_mismatch || !pending.empty()) {
        store.rewrite(store.batches_);
        store.report_.compacted = true;
    }
    return store;
}

CorrelationStore::CorrelationStore(CorrelationStore&& other) noexcept
    : path_(std::move(other.path_)),
      fd_(std::exchange(other.fd_, -1)),
      lock_fd_(std::exchange(other.lock_fd_, -1)),
      broken_(other.broken_),
      batches_(std::move(other.batches_)),
      keys_(std::move(other.keys_)),
      report_(other.report_),
      fault_(std::move(other.fault_)) {}

CorrelationStore& CorrelationStore::operator=(CorrelationStore&& other) noexcept {
    if (this != &other) {
        close();
        path_ = std::move(other.path_);
        fd_ = std::exchange(other.fd_, -1);
        lock_fd_ = std::exchange(other.lock_fd_, -1);
        broken_ = other.broken_;
        batches_ = std::move(other.batches_);
        keys_ = std::move(other.keys_);
        report_ = other.report_;
        fault_ = std::move(other.fault_);
    }
    return *this;
}

CorrelationStore::~CorrelationStore() { close(); }

void CorrelationStore::close() noexcept {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
    if (lock_fd_ >= 0) {
        ::flock(lock_fd_, LOCK_UN);
        ::close(lock_fd_);
        lock_fd_ = -1;
    }
}

void CorrelationStore::ensure_usable() const {
    if (fd_ < 0) {
        throw StoreUnavailable("store is closed");
    }
    if (broken_) {
        throw StoreUnavailable("store " + path_.string() + " failed mid-commit; reopen to recover");
    }
}

bool CorrelationStore::contains(std::string_view org_id, std::string_view alert_a, std::string_view alert_b) const {
    if (fd_ < 0) {
        throw StoreUnavailable("store is closed");
    }
    return keys_.contains(pair_key(org_id, alert_a, alert_b));
}

std::optional<CommitReceipt> CorrelationStore::receipt(std::string_view batch_id) const {
    for (const auto& b : batches_) {
        if (b.receipt.batch_id == batch_id) {
            return b.receipt;
        }
    }
    return std::nullopt;
}

void CorrelationStore::fault_point(std::size_t op, const std::string& bytes) {
    if (!fault_ || fault_->write_index != op) {
        return;
    }
    const FaultPlan plan = std::move(*fault_);
    fault_.reset();
    broken_ = true;
    if (plan.torn && !bytes.empty()) {
        write_all(fd_, bytes.data(), bytes.size() / 2);
    }
    if (plan.crash) {
        plan.crash();
    }
    throw InjectedCrash("injected crash at commit step " + std::to_string(op) + (plan.torn ? " (torn)" : ""));
}

void CorrelationStore::append(const std::string& payload, std::size_t& op) {
    const std::string bytes = frame(payload);
    fault_point(op, bytes);
    ++op;
    try {
        write_all(fd_, bytes.data(), bytes.size());
    } catch (...) {
        broken_ = true;
        throw;
    }
}

CommitReceipt CorrelationStore::commit_batch(const std::string& batch_id, std::span<const Correlation> finals,
                                             Timestamp batch_time) {
    ensure_usable();
    if (auto existing = receipt(batch_id)) {
        return *existing;
    }
    std::vector<const Correlation*> ordered;
    ordered.reserve(finals.size());
    for (const auto& c : finals) {
        ordered.push_back(&c);
    }
    std::sort(ordered.begin(), ordered.end(),
              [](const Correlation* x, const Correlation* y) { return canonical_less(*x, *y); });

    Batch batch;
    std::unordered_set<std::string> batch_keys;
    for (const Correlation* c : ordered) {
        auto key = pair_key(c->org_id, c->alert_a, c->alert_b);
        if (keys_.contains(key) || !batch_keys.insert(std::move(key)).second) {
            continue;
        }
        batch.records.push_back(StoredCorrelation{c->org_id, c->alert_a, c->alert_b, c->entity_type, c->entity_value,
                                                  c->priority, batch_id});
    }
    batch.receipt = CommitReceipt{batch_id, batches_.empty() ? 1 : batches_.back().receipt.sequence + 1,
                                  batch.records.size(), batch_time};

    std::size_t op = 0;
    append(begin_payload(batch_id, batch_time), op);
    for (const auto& r : batch.records) {
        append(record_payload(r), op);
    }
    append(commit_payload(batch.receipt), op);
    fault_point(op, {});
    if (::fsync(fd_) != 0) {
        broken_ = true;
        throw StoreUnavailable(std::string("journal fsync failed: ") + std::strerror(errno));
    }

    for (auto& key : batch_keys) {
        keys_.insert(std::move(key));
    }
    batches_.push_back(std::move(batch));
    return batches_.back().receipt;
}

void CorrelationStore::rewrite(const std::vector<Batch>& batches) {
    const auto tmp = path_.string() + ".compact";
    const int tfd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (tfd < 0) {
        throw StoreUnavailable("cannot create " + tmp + ": " + std::strerror(errno));
    }
    try {
        std::string out;
        for (const auto& b : batches) {
            out += frame(begin_payload(b.receipt.batch_id, b.receipt.batch_time));
            for (const auto& r : b.records) {
                out += frame(record_payload(r));
            }
            out += frame(commit_payload(b.receipt));
        }
        write_all(tfd, out.data(), out.size());
        if (::fsync(tfd) != 0) {
            throw StoreUnavailable(std::string("fsync failed: ") + std::strerror(errno));
        }
    } catch (...) {
        ::close(tfd);
        ::unlink(tmp.c_str());
        throw;
    }
    ::close(tfd);
    if (::rename(tmp.c_str(), path_.c_str()) != 0) {
        throw StoreUnavailable("cannot replace journal " + path_.string() + ": " + std::strerror(errno));
    }
    fsync_dir(path_.parent_path());
    if (fd_ >= 0) {
        ::close(fd_);
    }
    fd_ = ::open(path_.c_str(), O_RDWR | O_APPEND | O_CLOEXEC);
    if (fd_ < 0) {
        throw StoreUnavailable("cannot reopen journal " + path_.string() + ": " + std::strerror(errno));
    }
    broken_ = false;
}

void CorrelationStore::compact(std::optional<Timestamp> retain_since) {
    ensure_usable();
    std::vector<Batch> kept;
    for (const auto& b : batches_) {
        if (!retain_since || b.receipt.batch_time >= *retain_since) {
            kept.push_back(b);
        }
    }
    rewrite(kept);
    batches_ = std::move(kept);
    keys_.clear();
    for (const auto& b : batches_) {
        for (const auto& r : b.records) {
            keys_.insert(pair_key(r.org_id, r.alert_a, r.alert_b));
        }
    }
}

std::vector<StoredCorrelation> CorrelationStore::records() const {
    std::vector<StoredCorrelation> out;
    for (const auto& b : batches_) {
        out.insert(out.end(), b.records.begin(), b.records.end());
    }
    return out;
}

std::vector<CommitReceipt> CorrelationStore::batches() const {
    std::vector<CommitReceipt> out;
    for (const auto& b : batches_) {
        out.push_back(b.receipt);
    }
    return out;
}

}  // namespace corrgraph
