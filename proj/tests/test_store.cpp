#include <doctest.h>

#include <fstream>

#include "corrgraph/errors.hpp"
#include "corrgraph/store.hpp"
#include "testkit.hpp"

using namespace corrgraph;
using namespace std::chrono_literals;
using testkit::base_time;
using testkit::read_file;
using testkit::TempDir;

namespace {

std::vector<Correlation> finals(int n, const std::string& prefix = "a") {
    std::vector<Correlation> out;
    for (int i = 0; i < n; ++i) {
        out.push_back(Correlation{"o", prefix + std::to_string(100 + i), prefix + std::to_string(200 + i), "d1", "d2",
                                  EntityType::UserId, "u" + std::to_string(i), Seconds(i), 5});
    }
    return out;
}

}  // namespace

TEST_CASE("fresh path is empty") {
    TempDir dir;
    const auto store = CorrelationStore::open(dir / "s.journal");
    CHECK(store.size() == 0);
    CHECK(store.batches().empty());
    CHECK_FALSE(store.open_report().compacted);
}

TEST_CASE("committed batch is visible after reopen") {
    TempDir dir;
    {
        auto store = CorrelationStore::open(dir / "s.journal");
        const auto receipt = store.commit_batch("b1", finals(10), base_time());
        CHECK(receipt.sequence == 1);
        CHECK(receipt.record_count == 10);
        CHECK(store.contains("o", "a100", "a200"));
        CHECK_FALSE(store.contains("o", "a100", "a201"));
    }
    const auto store = CorrelationStore::open(dir / "s.journal");
    CHECK(store.size() == 10);
    CHECK(store.records().front().first_seen_batch == "b1");
    CHECK(store.receipt("b1")->batch_time == base_time());
}

TEST_CASE("recommitting a batch id is a no-op") {
    TempDir dir;
    auto store = CorrelationStore::open(dir / "s.journal");
    const auto first = store.commit_batch("b1", finals(3), base_time());
    const auto bytes = read_file(dir / "s.journal");
    const auto second = store.commit_batch("b1", finals(5, "z"), base_time() + 1h);
    CHECK(first == second);
    CHECK(read_file(dir / "s.journal") == bytes);
    CHECK(store.size() == 3);
}

TEST_CASE("two batches union and known pairs are not stored twice") {
    TempDir dir;
    auto store = CorrelationStore::open(dir / "s.journal");
    store.commit_batch("b1", finals(3), base_time());
    const auto r2 = store.commit_batch("b2", finals(5), base_time() + 1h);
    CHECK(r2.sequence == 2);
    CHECK(r2.record_count == 2);
    CHECK(store.size() == 5);
}

TEST_CASE("a crash before the commit marker hides the batch") {
    TempDir dir;
    const auto path = dir / "s.journal";
    {
        auto store = CorrelationStore::open(path);
        store.commit_batch("b1", finals(2), base_time());
        store.inject_fault(FaultPlan{4, false, nullptr});
        CHECK_THROWS_AS(store.commit_batch("b2", finals(4, "x"), base_time()), InjectedCrash);
        CHECK_THROWS_AS(store.commit_batch("b3", finals(1, "y"), base_time()), StoreUnavailable);
    }
    auto store = CorrelationStore::open(path);
    CHECK(store.open_report().discarded_batches == 1);
    CHECK(store.open_report().compacted);
    CHECK(store.size() == 2);
    CHECK_FALSE(store.receipt("b2"));
    store.commit_batch("b2", finals(4, "x"), base_time());
    CHECK(store.size() == 6);
}

TEST_CASE("every fault point converges to the clean journal") {
    TempDir dir;
    const auto clean = dir / "clean.journal";
    {
        auto store = CorrelationStore::open(clean);
        store.commit_batch("b1", finals(2), base_time());
        store.commit_batch("b2", finals(3, "x"), base_time() + 1h);
        store.compact();
    }
    const std::string expected = read_file(clean);
    for (std::size_t point = 0; point <= 5; ++point) {
        for (const bool torn : {false, true}) {
            CAPTURE(point);
            CAPTURE(torn);
            const auto path = dir / ("f" + std::to_string(point) + (torn ? "t" : "") + ".journal");
            {
                auto store = CorrelationStore::open(path);
                store.commit_batch("b1", finals(2), base_time());
                store.inject_fault(FaultPlan{point, torn, nullptr});
                CHECK_THROWS_AS(store.commit_batch("b2", finals(3, "x"), base_time() + 1h), InjectedCrash);
            }
            {
                auto store = CorrelationStore::open(path);
                store.commit_batch("b2", finals(3, "x"), base_time() + 1h);
                store.compact();
            }
            CHECK(read_file(path) == expected);
        }
    }
}

TEST_CASE("corruption is detected") {
    TempDir dir;
    const auto path = dir / "s.journal";
    {
        auto store = CorrelationStore::open(path);
        store.commit_batch("b1", finals(2), base_time());
        store.commit_batch("b2", finals(2, "x"), base_time());
    }
    std::string bytes = read_file(path);
    bytes[bytes.size() - 3] ^= 0x5a;
    testkit::write_file(path, bytes);
    CHECK_THROWS_AS(CorrelationStore::open(path, OpenOptions{true}), CorruptStore);
    const auto store = CorrelationStore::open(path);
    CHECK(store.open_report().checksum_mismatch);
    CHECK(store.size() == 2);
    CHECK(store.receipt("b1"));
    CHECK_FALSE(store.receipt("b2"));
}

TEST_CASE("truncated tail is dropped") {
    TempDir dir;
    const auto path = dir / "s.journal";
    {
        auto store = CorrelationStore::open(path);
        store.commit_batch("b1", finals(2), base_time());
    }
    const std::string good = read_file(path);
    testkit::write_file(path, good + std::string("\x10\x00\x00", 3));
    const auto store = CorrelationStore::open(path);
    CHECK(store.open_report().torn_tail);
    CHECK(store.size() == 2);
    CHECK(read_file(path) == good);
}

TEST_CASE("single writer") {
    TempDir dir;
    const auto store = CorrelationStore::open(dir / "s.journal");
    CHECK_THROWS_AS(CorrelationStore::open(dir / "s.journal"), StoreUnavailable);
}

TEST_CASE("compaction drops old batches") {
    TempDir dir;
    auto store = CorrelationStore::open(dir / "s.journal");
    store.commit_batch("old", finals(2), base_time() - 100h);
    store.commit_batch("new", finals(2, "x"), base_time());
    store.compact(base_time() - 72h);
    CHECK(store.size() == 2);
    CHECK_FALSE(store.contains("o", "a100", "a200"));
    CHECK(store.contains("o", "x100", "x200"));
    CHECK(store.batches().size() == 1);
}
