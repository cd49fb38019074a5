#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "memgauge/telemetry.hpp"

using namespace memgauge;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "memgauge_telemetry_tests";
    fs::create_directories(dir);
    return dir / name;
}

TelemetryRecord record(std::size_t epoch, Split split, const std::string& id, double loss,
                       double score) {
    TelemetryRecord r;
    r.run_id = "run";
    r.noise_rate = 0.25;
    r.noise_mode = "label_swap";
    r.epoch = epoch;
    r.split = split;
    r.sample_id = id;
    r.loss = loss;
    r.predicted = TextValue::scalar("get");
    r.score = score;
    r.correct = score > 0.5;
    r.target = TextValue::scalar("run");
    return r;
}

} // namespace

TEST_CASE("append/read round trip preserves every field exactly") {
    const fs::path path = temp_file("roundtrip.jsonl");
    std::vector<TelemetryRecord> originals;
    {
        TraceSink sink(path.string());
        double awkward = 0.1 + 0.2; // not representable exactly
        for (std::size_t epoch = 0; epoch < 2; ++epoch) {
            for (const auto& id : {"a", "b", "c"}) {
                TelemetryRecord r = record(epoch, Split::Train, id, awkward * (epoch + 1),
                                           1.0 / 3.0);
                TelemetryRecord h = record(epoch, Split::Heldout, id, std::exp(1.0), 0.9999999999);
                sink.append(r);
                sink.append(h);
                originals.push_back(r);
                originals.push_back(h);
            }
        }
    }
    std::ifstream in(path);
    std::string line;
    std::size_t i = 0;
    while (std::getline(in, line)) {
        const TelemetryRecord parsed = record_from_json_line(line, i + 1);
        CHECK(parsed == originals[i]);
        ++i;
    }
    CHECK(i == originals.size());

    const RunTrace trace = read_trace(path.string());
    CHECK(trace.epoch_count() == 2);
    CHECK(trace.record_count() == 12);
}

TEST_CASE("var_misuse loss components must sum") {
    TelemetryRecord r = record(0, Split::Train, "x", 1.0, 0.5);
    r.predicted = TextValue::tokens({"5", "0.75"});
    r.target = TextValue::tokens({"5", "1"});
    r.loc_loss = 0.6;
    r.rep_loss = 0.4;
    CHECK_NOTHROW(validate_record(r));
    r.rep_loss = 0.5;
    try {
        validate_record(r);
        FAIL("expected InvariantViolation");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvariantViolation);
    }
}

TEST_CASE("score bound and loss sign are enforced on append") {
    const fs::path path = temp_file("invalid.jsonl");
    TraceSink sink(path.string());
    TelemetryRecord bad_score = record(0, Split::Train, "x", 1.0, 0.5);
    bad_score.score = 1.3;
    CHECK_THROWS_AS(sink.append(bad_score), Error);
    TelemetryRecord bad_loss = record(0, Split::Train, "x", -1.0, 0.5);
    CHECK_THROWS_AS(sink.append(bad_loss), Error);
}

TEST_CASE("read_trace groups and detects ragged epochs") {
    const fs::path path = temp_file("ragged.jsonl");
    {
        TraceSink sink(path.string());
        for (std::size_t epoch = 0; epoch < 2; ++epoch) {
            for (const auto& id : {"a", "b", "c"}) {
                if (epoch == 1 && std::string(id) == "b") continue; // missing sample
                sink.append(record(epoch, Split::Train, id, 0.5, 0.5));
            }
        }
    }
    try {
        read_trace(path.string());
        FAIL("expected RaggedEpochs");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::RaggedEpochs);
    }
}

TEST_CASE("empty trace file reads as an empty trace") {
    const fs::path path = temp_file("empty.jsonl");
    std::ofstream(path).close();
    const RunTrace trace = read_trace(path.string());
    CHECK(trace.epoch_count() == 0);
    CHECK(trace.record_count() == 0);
}

TEST_CASE("epoch_slice is ordered, stable and a partition") {
    const fs::path path = temp_file("slices.jsonl");
    {
        TraceSink sink(path.string());
        for (std::size_t epoch = 0; epoch < 2; ++epoch) {
            for (const auto& id : {"c", "a", "b"}) {
                sink.append(record(epoch, Split::Train, id, 0.5, 0.5));
                sink.append(record(epoch, Split::Heldout, id, 0.5, 0.5));
            }
        }
    }
    const RunTrace trace = read_trace(path.string());
    const auto slice = trace.epoch_slice(0, Split::Train);
    REQUIRE(slice.size() == 3);
    CHECK(slice[0]->sample_id == "a");
    CHECK(slice[1]->sample_id == "b");
    CHECK(slice[2]->sample_id == "c");

    const auto again = trace.epoch_slice(0, Split::Train);
    for (std::size_t i = 0; i < slice.size(); ++i) CHECK(slice[i] == again[i]);

    std::size_t covered = 0;
    for (std::size_t epoch = 0; epoch < trace.epoch_count(); ++epoch) {
        covered += trace.epoch_slice(epoch, Split::Train).size();
        covered += trace.epoch_slice(epoch, Split::Heldout).size();
    }
    CHECK(covered == trace.record_count());

    try {
        trace.epoch_slice(5, Split::Train);
        FAIL("expected OutOfRange");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::OutOfRange);
    }
}

TEST_CASE("trace rejects mixed run ids") {
    const fs::path path = temp_file("mixed.jsonl");
    {
        TraceSink sink(path.string());
        sink.append(record(0, Split::Train, "a", 0.5, 0.5));
        TelemetryRecord other = record(0, Split::Train, "b", 0.5, 0.5);
        other.run_id = "other";
        sink.append(other);
    }
    CHECK_THROWS_AS(read_trace(path.string()), Error);
}
