#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "memgauge/errors.hpp"

namespace memgauge {

enum class Split { Train, Heldout };

const char* split_name(Split split);
Split parse_split(const std::string& name);

// A predicted or target output: either a scalar string (a class label, a
// method name) or a token sequence (a docstring). Serialized as a JSON
// string or array respectively.
struct TextValue {
    bool sequence = false;
    std::vector<std::string> parts;

    static TextValue scalar(std::string value) { return {false, {std::move(value)}}; }
    static TextValue tokens(std::vector<std::string> values) { return {true, std::move(values)}; }

    const std::string& as_scalar() const;
    bool operator==(const TextValue&) const = default;
};

// One (run, epoch, split, sample) observation. loc_loss / rep_loss are the
// var_misuse loss components; when both are present the total must equal
// their sum within 1e-9.
//
// var_misuse convention for the prediction fields:
//   predicted = ["<argmax location index>", "<repair mass on correct variable>"]
//   target    = ["<actual location index>", "<1 if buggy else 0>"]
struct TelemetryRecord {
    std::string run_id;
    double noise_rate = 0.0;
    std::string noise_mode;
    std::size_t epoch = 0;
    Split split = Split::Train;
    std::string sample_id;
    double loss = 0.0;
    std::optional<double> loc_loss;
    std::optional<double> rep_loss;
    TextValue predicted;
    double score = 0.0;
    bool correct = false;
    TextValue target;

    bool operator==(const TelemetryRecord&) const = default;
};

// Throws Error{InvariantViolation} when score leaves [0,1], a loss is
// negative or non-finite, or the var_misuse loss sum breaks.
void validate_record(const TelemetryRecord& record);

std::string record_to_json_line(const TelemetryRecord& record);
TelemetryRecord record_from_json_line(const std::string& line, std::size_t line_number);

// Append-only JSONL writer; one flushed line per record.
class TraceSink {
public:
    explicit TraceSink(const std::string& path);
    ~TraceSink();
    TraceSink(const TraceSink&) = delete;
    TraceSink& operator=(const TraceSink&) = delete;

    void append(const TelemetryRecord& record);
    const std::string& path() const { return path_; }

private:
    std::string path_;
    struct Impl;
    Impl* impl_;
};

// A complete run: records grouped by (epoch, split), epochs contiguous from
// 0, and every epoch of a split covering the same sample-id set.
class RunTrace {
public:
    RunTrace() = default;
    explicit RunTrace(std::vector<TelemetryRecord> records);

    const std::string& run_id() const { return run_id_; }
    double noise_rate() const { return noise_rate_; }
    const std::string& noise_mode() const { return noise_mode_; }
    std::size_t epoch_count() const { return epoch_count_; }
    std::size_t record_count() const { return records_.size(); }
    bool has_split(Split split) const;
    const std::vector<std::string>& sample_universe(Split split) const;

    // Records for exactly (epoch, split), ordered by sample id. Throws
    // Error{OutOfRange} past the last epoch.
    std::vector<const TelemetryRecord*> epoch_slice(std::size_t epoch, Split split) const;

private:
    std::vector<TelemetryRecord> records_;
    std::map<std::pair<std::size_t, int>, std::vector<std::size_t>> groups_;
    std::vector<std::string> train_universe_;
    std::vector<std::string> heldout_universe_;
    std::string run_id_;
    std::string noise_mode_;
    double noise_rate_ = 0.0;
    std::size_t epoch_count_ = 0;
};

RunTrace read_trace(const std::string& path);

} // namespace memgauge
