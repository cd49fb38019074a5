#include "memgauge/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "json_util.hpp"

namespace memgauge {

const char* split_name(Split split) {
    return split == Split::Train ? "train" : "heldout";
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "heldout") return Split::Heldout;
    throw Error(ErrorKind::SchemaViolation, "unknown split '" + name + "'");
}

const std::string& TextValue::as_scalar() const {
    static const std::string empty;
    return parts.empty() ? empty : parts.front();
}

void validate_record(const TelemetryRecord& record) {
    auto fail = [&](const std::string& what) {
        throw Error(ErrorKind::InvariantViolation,
                    "record (" + record.run_id + ", epoch " + std::to_string(record.epoch) + ", " +
                        record.sample_id + "): " + what);
    };
    if (!std::isfinite(record.score) || record.score < 0.0 || record.score > 1.0)
        fail("score outside [0,1]");
    if (!std::isfinite(record.loss) || record.loss < 0.0) fail("loss negative or non-finite");
    if (record.noise_rate < 0.0 || record.noise_rate > 1.0) fail("noise_rate outside [0,1]");
    for (const auto& part : {record.loc_loss, record.rep_loss}) {
        if (part && (!std::isfinite(*part) || *part < 0.0)) fail("loss component negative or non-finite");
    }
    if (record.loc_loss && record.rep_loss &&
        std::abs(record.loss - (*record.loc_loss + *record.rep_loss)) > 1e-9)
        fail("loss != loc_loss + rep_loss");
    if (record.sample_id.empty()) fail("empty sample_id");
}

namespace {

void append_text_value(std::string& out, const TextValue& value) {
    if (value.sequence) {
        detail::append_json_string_array(out, value.parts);
    } else {
        detail::append_json_string(out, value.parts.empty() ? std::string() : value.parts.front());
    }
}

} // namespace

// Hand-rolled emitter: field order is the wire format and doubles carry 17
// significant digits so append/read round-trips exactly.
std::string record_to_json_line(const TelemetryRecord& record) {
    std::string out;
    out.reserve(192);
    out += "{\"run_id\":";
    detail::append_json_string(out, record.run_id);
    out += ",\"noise_rate\":";
    out += detail::format_double17(record.noise_rate);
    out += ",\"noise_mode\":";
    detail::append_json_string(out, record.noise_mode);
    out += ",\"epoch\":";
    out += std::to_string(record.epoch);
    out += ",\"split\":";
    detail::append_json_string(out, split_name(record.split));
    out += ",\"sample_id\":";
    detail::append_json_string(out, record.sample_id);
    out += ",\"loss\":";
    out += detail::format_double17(record.loss);
    if (record.loc_loss) {
        out += ",\"loc_loss\":";
        out += detail::format_double17(*record.loc_loss);
    }
    if (record.rep_loss) {
        out += ",\"rep_loss\":";
        out += detail::format_double17(*record.rep_loss);
    }
    out += ",\"predicted\":";
    append_text_value(out, record.predicted);
    out += ",\"score\":";
    out += detail::format_double17(record.score);
    out += ",\"correct\":";
    out += record.correct ? "true" : "false";
    out += ",\"target\":";
    append_text_value(out, record.target);
    out += "}";
    return out;
}

namespace {

TextValue text_value_from_json(const nlohmann::json& j, const std::string& field,
                               std::size_t line_number) {
    if (j.is_string()) return TextValue::scalar(j.get<std::string>());
    if (j.is_array()) {
        std::vector<std::string> parts;
        for (const auto& item : j) {
            if (!item.is_string())
                throw Error(ErrorKind::SchemaViolation,
                            "line " + std::to_string(line_number) + " field '" + field +
                                "': non-string item");
            parts.push_back(item.get<std::string>());
        }
        return TextValue::tokens(std::move(parts));
    }
    throw Error(ErrorKind::SchemaViolation, "line " + std::to_string(line_number) + " field '" +
                                                field + "': expected string or array");
}

} // namespace

TelemetryRecord record_from_json_line(const std::string& line, std::size_t line_number) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
        throw Error(ErrorKind::SchemaViolation,
                    "line " + std::to_string(line_number) + ": " + e.what());
    }
    static const std::set<std::string> known = {"run_id", "noise_rate", "noise_mode", "epoch",
                                                "split",  "sample_id",  "loss",       "loc_loss",
                                                "rep_loss", "predicted", "score",     "correct",
                                                "target"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known.contains(key))
            throw Error(ErrorKind::SchemaViolation,
                        "line " + std::to_string(line_number) + " field '" + key + "': unknown");
    }
    auto require = [&](const char* field) -> const nlohmann::json& {
        if (!j.contains(field))
            throw Error(ErrorKind::SchemaViolation,
                        "line " + std::to_string(line_number) + " field '" + field + "': missing");
        return j.at(field);
    };
    auto number = [&](const nlohmann::json& v, const char* field) -> double {
        if (!v.is_number())
            throw Error(ErrorKind::SchemaViolation,
                        "line " + std::to_string(line_number) + " field '" + std::string(field) +
                            "': not a number");
        return v.get<double>();
    };

    TelemetryRecord record;
    record.run_id = require("run_id").get<std::string>();
    record.noise_rate = number(require("noise_rate"), "noise_rate");
    record.noise_mode = require("noise_mode").get<std::string>();
    const auto& epoch = require("epoch");
    if (!epoch.is_number_unsigned() && !(epoch.is_number_integer() && epoch.get<long long>() >= 0))
        throw Error(ErrorKind::SchemaViolation,
                    "line " + std::to_string(line_number) + " field 'epoch': not a non-negative integer");
    record.epoch = epoch.get<std::size_t>();
    record.split = parse_split(require("split").get<std::string>());
    record.sample_id = require("sample_id").get<std::string>();
    record.loss = number(require("loss"), "loss");
    if (j.contains("loc_loss") && !j.at("loc_loss").is_null())
        record.loc_loss = number(j.at("loc_loss"), "loc_loss");
    if (j.contains("rep_loss") && !j.at("rep_loss").is_null())
        record.rep_loss = number(j.at("rep_loss"), "rep_loss");
    record.predicted = text_value_from_json(require("predicted"), "predicted", line_number);
    record.score = number(require("score"), "score");
    if (!require("correct").is_boolean())
        throw Error(ErrorKind::SchemaViolation,
                    "line " + std::to_string(line_number) + " field 'correct': not a boolean");
    record.correct = j.at("correct").get<bool>();
    record.target = text_value_from_json(require("target"), "target", line_number);

    try {
        validate_record(record);
    } catch (const Error& e) {
        throw Error(ErrorKind::InvariantViolation,
                    "line " + std::to_string(line_number) + ": " + e.what());
    }
    return record;
}

// ---------------------------------------------------------------------------
// sink

struct TraceSink::Impl {
    std::ofstream out;
};

TraceSink::TraceSink(const std::string& path) : path_(path), impl_(new Impl) {
    impl_->out.open(path, std::ios::binary | std::ios::trunc);
    if (!impl_->out) {
        delete impl_;
        throw Error(ErrorKind::IoFailure, "cannot open trace '" + path + "' for writing");
    }
}

TraceSink::~TraceSink() { delete impl_; }

void TraceSink::append(const TelemetryRecord& record) {
    validate_record(record);
    impl_->out << record_to_json_line(record) << '\n';
    impl_->out.flush();
    if (!impl_->out) throw Error(ErrorKind::IoFailure, "write error on trace '" + path_ + "'");
}

// ---------------------------------------------------------------------------
// trace

RunTrace::RunTrace(std::vector<TelemetryRecord> records) : records_(std::move(records)) {
    if (records_.empty()) return;
    run_id_ = records_.front().run_id;
    noise_rate_ = records_.front().noise_rate;
    noise_mode_ = records_.front().noise_mode;

    std::map<std::pair<std::size_t, int>, std::set<std::string>> id_sets;
    std::size_t max_epoch = 0;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& r = records_[i];
        if (r.run_id != run_id_)
            throw Error(ErrorKind::SchemaViolation,
                        "trace mixes run ids '" + run_id_ + "' and '" + r.run_id + "'");
        const auto key = std::make_pair(r.epoch, static_cast<int>(r.split));
        groups_[key].push_back(i);
        if (!id_sets[key].insert(r.sample_id).second)
            throw Error(ErrorKind::RaggedEpochs, "duplicate sample '" + r.sample_id + "' in epoch " +
                                                     std::to_string(r.epoch) + " " +
                                                     split_name(r.split));
        max_epoch = std::max(max_epoch, r.epoch);
    }
    epoch_count_ = max_epoch + 1;

    for (int split = 0; split < 2; ++split) {
        const std::set<std::string>* reference = nullptr;
        std::size_t covered = 0;
        for (std::size_t epoch = 0; epoch < epoch_count_; ++epoch) {
            auto it = id_sets.find({epoch, split});
            if (it == id_sets.end()) continue;
            ++covered;
            if (!reference) {
                reference = &it->second;
            } else if (*reference != it->second) {
                throw Error(ErrorKind::RaggedEpochs,
                            std::string(split_name(static_cast<Split>(split))) +
                                " sample set differs at epoch " + std::to_string(epoch));
            }
        }
        if (reference && covered != epoch_count_)
            throw Error(ErrorKind::RaggedEpochs,
                        std::string(split_name(static_cast<Split>(split))) +
                            " split missing from some epochs");
        if (reference) {
            auto& universe = split == 0 ? train_universe_ : heldout_universe_;
            universe.assign(reference->begin(), reference->end());
        }
    }

    // stable sample-id order within each slice
    for (auto& [key, indices] : groups_) {
        std::sort(indices.begin(), indices.end(), [&](std::size_t a, std::size_t b) {
            return records_[a].sample_id < records_[b].sample_id;
        });
    }
}

bool RunTrace::has_split(Split split) const {
    const auto& universe = split == Split::Train ? train_universe_ : heldout_universe_;
    return !universe.empty();
}

const std::vector<std::string>& RunTrace::sample_universe(Split split) const {
    return split == Split::Train ? train_universe_ : heldout_universe_;
}

std::vector<const TelemetryRecord*> RunTrace::epoch_slice(std::size_t epoch, Split split) const {
    if (epoch >= epoch_count_)
        throw Error(ErrorKind::OutOfRange, "epoch " + std::to_string(epoch) + " of a " +
                                               std::to_string(epoch_count_) + "-epoch trace");
    std::vector<const TelemetryRecord*> slice;
    auto it = groups_.find({epoch, static_cast<int>(split)});
    if (it == groups_.end()) return slice;
    slice.reserve(it->second.size());
    for (std::size_t idx : it->second) slice.push_back(&records_[idx]);
    return slice;
}

RunTrace read_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open trace '" + path + "'");
    std::vector<TelemetryRecord> records;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        records.push_back(record_from_json_line(line, line_number));
    }
    if (in.bad()) throw Error(ErrorKind::IoFailure, "read error on trace '" + path + "'");
    return RunTrace(std::move(records));
}

} // namespace memgauge
