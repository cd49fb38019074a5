#include "memgauge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include "memgauge/subtoken.hpp"

namespace memgauge {

std::vector<double> softmax_probs(const std::vector<double>& logits) {
    if (logits.empty()) throw Error(ErrorKind::EmptySequence, "softmax of empty logits");
    double max_logit = logits.front();
    for (double z : logits) {
        if (!std::isfinite(z)) throw Error(ErrorKind::NonFiniteInput, "non-finite logit");
        max_logit = std::max(max_logit, z);
    }
    std::vector<double> probs(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - max_logit);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

double avg_sequence_score(const std::vector<double>& token_probs) {
    if (token_probs.empty()) throw Error(ErrorKind::EmptySequence, "mean of empty score sequence");
    return std::accumulate(token_probs.begin(), token_probs.end(), 0.0) /
           static_cast<double>(token_probs.size());
}

std::map<std::string, double> repair_probability(
    const std::vector<double>& token_probs,
    const std::map<std::string, std::vector<std::size_t>>& occurrence_sets) {
    for (double p : token_probs) {
        if (!std::isfinite(p) || p < 0.0 || p > 1.0)
            throw Error(ErrorKind::NonFiniteInput, "token probability outside [0,1]");
    }
    std::vector<bool> seen(token_probs.size(), false);
    std::map<std::string, double> out;
    for (const auto& [candidate, indices] : occurrence_sets) {
        double mass = 0.0;
        for (std::size_t idx : indices) {
            if (idx >= token_probs.size())
                throw Error(ErrorKind::IndexOutOfBounds,
                            "occurrence " + std::to_string(idx) + " of '" + candidate + "'");
            if (seen[idx])
                throw Error(ErrorKind::OverlappingOccurrences,
                            "index " + std::to_string(idx) + " claimed twice");
            seen[idx] = true;
            mass += token_probs[idx];
        }
        out[candidate] = mass;
    }
    return out;
}

// ---------------------------------------------------------------------------

F1Stats subtoken_f1(const std::string& predicted_name, const std::string& actual_name) {
    if (predicted_name.empty() || actual_name.empty())
        throw Error(ErrorKind::EmptyName, "sub-token F1 of an empty name");
    std::unordered_map<std::string, std::size_t> actual_counts;
    for (const auto& sub : split_subtokens(actual_name)) ++actual_counts[sub];

    std::size_t tp = 0;
    std::size_t predicted_total = 0;
    std::size_t actual_total = 0;
    for (const auto& [sub, count] : actual_counts) actual_total += count;
    for (const auto& sub : split_subtokens(predicted_name)) {
        ++predicted_total;
        auto it = actual_counts.find(sub);
        if (it != actual_counts.end() && it->second > 0) {
            --it->second;
            ++tp;
        }
    }

    F1Stats stats;
    stats.precision = predicted_total ? static_cast<double>(tp) / static_cast<double>(predicted_total) : 0.0;
    stats.recall = actual_total ? static_cast<double>(tp) / static_cast<double>(actual_total) : 0.0;
    const double denom = stats.precision + stats.recall;
    stats.f1 = denom > 0.0 ? 2.0 * stats.precision * stats.recall / denom : 0.0;
    return stats;
}

namespace {

// var_misuse telemetry convention: predicted = [loc, repair mass],
// target = [loc, buggy flag].
struct VarMisuseFields {
    std::size_t predicted_location;
    double repair_mass;
    std::size_t actual_location;
    bool buggy;
};

VarMisuseFields parse_var_misuse(const TelemetryRecord& record) {
    auto fail = [&](const std::string& what) {
        throw Error(ErrorKind::SchemaViolation,
                    "var_misuse record '" + record.sample_id + "': " + what);
    };
    if (record.predicted.parts.size() != 2 || record.target.parts.size() != 2)
        fail("predicted/target must carry [location, mass] / [location, buggy]");
    VarMisuseFields f{};
    try {
        f.predicted_location = std::stoul(record.predicted.parts[0]);
        f.repair_mass = std::stod(record.predicted.parts[1]);
        f.actual_location = std::stoul(record.target.parts[0]);
    } catch (const std::exception&) {
        fail("non-numeric location or mass");
    }
    const std::string& flag = record.target.parts[1];
    if (flag != "0" && flag != "1") fail("buggy flag must be 0 or 1");
    f.buggy = flag == "1";
    return f;
}

} // namespace

LocRepAccuracy localization_repair_accuracy(const std::vector<const TelemetryRecord*>& records) {
    std::size_t buggy = 0;
    std::size_t loc_hits = 0;
    std::size_t rep_hits = 0;
    for (const auto* record : records) {
        const auto f = parse_var_misuse(*record);
        if (!f.buggy) continue;
        ++buggy;
        if (f.predicted_location == f.actual_location) ++loc_hits;
        if (f.repair_mass >= 0.5) ++rep_hits; // ">= half the probability mass" is inclusive
    }
    LocRepAccuracy out;
    if (buggy > 0) {
        out.loc_acc = static_cast<double>(loc_hits) / static_cast<double>(buggy);
        out.rep_acc = static_cast<double>(rep_hits) / static_cast<double>(buggy);
    }
    return out;
}

double balanced_accuracy(const std::vector<const TelemetryRecord*>& records) {
    if (records.empty()) throw Error(ErrorKind::EmptySlice, "accuracy of an empty slice");
    std::size_t hits = 0;
    for (const auto* record : records) hits += record->correct ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(records.size());
}

// ---------------------------------------------------------------------------

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const std::vector<std::string>& tokens, std::size_t n) {
    NgramCounts counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                          tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
    }
    return counts;
}

} // namespace

BleuBreakdown smoothed_bleu4(const std::vector<std::string>& candidate,
                             const std::vector<std::string>& reference) {
    if (reference.empty()) throw Error(ErrorKind::EmptyReference, "BLEU against an empty reference");
    BleuBreakdown out;
    if (candidate.empty()) {
        out.bp = 0.0;
        for (double& p : out.precisions) p = 0.0;
        out.score = 0.0;
        return out;
    }
    out.bp = std::exp(std::min(
        0.0, 1.0 - static_cast<double>(reference.size()) / static_cast<double>(candidate.size())));

    double log_sum = 0.0;
    bool zero = false;
    for (std::size_t n = 1; n <= 4; ++n) {
        const auto cand_counts = count_ngrams(candidate, n);
        const auto ref_counts = count_ngrams(reference, n);
        std::size_t clipped = 0;
        std::size_t total = 0;
        for (const auto& [gram, count] : cand_counts) {
            total += count;
            auto it = ref_counts.find(gram);
            if (it != ref_counts.end()) clipped += std::min(count, it->second);
        }
        double p;
        if (n == 1) {
            p = total ? static_cast<double>(clipped) / static_cast<double>(total) : 0.0;
        } else {
            p = static_cast<double>(clipped + 1) / static_cast<double>(total + 1);
        }
        out.precisions[n - 1] = p;
        if (p <= 0.0) {
            zero = true;
        } else {
            log_sum += std::log(p);
        }
    }
    out.score = zero ? 0.0 : out.bp * std::exp(0.25 * log_sum);
    return out;
}

// ---------------------------------------------------------------------------

double cross_entropy(std::size_t actual_index, const std::vector<double>& probs) {
    if (actual_index >= probs.size())
        throw Error(ErrorKind::IndexOutOfBounds,
                    "class " + std::to_string(actual_index) + " of " + std::to_string(probs.size()));
    return -std::log(std::max(probs[actual_index], kLogEpsilon));
}

double binary_cross_entropy(int y, double p) {
    const double on = std::max(p, kLogEpsilon);
    const double off = std::max(1.0 - p, kLogEpsilon);
    return y ? -std::log(on) : -std::log(off);
}

double gini(const std::vector<double>& losses) {
    if (losses.empty()) throw Error(ErrorKind::EmptySequence, "Gini of an empty vector");
    for (double x : losses) {
        if (!std::isfinite(x)) throw Error(ErrorKind::NonFiniteInput, "non-finite loss");
        if (x < 0.0) throw Error(ErrorKind::NegativeLoss, "negative loss");
    }
    std::vector<double> sorted = losses;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    double total = 0.0;
    double weighted = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total += sorted[i];
        // sum_{i,j} |x_i - x_j| = 2 * sum_i (2i - n + 1) * x_(i), 0-based ascending
        weighted += (2.0 * static_cast<double>(i) - static_cast<double>(n) + 1.0) * sorted[i];
    }
    if (total == 0.0) return 0.0; // all-zero losses: perfect equality by convention
    return weighted / (static_cast<double>(n) * total);
}

// ---------------------------------------------------------------------------

namespace {

MetricSeries make_series(const RunTrace& trace, std::string metric) {
    MetricSeries series;
    series.run_id = trace.run_id();
    series.metric = std::move(metric);
    series.noise_rate = trace.noise_rate();
    return series;
}

template <typename Fn>
MetricSeries per_epoch(const RunTrace& trace, std::string metric, Fn&& slice_value) {
    MetricSeries series = make_series(trace, std::move(metric));
    for (std::size_t epoch = 0; epoch < trace.epoch_count(); ++epoch) {
        if (trace.has_split(Split::Train))
            series.train.push_back(slice_value(trace.epoch_slice(epoch, Split::Train)));
        if (trace.has_split(Split::Heldout))
            series.heldout.push_back(slice_value(trace.epoch_slice(epoch, Split::Heldout)));
    }
    return series;
}

} // namespace

MetricSeries gini_trajectory(const RunTrace& trace) {
    return per_epoch(trace, "gini_loss", [](const auto& slice) {
        std::vector<double> losses;
        losses.reserve(slice.size());
        for (const auto* record : slice) losses.push_back(record->loss);
        return gini(losses);
    });
}

MetricSeries f1_trajectory(const RunTrace& trace, F1Aggregation aggregation) {
    const bool micro = aggregation == F1Aggregation::Micro;
    return per_epoch(trace, micro ? "f1" : "f1_macro", [micro](const auto& slice) {
        if (micro) {
            std::size_t tp = 0, fp = 0, fn = 0;
            for (const auto* record : slice) {
                std::unordered_map<std::string, std::size_t> actual_counts;
                for (const auto& sub : split_subtokens(record->target.as_scalar()))
                    ++actual_counts[sub];
                std::size_t actual_total = 0;
                for (const auto& [sub, count] : actual_counts) actual_total += count;
                std::size_t hits = 0, predicted_total = 0;
                for (const auto& sub : split_subtokens(record->predicted.as_scalar())) {
                    ++predicted_total;
                    auto it = actual_counts.find(sub);
                    if (it != actual_counts.end() && it->second > 0) {
                        --it->second;
                        ++hits;
                    }
                }
                tp += hits;
                fp += predicted_total - hits;
                fn += actual_total - hits;
            }
            const double p = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
            const double r = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
            return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        }
        double sum = 0.0;
        for (const auto* record : slice)
            sum += subtoken_f1(record->predicted.as_scalar(), record->target.as_scalar()).f1;
        return slice.empty() ? 0.0 : sum / static_cast<double>(slice.size());
    });
}

MetricSeries accuracy_trajectory(const RunTrace& trace) {
    return per_epoch(trace, "accuracy",
                     [](const auto& slice) { return balanced_accuracy(slice); });
}

MetricSeries bleu_trajectory(const RunTrace& trace) {
    return per_epoch(trace, "bleu4", [](const auto& slice) {
        double sum = 0.0;
        for (const auto* record : slice)
            sum += smoothed_bleu4(record->predicted.parts, record->target.parts).score;
        return slice.empty() ? 0.0 : sum / static_cast<double>(slice.size());
    });
}

std::pair<MetricSeries, MetricSeries> loc_rep_trajectory(const RunTrace& trace) {
    MetricSeries loc = make_series(trace, "loc_acc");
    MetricSeries rep = make_series(trace, "rep_acc");
    for (std::size_t epoch = 0; epoch < trace.epoch_count(); ++epoch) {
        for (Split split : {Split::Train, Split::Heldout}) {
            if (!trace.has_split(split)) continue;
            const auto acc = localization_repair_accuracy(trace.epoch_slice(epoch, split));
            auto& loc_values = split == Split::Train ? loc.train : loc.heldout;
            auto& rep_values = split == Split::Train ? rep.train : rep.heldout;
            loc_values.push_back(acc.loc_acc.value_or(0.0));
            rep_values.push_back(acc.rep_acc.value_or(0.0));
        }
    }
    return {std::move(loc), std::move(rep)};
}

ScoreCurve score_curve(const RunTrace& trace, Split split) {
    if (!trace.has_split(split) || trace.epoch_count() == 0)
        throw Error(ErrorKind::EmptySplit,
                    std::string("no ") + split_name(split) + " records in trace");
    std::unordered_map<std::string, double> sums;
    for (std::size_t epoch = 0; epoch < trace.epoch_count(); ++epoch) {
        for (const auto* record : trace.epoch_slice(epoch, split))
            sums[record->sample_id] += record->score;
    }
    ScoreCurve curve;
    curve.run_id = trace.run_id();
    curve.noise_rate = trace.noise_rate();
    curve.split = split;
    curve.values.reserve(sums.size());
    for (const auto& [id, sum] : sums)
        curve.values.push_back(sum / static_cast<double>(trace.epoch_count()));
    std::sort(curve.values.begin(), curve.values.end(), std::greater<>());
    return curve;
}

} // namespace memgauge
