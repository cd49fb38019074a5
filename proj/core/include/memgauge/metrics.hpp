#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "memgauge/telemetry.hpp"

namespace memgauge {

// ---------------------------------------------------------------------------
// prediction scores

// Numerically stable softmax (max subtraction); outputs sum to 1 within
// 1e-12 and the argmax is preserved exactly.
std::vector<double> softmax_probs(const std::vector<double>& logits);

// Mean per-token probability, the sequence-prediction score.
double avg_sequence_score(const std::vector<double>& token_probs);

// Per-candidate probability mass aggregated over each candidate's
// occurrence indices. Occurrence sets must be disjoint and in bounds.
std::map<std::string, double> repair_probability(
    const std::vector<double>& token_probs,
    const std::map<std::string, std::vector<std::size_t>>& occurrence_sets);

// ---------------------------------------------------------------------------
// accuracies

struct F1Stats {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Multiset precision/recall/F1 over sub-tokens of the two names.
F1Stats subtoken_f1(const std::string& predicted_name, const std::string& actual_name);

struct LocRepAccuracy {
    std::optional<double> loc_acc; // empty when the slice has no buggy samples
    std::optional<double> rep_acc;
};

// Buggy-sample fractions: argmax location correct / repair mass >= 0.5.
// Records follow the var_misuse telemetry convention (see telemetry.hpp).
LocRepAccuracy localization_repair_accuracy(const std::vector<const TelemetryRecord*>& records);

// Mean correctness over a (balanced) code_search slice.
double balanced_accuracy(const std::vector<const TelemetryRecord*>& records);

// ---------------------------------------------------------------------------
// smoothed BLEU-4

struct BleuBreakdown {
    double bp = 1.0;          // brevity penalty, exp(min(0, 1 - |ref|/|cand|))
    double precisions[4] = {0, 0, 0, 0};
    double score = 0.0;
};

// Modified n-gram precisions with add-one smoothing for n>1; p1 unsmoothed,
// and p1 = 0 forces score 0. Empty candidate scores 0 (bp reported as 0).
BleuBreakdown smoothed_bleu4(const std::vector<std::string>& candidate,
                             const std::vector<std::string>& reference);

// ---------------------------------------------------------------------------
// losses

inline constexpr double kLogEpsilon = 1e-12;

// -log(probs[actual]) with the probability floored at kLogEpsilon.
double cross_entropy(std::size_t actual_index, const std::vector<double>& probs);

// -(y log p + (1-y) log(1-p)), same floor.
double binary_cross_entropy(int y, double p);

// Gini coefficient of a non-negative loss vector via the O(n log n)
// sorted-prefix formulation; defined as 0 for an all-zero vector.
double gini(const std::vector<double>& losses);

// ---------------------------------------------------------------------------
// trajectory / curve aggregates

struct MetricSeries {
    std::string run_id;
    std::string metric;
    double noise_rate = 0.0;
    std::vector<double> train;   // one value per epoch
    std::vector<double> heldout; // empty when the trace has no heldout split

    bool operator==(const MetricSeries&) const = default;
};

// Per-sample mean score across all epochs of one split, sorted descending.
struct ScoreCurve {
    std::string run_id;
    double noise_rate = 0.0;
    Split split = Split::Heldout;
    std::vector<double> values;

    bool operator==(const ScoreCurve&) const = default;
};

enum class F1Aggregation { Micro, Macro };

// Per-epoch Gini of the loss vector, train and heldout separately.
MetricSeries gini_trajectory(const RunTrace& trace);

// Per-epoch sub-token F1 of predicted vs target names. Micro pools tp/fp/fn
// over the slice; Macro averages per-sample F1.
MetricSeries f1_trajectory(const RunTrace& trace, F1Aggregation aggregation = F1Aggregation::Micro);

// Per-epoch mean correctness.
MetricSeries accuracy_trajectory(const RunTrace& trace);

// Per-epoch mean smoothed BLEU-4 of predicted vs target token sequences.
MetricSeries bleu_trajectory(const RunTrace& trace);

// Per-epoch localization / repair accuracy over buggy samples (two series).
std::pair<MetricSeries, MetricSeries> loc_rep_trajectory(const RunTrace& trace);

ScoreCurve score_curve(const RunTrace& trace, Split split);

} // namespace memgauge
