#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "memgauge/corpus.hpp"
#include "memgauge/telemetry.hpp"

namespace memgauge {

// Sub-token vocabulary. Index 0 is UNK, index 1 is PAD; real entries start
// at 2, ordered by (frequency desc, lexicographic asc) so two builds on the
// same corpus agree exactly.
class Vocab {
public:
    static constexpr std::size_t kUnk = 0;
    static constexpr std::size_t kPad = 1;

    Vocab() = default;
    Vocab(std::vector<std::string> subtokens, std::size_t min_count);

    std::size_t size() const { return index_to_subtoken_.size(); }
    std::size_t min_count() const { return min_count_; }
    std::size_t index_of(const std::string& subtoken) const; // kUnk when absent
    const std::string& subtoken_at(std::size_t index) const;
    const std::vector<std::string>& entries() const { return index_to_subtoken_; }

private:
    std::vector<std::string> index_to_subtoken_;
    std::unordered_map<std::string, std::size_t> subtoken_to_index_;
    std::size_t min_count_ = 1;
};

// Sub-tokens of the sample body (and the query, for code_search) with
// frequency >= min_count. Throws Error{EmptyCorpus} on an empty corpus.
Vocab build_vocab(const Corpus& corpus, std::size_t min_count);

// Body sub-token indices in token order, UNK for out-of-vocab. The target
// label never contributes features. An empty result is treated downstream
// as a PAD-only input.
std::vector<std::size_t> featurize(const Sample& sample, const Vocab& vocab);

struct TrainHyper {
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    double learning_rate = 0.1;
    std::uint64_t seed = 0;
};

// Bag-of-sub-tokens linear softmax classifier: the code vector is the mean
// of the input sub-token embeddings and each class logit is its dot product
// with that class's output-weight row. The embedding dimension d is the
// capacity knob. Handles the method_name and code_search schemas; the
// code_search input is the concatenated query+code sub-token bag.
struct RefModel {
    Task task = Task::MethodName;
    std::size_t dim = 8;
    std::uint64_t seed = 0;
    Vocab vocab;
    std::vector<std::string> classes;   // sorted label catalogue
    std::vector<double> embedding;      // vocab.size() x dim, row-major
    std::vector<double> output_weights; // classes.size() x dim, row-major
    TrainHyper hyper;

    std::size_t parameter_count() const { return dim * (vocab.size() + classes.size()); }
    std::size_t class_index(const std::string& label) const;
};

// Weights initialized uniformly in [-0.05, 0.05] from the seeded generator.
RefModel init_model(Task task, const Vocab& vocab, const std::vector<std::string>& classes,
                    std::size_t dim, std::uint64_t seed);

// Logits for a featurized input; the empty multiset maps to the PAD row.
std::vector<double> forward(const RefModel& model, const std::vector<std::size_t>& features);

// Analytic cross-entropy gradients, exposed for the finite-difference check.
// Returned tables have the same shapes as the model's.
struct Gradients {
    std::vector<double> embedding;
    std::vector<double> output_weights;
    double loss = 0.0;
};

Gradients compute_gradients(const RefModel& model,
                            const std::vector<std::pair<std::vector<std::size_t>, std::size_t>>& batch);

struct RunInfo {
    std::string run_id;
    double noise_rate = 0.0;
    std::string noise_mode;
};

// Mini-batch gradient descent on cross-entropy; single-threaded and fully
// deterministic in (corpus, hyper, seed). After every epoch one
// TelemetryRecord per train and heldout sample is appended (loss, argmax
// prediction, softmax score, correctness). Throws Error{DivergedLoss} on
// the first non-finite loss.
RefModel train(RefModel model, const Corpus& corpus, const Corpus& heldout,
               const TrainHyper& hyper, const RunInfo& info, TraceSink* sink);

struct Prediction {
    std::string label;
    double score = 0.0;
};

// Argmax class with its softmax probability; ties resolve to the lowest
// class index. This is the in-process CSR oracle.
Prediction predict(const RefModel& model, const std::vector<std::string>& tokens);

// Versioned JSON checkpoint: vocab, dimensions, weights (row-major 64-bit
// reals), seed and hyperparameters.
void save_model(const RefModel& model, const std::string& path);
RefModel load_model(const std::string& path);

} // namespace memgauge
