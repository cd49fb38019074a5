#include "memgauge/refmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "memgauge/metrics.hpp"
#include "memgauge/rng.hpp"
#include "memgauge/subtoken.hpp"

namespace memgauge {

Vocab::Vocab(std::vector<std::string> subtokens, std::size_t min_count)
    : min_count_(min_count) {
    index_to_subtoken_.reserve(subtokens.size() + 2);
    index_to_subtoken_.push_back("<UNK>");
    index_to_subtoken_.push_back("<PAD>");
    for (auto& sub : subtokens) index_to_subtoken_.push_back(std::move(sub));
    subtoken_to_index_.reserve(index_to_subtoken_.size());
    for (std::size_t i = 2; i < index_to_subtoken_.size(); ++i)
        subtoken_to_index_.emplace(index_to_subtoken_[i], i);
}

std::size_t Vocab::index_of(const std::string& subtoken) const {
    auto it = subtoken_to_index_.find(subtoken);
    return it == subtoken_to_index_.end() ? kUnk : it->second;
}

const std::string& Vocab::subtoken_at(std::size_t index) const {
    if (index >= index_to_subtoken_.size())
        throw Error(ErrorKind::IndexOutOfVocab, "index " + std::to_string(index));
    return index_to_subtoken_[index];
}

Vocab build_vocab(const Corpus& corpus, std::size_t min_count) {
    if (corpus.samples.empty()) throw Error(ErrorKind::EmptyCorpus, "cannot build a vocabulary");
    std::map<std::string, std::size_t> counts;
    for (const auto& sample : corpus.samples) {
        for (const auto& token : sample.tokens) {
            for (const auto& sub : split_subtokens(token)) ++counts[sub];
        }
        for (const auto& token : sample.query_tokens) {
            for (const auto& sub : split_subtokens(token)) ++counts[sub];
        }
    }
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (const auto& [sub, count] : counts) {
        if (count >= min_count) kept.emplace_back(sub, count);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> subtokens;
    subtokens.reserve(kept.size());
    for (auto& [sub, count] : kept) subtokens.push_back(std::move(sub));
    return Vocab(std::move(subtokens), min_count);
}

std::vector<std::size_t> featurize(const Sample& sample, const Vocab& vocab) {
    std::vector<std::size_t> features;
    features.reserve(sample.tokens.size() + sample.query_tokens.size());
    auto add = [&](const std::vector<std::string>& tokens) {
        for (const auto& token : tokens) {
            for (const auto& sub : split_subtokens(token)) features.push_back(vocab.index_of(sub));
        }
    };
    add(sample.query_tokens);
    add(sample.tokens);
    return features;
}

std::size_t RefModel::class_index(const std::string& label) const {
    auto it = std::lower_bound(classes.begin(), classes.end(), label);
    if (it == classes.end() || *it != label)
        throw Error(ErrorKind::TaskMismatch, "label '" + label + "' not in the model's catalogue");
    return static_cast<std::size_t>(it - classes.begin());
}

RefModel init_model(Task task, const Vocab& vocab, const std::vector<std::string>& classes,
                    std::size_t dim, std::uint64_t seed) {
    if (classes.empty()) throw Error(ErrorKind::EmptyCorpus, "no classes to model");
    RefModel model;
    model.task = task;
    model.dim = dim;
    model.seed = seed;
    model.vocab = vocab;
    model.classes = classes;
    std::sort(model.classes.begin(), model.classes.end());
    Rng rng(seed);
    model.embedding.resize(vocab.size() * dim);
    for (double& w : model.embedding) w = rng.uniform(-0.05, 0.05);
    model.output_weights.resize(model.classes.size() * dim);
    for (double& w : model.output_weights) w = rng.uniform(-0.05, 0.05);
    return model;
}

namespace {

// Mean embedding of the feature multiset; PAD row for an empty input.
std::vector<double> code_vector(const RefModel& model, const std::vector<std::size_t>& features) {
    std::vector<double> mean(model.dim, 0.0);
    if (features.empty()) {
        const double* pad = &model.embedding[Vocab::kPad * model.dim];
        mean.assign(pad, pad + model.dim);
        return mean;
    }
    for (std::size_t f : features) {
        if (f >= model.vocab.size())
            throw Error(ErrorKind::IndexOutOfVocab, "feature index " + std::to_string(f));
        const double* row = &model.embedding[f * model.dim];
        for (std::size_t k = 0; k < model.dim; ++k) mean[k] += row[k];
    }
    const double inv = 1.0 / static_cast<double>(features.size());
    for (double& v : mean) v *= inv;
    return mean;
}

} // namespace

std::vector<double> forward(const RefModel& model, const std::vector<std::size_t>& features) {
    const std::vector<double> mean = code_vector(model, features);
    std::vector<double> logits(model.classes.size(), 0.0);
    for (std::size_t c = 0; c < model.classes.size(); ++c) {
        const double* row = &model.output_weights[c * model.dim];
        double dot = 0.0;
        for (std::size_t k = 0; k < model.dim; ++k) dot += row[k] * mean[k];
        logits[c] = dot;
    }
    return logits;
}

Gradients compute_gradients(
    const RefModel& model,
    const std::vector<std::pair<std::vector<std::size_t>, std::size_t>>& batch) {
    Gradients grads;
    grads.embedding.assign(model.embedding.size(), 0.0);
    grads.output_weights.assign(model.output_weights.size(), 0.0);
    if (batch.empty()) return grads;

    const std::size_t dim = model.dim;
    std::vector<double> delta(model.classes.size());
    std::vector<double> back(dim);
    for (const auto& [features, label] : batch) {
        const std::vector<double> mean = code_vector(model, features);
        std::vector<double> logits(model.classes.size(), 0.0);
        for (std::size_t c = 0; c < model.classes.size(); ++c) {
            const double* row = &model.output_weights[c * dim];
            for (std::size_t k = 0; k < dim; ++k) logits[c] += row[k] * mean[k];
        }
        const std::vector<double> probs = softmax_probs(logits);
        grads.loss += cross_entropy(label, probs);

        for (std::size_t c = 0; c < model.classes.size(); ++c)
            delta[c] = probs[c] - (c == label ? 1.0 : 0.0);
        for (std::size_t c = 0; c < model.classes.size(); ++c) {
            double* grow = &grads.output_weights[c * dim];
            for (std::size_t k = 0; k < dim; ++k) grow[k] += delta[c] * mean[k];
        }
        std::fill(back.begin(), back.end(), 0.0);
        for (std::size_t c = 0; c < model.classes.size(); ++c) {
            const double* row = &model.output_weights[c * dim];
            for (std::size_t k = 0; k < dim; ++k) back[k] += delta[c] * row[k];
        }
        if (features.empty()) {
            double* grow = &grads.embedding[Vocab::kPad * dim];
            for (std::size_t k = 0; k < dim; ++k) grow[k] += back[k];
        } else {
            const double inv = 1.0 / static_cast<double>(features.size());
            for (std::size_t f : features) {
                double* grow = &grads.embedding[f * dim];
                for (std::size_t k = 0; k < dim; ++k) grow[k] += back[k] * inv;
            }
        }
    }
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    for (double& g : grads.embedding) g *= inv_batch;
    for (double& g : grads.output_weights) g *= inv_batch;
    grads.loss *= inv_batch;
    return grads;
}

namespace {

struct EvalResult {
    double loss;
    std::size_t predicted;
    double score;
};

EvalResult evaluate(const RefModel& model, const std::vector<std::size_t>& features,
                    std::size_t label) {
    const std::vector<double> probs = softmax_probs(forward(model, features));
    EvalResult r{};
    r.loss = cross_entropy(label, probs);
    r.predicted = 0;
    for (std::size_t c = 1; c < probs.size(); ++c) {
        if (probs[c] > probs[r.predicted]) r.predicted = c; // ties keep the lowest index
    }
    r.score = probs[r.predicted];
    return r;
}

} // namespace

RefModel train(RefModel model, const Corpus& corpus, const Corpus& heldout,
               const TrainHyper& hyper, const RunInfo& info, TraceSink* sink) {
    if (corpus.task != model.task || heldout.task != model.task)
        throw Error(ErrorKind::TaskMismatch, "train/heldout task differs from the model's");
    if (corpus.samples.empty()) throw Error(ErrorKind::EmptyCorpus, "empty training corpus");
    model.hyper = hyper;

    struct Prepared {
        std::vector<std::size_t> features;
        std::size_t label;
        const std::string* id;
        const std::string* label_text;
    };
    auto prepare = [&](const Corpus& c) {
        std::vector<Prepared> out;
        out.reserve(c.samples.size());
        for (const auto& sample : c.samples) {
            out.push_back({featurize(sample, model.vocab), model.class_index(sample.target_label),
                           &sample.id, &sample.target_label});
        }
        return out;
    };
    const std::vector<Prepared> train_set = prepare(corpus);
    const std::vector<Prepared> heldout_set = prepare(heldout);

    const std::size_t batch_size = std::max<std::size_t>(hyper.batch_size, 1);
    Rng rng(hyper.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<std::pair<std::vector<std::size_t>, std::size_t>> batch;
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t stop = std::min(start + batch_size, order.size());
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) {
                batch.emplace_back(train_set[order[i]].features, train_set[order[i]].label);
            }
            const Gradients grads = compute_gradients(model, batch);
            if (!std::isfinite(grads.loss))
                throw Error(ErrorKind::DivergedLoss,
                            "non-finite batch loss at epoch " + std::to_string(epoch));
            for (std::size_t i = 0; i < model.embedding.size(); ++i)
                model.embedding[i] -= hyper.learning_rate * grads.embedding[i];
            for (std::size_t i = 0; i < model.output_weights.size(); ++i)
                model.output_weights[i] -= hyper.learning_rate * grads.output_weights[i];
        }

        if (!sink) continue;
        auto emit = [&](const std::vector<Prepared>& set, Split split) {
            for (const auto& prepared : set) {
                const EvalResult r = evaluate(model, prepared.features, prepared.label);
                if (!std::isfinite(r.loss))
                    throw Error(ErrorKind::DivergedLoss,
                                "non-finite loss for '" + *prepared.id + "'");
                TelemetryRecord record;
                record.run_id = info.run_id;
                record.noise_rate = info.noise_rate;
                record.noise_mode = info.noise_mode;
                record.epoch = epoch;
                record.split = split;
                record.sample_id = *prepared.id;
                record.loss = r.loss;
                record.predicted = TextValue::scalar(model.classes[r.predicted]);
                record.score = r.score;
                record.correct = r.predicted == prepared.label;
                record.target = TextValue::scalar(*prepared.label_text);
                sink->append(record);
            }
        };
        emit(train_set, Split::Train);
        emit(heldout_set, Split::Heldout);
    }
    return model;
}

Prediction predict(const RefModel& model, const std::vector<std::string>& tokens) {
    Sample probe;
    probe.tokens = tokens;
    const std::vector<double> probs = softmax_probs(forward(model, featurize(probe, model.vocab)));
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.size(); ++c) {
        if (probs[c] > probs[best]) best = c;
    }
    return {model.classes[best], probs[best]};
}

// ---------------------------------------------------------------------------
// checkpoint

void save_model(const RefModel& model, const std::string& path) {
    nlohmann::ordered_json j;
    j["format_version"] = 1;
    j["task"] = task_name(model.task);
    j["dim"] = model.dim;
    j["seed"] = model.seed;
    j["hyper"] = {{"epochs", model.hyper.epochs},
                  {"batch_size", model.hyper.batch_size},
                  {"learning_rate", model.hyper.learning_rate},
                  {"seed", model.hyper.seed}};
    j["classes"] = model.classes;
    j["min_count"] = model.vocab.min_count();
    std::vector<std::string> entries(model.vocab.entries().begin() + 2, model.vocab.entries().end());
    j["vocab"] = entries;
    j["embedding"] = model.embedding;
    j["output_weights"] = model.output_weights;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot open '" + path + "' for writing");
    out << j.dump() << '\n';
    if (!out) throw Error(ErrorKind::IoFailure, "write error on '" + path + "'");
}

RefModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open model '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const std::exception& e) {
        throw Error(ErrorKind::SchemaViolation, std::string("model checkpoint: ") + e.what());
    }
    if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
        throw Error(ErrorKind::SchemaViolation, "unsupported checkpoint version");

    RefModel model;
    model.task = parse_task(j.at("task").get<std::string>());
    model.dim = j.at("dim").get<std::size_t>();
    model.seed = j.at("seed").get<std::uint64_t>();
    const auto& hyper = j.at("hyper");
    model.hyper.epochs = hyper.at("epochs").get<std::size_t>();
    model.hyper.batch_size = hyper.at("batch_size").get<std::size_t>();
    model.hyper.learning_rate = hyper.at("learning_rate").get<double>();
    model.hyper.seed = hyper.at("seed").get<std::uint64_t>();
    model.classes = j.at("classes").get<std::vector<std::string>>();
    model.vocab = Vocab(j.at("vocab").get<std::vector<std::string>>(),
                        j.at("min_count").get<std::size_t>());
    model.embedding = j.at("embedding").get<std::vector<double>>();
    model.output_weights = j.at("output_weights").get<std::vector<double>>();
    if (model.embedding.size() != model.vocab.size() * model.dim ||
        model.output_weights.size() != model.classes.size() * model.dim)
        throw Error(ErrorKind::SchemaViolation, "checkpoint weight shapes do not match");
    return model;
}

} // namespace memgauge
