#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "memgauge/metrics.hpp"
#include "memgauge/noising.hpp"
#include "memgauge/refmodel.hpp"

namespace memgauge {

// A study manifest: one base corpus, one held-out corpus (never noised),
// one noise mode, and the cross product of rates and seeds to sweep.
struct StudyConfig {
    std::string name = "study";
    Task task = Task::MethodName;
    std::string base_corpus;
    std::string heldout_corpus;
    NoiseMode mode = NoiseMode::LabelSwap;
    std::vector<double> rates = {0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<std::uint64_t> seeds = {1};
    std::size_t dim = 8;
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    double learning_rate = 0.1;
    std::size_t vocab_min_count = 1;
    NoiseOptions noise_options;
    bool run_csr = false;
    std::size_t csr_budget = std::numeric_limits<std::size_t>::max();
    unsigned jobs = 0; // 0 = min(hardware threads, pipeline count)
    std::string out_dir = "study_out";
};

StudyConfig load_study_config(const std::string& path);
void write_study_config(const StudyConfig& config, const std::string& path);

// Deterministic run identifiers, shared by run_study and the CLI.
std::string run_id_for(const StudyConfig& config, std::uint64_t seed, double rate);
std::uint64_t derive_seed(std::uint64_t seed, double rate);

// Task-appropriate per-epoch series: the performance trajectory
// (f1 / accuracy / bleu4 / loc+rep accuracy) plus the train-loss Gini.
std::vector<MetricSeries> analyze_trace(const RunTrace& trace, Task task);

// One noise-rate pipeline inside a study: noisy corpus + manifest, trained
// model checkpoint, telemetry trace, metric and score-curve CSVs, optional
// CSR report. Returns the study-relative paths it produced.
struct PipelineResult {
    std::uint64_t seed = 0;
    double rate = 0.0;
    std::vector<std::string> files;
    std::vector<MetricSeries> series;
    std::vector<ScoreCurve> curves;
};

// Runs every (seed, rate) pipeline (in parallel worker slots when jobs > 1),
// renders per-seed cross-rate SVGs and writes summary.md indexing every
// produced file. Rerunning with the same manifest overwrites the directory
// tree byte-identically. On a stage failure a FAILED marker file holding a
// machine-readable error record is left in out_dir and the error rethrown.
void run_study(const StudyConfig& config);

} // namespace memgauge
