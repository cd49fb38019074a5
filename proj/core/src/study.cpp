#include "memgauge/study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "memgauge/csr.hpp"
#include "memgauge/report.hpp"

namespace memgauge {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

StudyConfig load_study_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot open manifest '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const std::exception& e) {
        throw Error(ErrorKind::ConfigError, "manifest '" + path + "': " + e.what());
    }

    StudyConfig config;
    try {
        if (j.contains("name")) config.name = j["name"].get<std::string>();
        if (!j.contains("task")) throw Error(ErrorKind::ConfigError, "manifest needs 'task'");
        config.task = parse_task(j["task"].get<std::string>());
        if (!j.contains("base_corpus"))
            throw Error(ErrorKind::ConfigError, "manifest needs 'base_corpus'");
        config.base_corpus = j["base_corpus"].get<std::string>();
        if (!j.contains("heldout_corpus"))
            throw Error(ErrorKind::ConfigError, "manifest needs 'heldout_corpus'");
        config.heldout_corpus = j["heldout_corpus"].get<std::string>();
        if (j.contains("mode")) config.mode = parse_noise_mode(j["mode"].get<std::string>());
        if (j.contains("rates")) config.rates = j["rates"].get<std::vector<double>>();
        if (j.contains("seeds")) {
            config.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
        } else if (const char* env = std::getenv("MEMGAUGE_SEED")) {
            config.seeds = {std::strtoull(env, nullptr, 10)};
        }
        if (j.contains("dim")) config.dim = j["dim"].get<std::size_t>();
        if (j.contains("epochs")) config.epochs = j["epochs"].get<std::size_t>();
        if (j.contains("batch_size")) config.batch_size = j["batch_size"].get<std::size_t>();
        if (j.contains("learning_rate")) config.learning_rate = j["learning_rate"].get<double>();
        if (j.contains("vocab_min_count"))
            config.vocab_min_count = j["vocab_min_count"].get<std::size_t>();
        if (j.contains("identity_top_k"))
            config.noise_options.identity_top_k = j["identity_top_k"].get<std::size_t>();
        if (j.contains("run_csr")) config.run_csr = j["run_csr"].get<bool>();
        if (j.contains("csr_budget")) config.csr_budget = j["csr_budget"].get<std::size_t>();
        if (j.contains("jobs")) config.jobs = j["jobs"].get<unsigned>();
        if (j.contains("out_dir")) config.out_dir = j["out_dir"].get<std::string>();
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorKind::ConfigError, "manifest '" + path + "': " + e.what());
    }
    if (config.rates.empty()) throw Error(ErrorKind::ConfigError, "manifest needs >= 1 rate");
    if (config.seeds.empty()) throw Error(ErrorKind::ConfigError, "manifest needs >= 1 seed");
    for (double rate : config.rates) {
        if (rate < 0.0 || rate > 1.0)
            throw Error(ErrorKind::ConfigError, "rate outside [0,1] in manifest");
    }
    if (noise_mode_task(config.mode) != config.task)
        throw Error(ErrorKind::ConfigError, std::string("mode ") + noise_mode_name(config.mode) +
                                                " does not fit task " + task_name(config.task));
    if (config.task != Task::MethodName && config.task != Task::CodeSearch)
        throw Error(ErrorKind::ConfigError,
                    "the reference trainer handles method_name and code_search only; "
                    "ingest external telemetry for other tasks");
    return config;
}

void write_study_config(const StudyConfig& config, const std::string& path) {
    ordered_json j;
    j["name"] = config.name;
    j["task"] = task_name(config.task);
    j["base_corpus"] = config.base_corpus;
    j["heldout_corpus"] = config.heldout_corpus;
    j["mode"] = noise_mode_name(config.mode);
    j["rates"] = config.rates;
    j["seeds"] = config.seeds;
    j["dim"] = config.dim;
    j["epochs"] = config.epochs;
    j["batch_size"] = config.batch_size;
    j["learning_rate"] = config.learning_rate;
    j["vocab_min_count"] = config.vocab_min_count;
    j["identity_top_k"] = config.noise_options.identity_top_k;
    j["run_csr"] = config.run_csr;
    if (config.csr_budget != std::numeric_limits<std::size_t>::max())
        j["csr_budget"] = config.csr_budget;
    // jobs is an execution knob, not part of the study's identity
    j["out_dir"] = config.out_dir;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::IoFailure, "write error on '" + path + "'");
}

namespace {

int rate_percent(double rate) { return static_cast<int>(std::lround(rate * 100.0)); }

std::string rate_dir_name(double rate) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "rate_%03d", rate_percent(rate));
    return buf;
}

} // namespace

std::string run_id_for(const StudyConfig& config, std::uint64_t seed, double rate) {
    return config.name + "-s" + std::to_string(seed) + "-r" + std::to_string(rate_percent(rate));
}

// Distinct deterministic streams per (seed, rate) pipeline.
std::uint64_t derive_seed(std::uint64_t seed, double rate) {
    return seed * 1000003ULL + static_cast<std::uint64_t>(rate_percent(rate));
}

std::vector<MetricSeries> analyze_trace(const RunTrace& trace, Task task) {
    std::vector<MetricSeries> series;
    switch (task) {
        case Task::MethodName:
            series.push_back(f1_trajectory(trace));
            break;
        case Task::CodeSearch:
            series.push_back(accuracy_trajectory(trace));
            break;
        case Task::CodeToText:
            series.push_back(bleu_trajectory(trace));
            break;
        case Task::VarMisuse: {
            auto [loc, rep] = loc_rep_trajectory(trace);
            series.push_back(std::move(loc));
            series.push_back(std::move(rep));
            break;
        }
    }
    series.push_back(gini_trajectory(trace));
    return series;
}

namespace {

PipelineResult run_pipeline(const StudyConfig& config, const Corpus& base, const Corpus& heldout,
                            const std::vector<std::string>& classes, std::uint64_t seed,
                            double rate) {
    PipelineResult result;
    result.seed = seed;
    result.rate = rate;

    const fs::path seed_dir = fs::path(config.out_dir) / ("seed_" + std::to_string(seed));
    const fs::path run_dir = seed_dir / rate_dir_name(rate);
    fs::create_directories(run_dir);
    const std::string rel = ("seed_" + std::to_string(seed)) + "/" + rate_dir_name(rate) + "/";
    const std::uint64_t derived = derive_seed(seed, rate);
    const std::string run_id = run_id_for(config, seed, rate);

    // noise
    const NoisePlan plan = plan_noise(base, rate, config.mode, derived, config.noise_options);
    const Corpus noisy = apply(base, plan);
    write_corpus(noisy, (run_dir / "noisy_corpus.jsonl").string());
    write_noise_manifest(plan, (run_dir / "noise_manifest.json").string());
    result.files.push_back(rel + "noisy_corpus.jsonl");
    result.files.push_back(rel + "noise_manifest.json");

    // train
    const Vocab vocab = build_vocab(noisy, config.vocab_min_count);
    RefModel model = init_model(config.task, vocab, classes, config.dim, derived + 1);
    TrainHyper hyper{config.epochs, config.batch_size, config.learning_rate, derived + 2};
    RunInfo info{run_id, rate, noise_mode_name(config.mode)};
    const std::string trace_path = (run_dir / "trace.jsonl").string();
    {
        TraceSink sink(trace_path);
        model = train(std::move(model), noisy, heldout, hyper, info, &sink);
    }
    save_model(model, (run_dir / "model.json").string());
    result.files.push_back(rel + "trace.jsonl");
    result.files.push_back(rel + "model.json");

    // analyze
    const RunTrace trace = read_trace(trace_path);
    result.series = analyze_trace(trace, config.task);
    emit_csv(result.series, (run_dir / "metrics.csv").string());
    result.files.push_back(rel + "metrics.csv");
    result.curves.push_back(score_curve(trace, Split::Train));
    result.curves.push_back(score_curve(trace, Split::Heldout));
    emit_csv(result.curves, (run_dir / "score_curves.csv").string());
    result.files.push_back(rel + "score_curves.csv");

    // csr
    if (config.run_csr) {
        CsrOptions options;
        options.query_budget = config.csr_budget;
        CsrReport report = csr(
            heldout,
            [&model](const std::vector<std::string>& tokens) { return predict(model, tokens).label; },
            options);
        report.run_id = run_id;
        report.noise_rate = rate;
        emit_csv(std::vector<CsrReport>{report}, (run_dir / "csr.csv").string());
        result.files.push_back(rel + "csr.csv");
    }
    return result;
}

void write_failed_marker(const StudyConfig& config, const std::string& stage,
                         const std::string& kind, const std::string& message) {
    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    ordered_json j;
    j["stage"] = stage;
    j["error"] = kind;
    j["message"] = message;
    std::ofstream out(fs::path(config.out_dir) / "FAILED", std::ios::binary | std::ios::trunc);
    out << j.dump(2) << '\n';
}

} // namespace

void run_study(const StudyConfig& config) {
    try {
        fs::create_directories(config.out_dir);
        std::error_code ec;
        fs::remove(fs::path(config.out_dir) / "FAILED", ec);
        write_study_config(config, (fs::path(config.out_dir) / "study_config.json").string());

        const Corpus base = load_corpus(config.base_corpus, config.task);
        const Corpus heldout = load_corpus(config.heldout_corpus, config.task);

        // class catalogue spans both splits so held-out labels always resolve
        std::set<std::string> labels(base.label_pool.begin(), base.label_pool.end());
        labels.insert(heldout.label_pool.begin(), heldout.label_pool.end());
        const std::vector<std::string> classes(labels.begin(), labels.end());

        struct Job {
            std::uint64_t seed;
            double rate;
        };
        std::vector<Job> jobs;
        for (std::uint64_t seed : config.seeds) {
            for (double rate : config.rates) jobs.push_back({seed, rate});
        }

        std::vector<PipelineResult> results(jobs.size());
        unsigned workers = config.jobs;
        if (workers == 0) {
            workers = std::max(1u, std::thread::hardware_concurrency());
        }
        workers = std::min<unsigned>(workers, static_cast<unsigned>(jobs.size()));

        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::atomic<std::size_t> cursor{0};
        auto worker = [&] {
            for (;;) {
                const std::size_t i = cursor.fetch_add(1);
                if (i >= jobs.size()) return;
                try {
                    results[i] =
                        run_pipeline(config, base, heldout, classes, jobs[i].seed, jobs[i].rate);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    cursor.store(jobs.size());
                    return;
                }
            }
        };
        if (workers <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
        }
        if (failure) std::rethrow_exception(failure);

        // cross-rate plots per seed
        std::vector<std::string> extra_files = {"study_config.json", "summary.md"};
        fs::create_directories(fs::path(config.out_dir) / "plots");
        std::vector<RunArtifacts> artifacts;
        for (std::uint64_t seed : config.seeds) {
            std::set<std::string> metric_names;
            std::map<std::string, std::vector<MetricSeries>> by_metric;
            std::vector<ScoreCurve> heldout_curves;
            for (std::size_t i = 0; i < jobs.size(); ++i) {
                if (jobs[i].seed != seed) continue;
                for (const auto& series : results[i].series) {
                    metric_names.insert(series.metric);
                    by_metric[series.metric].push_back(series);
                }
                for (const auto& curve : results[i].curves) {
                    if (curve.split == Split::Heldout) heldout_curves.push_back(curve);
                }
            }
            for (const auto& metric : metric_names) {
                auto collection = by_metric[metric];
                std::sort(collection.begin(), collection.end(),
                          [](const auto& a, const auto& b) { return a.noise_rate < b.noise_rate; });
                const std::string name =
                    "plots/seed_" + std::to_string(seed) + "_" + metric + ".svg";
                emit_plot(to_plot_series(collection, true), PlotStyle::Trajectory, metric,
                          (fs::path(config.out_dir) / name).string());
                extra_files.push_back(name);
            }
            std::sort(heldout_curves.begin(), heldout_curves.end(),
                      [](const auto& a, const auto& b) { return a.noise_rate < b.noise_rate; });
            const std::string name = "plots/seed_" + std::to_string(seed) + "_score_curve.svg";
            emit_plot(to_plot_series(heldout_curves), PlotStyle::Curve, "mean score",
                      (fs::path(config.out_dir) / name).string());
            extra_files.push_back(name);
        }

        // summary
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            RunArtifacts art;
            art.seed = jobs[i].seed;
            art.rate = jobs[i].rate;
            art.files = results[i].files;
            for (const auto& series : results[i].series) {
                if (!series.train.empty()) art.final_train[series.metric] = series.train.back();
                if (!series.heldout.empty())
                    art.final_heldout[series.metric] = series.heldout.back();
            }
            artifacts.push_back(std::move(art));
        }
        const std::string summary = study_summary(config.name, config.rates, artifacts, extra_files);
        std::ofstream out(fs::path(config.out_dir) / "summary.md", std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::IoFailure, "cannot write summary.md");
        out << summary;
    } catch (const Error& e) {
        write_failed_marker(config, "run_study", error_kind_name(e.kind()), e.what());
        throw;
    } catch (const std::exception& e) {
        write_failed_marker(config, "run_study", "Exception", e.what());
        throw;
    }
}

} // namespace memgauge
