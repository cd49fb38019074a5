// memgauge: noise-injection studies over code-corpus models.
//
// Subcommands wire the library stages together: normalize raw code into a
// corpus, noise it, train the reference model, analyze traces, probe CSR,
// render reports, or run a whole study from one manifest. Exit codes:
// 0 success, 2 config error, 3 data error, 4 oracle/training failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "memgauge/corpus.hpp"
#include "memgauge/csr.hpp"
#include "memgauge/metrics.hpp"
#include "memgauge/noising.hpp"
#include "memgauge/refmodel.hpp"
#include "memgauge/report.hpp"
#include "memgauge/study.hpp"

namespace fs = std::filesystem;
using namespace memgauge;

namespace {

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::ConfigError:
            return 2;
        case ErrorKind::OracleFailure:
        case ErrorKind::DivergedLoss:
            return 4;
        default:
            return 3;
    }
}

void print_error_record(const std::string& kind, const std::string& message) {
    nlohmann::ordered_json j;
    j["error"] = kind;
    j["message"] = message;
    std::cerr << j.dump() << std::endl;
}

// Manifest-first operation: values in a --config JSON override the flags.
nlohmann::json load_config_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot open config '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const std::exception& e) {
        throw Error(ErrorKind::ConfigError, "config '" + path + "': " + e.what());
    }
}

template <typename T>
void override_from(const nlohmann::json& j, const char* key, T& value) {
    if (j.contains(key)) value = j.at(key).get<T>();
}

std::string run_id_or_default(const std::string& run_id, const std::string& fallback) {
    return run_id.empty() ? fallback : run_id;
}

// A bad --task value is a configuration problem, not a data problem.
Task task_flag(const std::string& name) {
    try {
        return parse_task(name);
    } catch (const Error&) {
        throw Error(ErrorKind::ConfigError, "unknown task '" + name + "'");
    }
}

void serve_oracle(const RefModel& model) {
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(std::cin, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json request;
        try {
            request = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw Error(ErrorKind::OracleFailure,
                        "request line " + std::to_string(line_number) + ": " + e.what());
        }
        const std::string id = request.at("id").get<std::string>();
        const auto tokens = request.at("tokens").get<std::vector<std::string>>();
        nlohmann::ordered_json response;
        response["id"] = id;
        response["prediction"] = predict(model, tokens).label;
        std::cout << response.dump() << "\n" << std::flush;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"memorization-diagnostics toolkit for code-corpus models"};
    app.require_subcommand(1);

    std::string config_path;

    // ---- normalize ----
    auto* cmd_normalize = app.add_subcommand("normalize", "lex raw code files into a JSONL corpus");
    std::string nrm_task = "method_name", nrm_out, nrm_prefix;
    std::vector<std::string> nrm_files;
    cmd_normalize->add_option("--task", nrm_task, "method_name|var_misuse|code_to_text|code_search");
    cmd_normalize->add_option("--out", nrm_out, "output corpus path")->required();
    cmd_normalize->add_option("--id-prefix", nrm_prefix, "use <prefix><ordinal> ids instead of file stems");
    cmd_normalize->add_option("files", nrm_files, "raw code files, one sample each")->required();
    cmd_normalize->add_option("--config", config_path, "JSON config; overrides flags");

    // ---- noise ----
    auto* cmd_noise = app.add_subcommand("noise", "produce a seeded noisy corpus variant");
    std::string ns_task = "method_name", ns_corpus, ns_mode = "label_swap", ns_out, ns_manifest;
    double ns_rate = 0.0;
    std::uint64_t ns_seed = 0;
    std::size_t ns_top_k = 1;
    cmd_noise->add_option("--task", ns_task, "corpus task");
    cmd_noise->add_option("--corpus", ns_corpus, "input corpus")->required();
    cmd_noise->add_option("--mode", ns_mode, "noise mode");
    cmd_noise->add_option("--rate", ns_rate, "noise rate in [0,1]")->required();
    cmd_noise->add_option("--seed", ns_seed, "RNG seed")->envname("MEMGAUGE_SEED");
    cmd_noise->add_option("--out", ns_out, "noisy corpus path")->required();
    cmd_noise->add_option("--manifest", ns_manifest, "sidecar manifest path");
    cmd_noise->add_option("--identity-top-k", ns_top_k, "identity_tokens k");
    cmd_noise->add_option("--config", config_path, "JSON config; overrides flags");

    // ---- train ----
    auto* cmd_train = app.add_subcommand("train", "train the reference model, emitting telemetry");
    std::string tr_task = "method_name", tr_corpus, tr_heldout, tr_trace, tr_model_out;
    std::string tr_run_id, tr_noise_mode = "label_swap";
    double tr_noise_rate = 0.0, tr_lr = 0.1;
    std::size_t tr_dim = 8, tr_epochs = 50, tr_batch = 32, tr_min_count = 1;
    std::uint64_t tr_seed = 0;
    cmd_train->add_option("--task", tr_task, "corpus task");
    cmd_train->add_option("--corpus", tr_corpus, "training corpus")->required();
    cmd_train->add_option("--heldout", tr_heldout, "held-out corpus")->required();
    cmd_train->add_option("--dim", tr_dim, "embedding dimension (capacity knob)");
    cmd_train->add_option("--epochs", tr_epochs, "training epochs");
    cmd_train->add_option("--batch-size", tr_batch, "mini-batch size");
    cmd_train->add_option("--learning-rate", tr_lr, "GD learning rate");
    cmd_train->add_option("--seed", tr_seed, "RNG seed")->envname("MEMGAUGE_SEED");
    cmd_train->add_option("--run-id", tr_run_id, "telemetry run id");
    cmd_train->add_option("--noise-rate", tr_noise_rate, "rate recorded in telemetry");
    cmd_train->add_option("--noise-mode", tr_noise_mode, "mode recorded in telemetry");
    cmd_train->add_option("--trace", tr_trace, "telemetry output path")->required();
    cmd_train->add_option("--model-out", tr_model_out, "checkpoint output path");
    cmd_train->add_option("--min-count", tr_min_count, "vocabulary min sub-token count");
    cmd_train->add_option("--config", config_path, "JSON config; overrides flags");

    // ---- analyze ----
    auto* cmd_analyze = app.add_subcommand("analyze", "compute metric series from a trace");
    std::string an_task = "method_name", an_trace, an_out_dir = ".";
    cmd_analyze->add_option("--task", an_task, "trace task");
    cmd_analyze->add_option("--trace", an_trace, "telemetry trace")->required();
    cmd_analyze->add_option("--out-dir", an_out_dir, "directory for metrics.csv / score_curves.csv");
    cmd_analyze->add_option("--config", config_path, "JSON config; overrides flags");

    // ---- csr ----
    auto* cmd_csr = app.add_subcommand("csr", "critical-sample-ratio probe (or --serve an oracle)");
    std::string cs_task = "method_name", cs_corpus, cs_model, cs_oracle_cmd, cs_out, cs_run_id;
    double cs_noise_rate = 0.0;
    std::size_t cs_budget = 0;
    unsigned cs_workers = 1;
    bool cs_serve = false;
    cmd_csr->add_option("--task", cs_task, "corpus task");
    cmd_csr->add_option("--corpus", cs_corpus, "test corpus to probe");
    cmd_csr->add_option("--model", cs_model, "reference model checkpoint oracle");
    cmd_csr->add_option("--oracle-cmd", cs_oracle_cmd, "external oracle command (line protocol)");
    cmd_csr->add_option("--budget", cs_budget, "per-sample query budget (0 = unlimited)");
    cmd_csr->add_option("--workers", cs_workers, "concurrent probe workers");
    cmd_csr->add_option("--run-id", cs_run_id, "run id recorded in the report");
    cmd_csr->add_option("--noise-rate", cs_noise_rate, "rate recorded in the report");
    cmd_csr->add_option("--out", cs_out, "CSV output path");
    cmd_csr->add_flag("--serve", cs_serve, "answer oracle requests on stdin instead of probing");
    cmd_csr->add_option("--config", config_path, "JSON config; overrides flags");

    // ---- report ----
    auto* cmd_report = app.add_subcommand("report", "re-render plots and summary for a study dir");
    std::string rp_study;
    cmd_report->add_option("--study", rp_study, "study output directory")->required();
    cmd_report->add_option("--config", config_path, "JSON config; overrides flags");

    // ---- run-study ----
    auto* cmd_study = app.add_subcommand("run-study", "run a whole study from a manifest");
    std::string st_config, st_out;
    unsigned st_jobs = 0;
    cmd_study->add_option("--config", st_config, "study manifest (JSON)")->required();
    cmd_study->add_option("--out", st_out, "output directory (manifest out_dir wins)");
    cmd_study->add_option("--jobs", st_jobs, "parallel pipelines (manifest jobs wins)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        print_error_record("ConfigError", e.what());
        return 2;
    }

    try {
        nlohmann::json config;
        if (!config_path.empty()) config = load_config_json(config_path);

        if (*cmd_normalize) {
            override_from(config, "task", nrm_task);
            override_from(config, "out", nrm_out);
            override_from(config, "id_prefix", nrm_prefix);
            const Task task = task_flag(nrm_task);
            std::vector<Sample> samples;
            std::size_t ordinal = 0;
            for (const auto& file : nrm_files) {
                std::ifstream in(file);
                if (!in) throw Error(ErrorKind::IoFailure, "cannot open '" + file + "'");
                std::stringstream buffer;
                buffer << in.rdbuf();
                std::string id = nrm_prefix.empty() ? fs::path(file).stem().string()
                                                    : nrm_prefix + std::to_string(ordinal);
                samples.push_back(normalize_source(buffer.str(), task, id));
                ++ordinal;
            }
            write_corpus(make_corpus(task, std::move(samples)), nrm_out);
            return 0;
        }

        if (*cmd_noise) {
            override_from(config, "task", ns_task);
            override_from(config, "corpus", ns_corpus);
            override_from(config, "mode", ns_mode);
            override_from(config, "rate", ns_rate);
            override_from(config, "seed", ns_seed);
            override_from(config, "out", ns_out);
            override_from(config, "manifest", ns_manifest);
            override_from(config, "identity_top_k", ns_top_k);
            const Task task = task_flag(ns_task);
            const NoiseMode mode = parse_noise_mode(ns_mode);
            const Corpus corpus = load_corpus(ns_corpus, task);
            NoiseOptions options;
            options.identity_top_k = ns_top_k;
            const NoisePlan plan = plan_noise(corpus, ns_rate, mode, ns_seed, options);
            write_corpus(apply(corpus, plan), ns_out);
            if (!ns_manifest.empty()) write_noise_manifest(plan, ns_manifest);
            return 0;
        }

        if (*cmd_train) {
            override_from(config, "task", tr_task);
            override_from(config, "corpus", tr_corpus);
            override_from(config, "heldout", tr_heldout);
            override_from(config, "dim", tr_dim);
            override_from(config, "epochs", tr_epochs);
            override_from(config, "batch_size", tr_batch);
            override_from(config, "learning_rate", tr_lr);
            override_from(config, "seed", tr_seed);
            override_from(config, "run_id", tr_run_id);
            override_from(config, "noise_rate", tr_noise_rate);
            override_from(config, "noise_mode", tr_noise_mode);
            override_from(config, "trace", tr_trace);
            override_from(config, "model_out", tr_model_out);
            override_from(config, "min_count", tr_min_count);
            const Task task = task_flag(tr_task);
            if (task != Task::MethodName && task != Task::CodeSearch)
                throw Error(ErrorKind::ConfigError,
                            "the reference trainer handles method_name and code_search only");
            const Corpus corpus = load_corpus(tr_corpus, task);
            const Corpus heldout = load_corpus(tr_heldout, task);
            std::set<std::string> labels(corpus.label_pool.begin(), corpus.label_pool.end());
            labels.insert(heldout.label_pool.begin(), heldout.label_pool.end());
            const Vocab vocab = build_vocab(corpus, tr_min_count);
            RefModel model = init_model(task, vocab,
                                        std::vector<std::string>(labels.begin(), labels.end()),
                                        tr_dim, tr_seed);
            TrainHyper hyper{tr_epochs, tr_batch, tr_lr, tr_seed};
            RunInfo info{run_id_or_default(tr_run_id, "run-s" + std::to_string(tr_seed)),
                         tr_noise_rate, tr_noise_mode};
            TraceSink sink(tr_trace);
            model = train(std::move(model), corpus, heldout, hyper, info, &sink);
            if (!tr_model_out.empty()) save_model(model, tr_model_out);
            return 0;
        }

        if (*cmd_analyze) {
            override_from(config, "task", an_task);
            override_from(config, "trace", an_trace);
            override_from(config, "out_dir", an_out_dir);
            const Task task = task_flag(an_task);
            const RunTrace trace = read_trace(an_trace);
            fs::create_directories(an_out_dir);
            emit_csv(analyze_trace(trace, task), (fs::path(an_out_dir) / "metrics.csv").string());
            std::vector<ScoreCurve> curves;
            if (trace.has_split(Split::Train)) curves.push_back(score_curve(trace, Split::Train));
            if (trace.has_split(Split::Heldout))
                curves.push_back(score_curve(trace, Split::Heldout));
            emit_csv(curves, (fs::path(an_out_dir) / "score_curves.csv").string());
            return 0;
        }

        if (*cmd_csr) {
            override_from(config, "task", cs_task);
            override_from(config, "corpus", cs_corpus);
            override_from(config, "model", cs_model);
            override_from(config, "oracle_cmd", cs_oracle_cmd);
            override_from(config, "budget", cs_budget);
            override_from(config, "workers", cs_workers);
            override_from(config, "run_id", cs_run_id);
            override_from(config, "noise_rate", cs_noise_rate);
            override_from(config, "out", cs_out);
            if (cs_serve) {
                if (cs_model.empty())
                    throw Error(ErrorKind::ConfigError, "--serve needs --model");
                serve_oracle(load_model(cs_model));
                return 0;
            }
            if (cs_corpus.empty()) throw Error(ErrorKind::ConfigError, "csr needs --corpus");
            const Task task = task_flag(cs_task);
            const Corpus corpus = load_corpus(cs_corpus, task);
            CsrOptions options;
            if (cs_budget > 0) options.query_budget = cs_budget;
            options.workers = cs_workers;

            CsrReport report;
            if (!cs_model.empty()) {
                const RefModel model = load_model(cs_model);
                report = csr(
                    corpus,
                    [&model](const std::vector<std::string>& t) { return predict(model, t).label; },
                    options);
            } else if (!cs_oracle_cmd.empty()) {
                OraclePool pool(cs_oracle_cmd, options.workers);
                report = csr(corpus, pool.as_oracle(), options);
            } else {
                throw Error(ErrorKind::ConfigError, "csr needs --model or --oracle-cmd");
            }
            report.run_id = run_id_or_default(cs_run_id, "csr");
            report.noise_rate = cs_noise_rate;
            if (!cs_out.empty()) {
                emit_csv(std::vector<CsrReport>{report}, cs_out);
            }
            std::cout << "csr " << report.ratio << " (" << report.critical_ids.size() << "/"
                      << report.test_size << ", " << report.queries << " queries)\n";
            return 0;
        }

        if (*cmd_report) {
            const StudyConfig study =
                load_study_config((fs::path(rp_study) / "study_config.json").string());
            std::vector<std::string> extra_files = {"study_config.json", "summary.md"};
            fs::create_directories(fs::path(rp_study) / "plots");
            std::vector<RunArtifacts> artifacts;
            for (std::uint64_t seed : study.seeds) {
                std::map<std::string, std::vector<MetricSeries>> by_metric;
                std::vector<ScoreCurve> heldout_curves;
                for (double rate : study.rates) {
                    const int percent = static_cast<int>(std::lround(rate * 100.0));
                    char rate_dir[16];
                    std::snprintf(rate_dir, sizeof(rate_dir), "rate_%03d", percent);
                    const fs::path run_dir =
                        fs::path(rp_study) / ("seed_" + std::to_string(seed)) / rate_dir;
                    if (!fs::exists(run_dir / "metrics.csv"))
                        throw Error(ErrorKind::MissingRun,
                                    "rate " + std::to_string(percent) + "% missing for seed " +
                                        std::to_string(seed));
                    RunArtifacts art;
                    art.seed = seed;
                    art.rate = rate;
                    const std::string rel = "seed_" + std::to_string(seed) + "/" +
                                            std::string(rate_dir) + "/";
                    for (const char* name : {"noisy_corpus.jsonl", "noise_manifest.json",
                                             "trace.jsonl", "model.json", "metrics.csv",
                                             "score_curves.csv", "csr.csv"}) {
                        if (fs::exists(run_dir / name)) art.files.push_back(rel + name);
                    }
                    for (const auto& series :
                         read_metric_series_csv((run_dir / "metrics.csv").string())) {
                        by_metric[series.metric].push_back(series);
                        if (!series.train.empty())
                            art.final_train[series.metric] = series.train.back();
                        if (!series.heldout.empty())
                            art.final_heldout[series.metric] = series.heldout.back();
                    }
                    for (const auto& curve :
                         read_score_curves_csv((run_dir / "score_curves.csv").string())) {
                        if (curve.split == Split::Heldout) heldout_curves.push_back(curve);
                    }
                    artifacts.push_back(std::move(art));
                }
                for (auto& [metric, collection] : by_metric) {
                    std::sort(collection.begin(), collection.end(), [](const auto& a, const auto& b) {
                        return a.noise_rate < b.noise_rate;
                    });
                    const std::string name =
                        "plots/seed_" + std::to_string(seed) + "_" + metric + ".svg";
                    emit_plot(to_plot_series(collection, true), PlotStyle::Trajectory, metric,
                              (fs::path(rp_study) / name).string());
                    extra_files.push_back(name);
                }
                std::sort(heldout_curves.begin(), heldout_curves.end(),
                          [](const auto& a, const auto& b) { return a.noise_rate < b.noise_rate; });
                const std::string name = "plots/seed_" + std::to_string(seed) + "_score_curve.svg";
                emit_plot(to_plot_series(heldout_curves), PlotStyle::Curve, "mean score",
                          (fs::path(rp_study) / name).string());
                extra_files.push_back(name);
            }
            const std::string summary =
                study_summary(study.name, study.rates, artifacts, extra_files);
            std::ofstream out(fs::path(rp_study) / "summary.md", std::ios::binary | std::ios::trunc);
            if (!out) throw Error(ErrorKind::IoFailure, "cannot write summary.md");
            out << summary;
            return 0;
        }

        if (*cmd_study) {
            const nlohmann::json manifest = load_config_json(st_config);
            StudyConfig study = load_study_config(st_config);
            if (!manifest.contains("out_dir") && !st_out.empty()) study.out_dir = st_out;
            if (!manifest.contains("jobs") && st_jobs > 0) study.jobs = st_jobs;
            run_study(study);
            return 0;
        }
    } catch (const Error& e) {
        print_error_record(error_kind_name(e.kind()), e.what());
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        print_error_record("Exception", e.what());
        return 3;
    }
    return 0;
}
