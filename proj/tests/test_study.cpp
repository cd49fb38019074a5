#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "memgauge/csr.hpp"
#include "memgauge/refmodel.hpp"
#include "memgauge/study.hpp"
#include "support/synthetic.hpp"

using namespace memgauge;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "memgauge_study_tests" / name;
    fs::create_directories(dir);
    return dir;
}

std::string binary_path() {
    const char* env = std::getenv("MEMGAUGE_BIN");
    REQUIRE_MESSAGE(env != nullptr, "MEMGAUGE_BIN must point at the CLI binary");
    return env;
}

int run_cli(const std::string& args) {
    const int status = std::system((binary_path() + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
}

std::map<std::string, std::string> tree_digest(const fs::path& root) {
    std::map<std::string, std::string> digest;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        digest[fs::relative(entry.path(), root).string()] =
            std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    }
    return digest;
}

StudyConfig demo_config(const fs::path& dir) {
    write_corpus(testing::synthetic_method_name_corpus({.per_label = 4, .seed = 51}, "trn"),
                 (dir / "train.jsonl").string());
    write_corpus(testing::synthetic_method_name_corpus({.per_label = 2, .seed = 52}, "tst"),
                 (dir / "heldout.jsonl").string());
    StudyConfig config;
    config.name = "demo";
    config.task = Task::MethodName;
    config.base_corpus = (dir / "train.jsonl").string();
    config.heldout_corpus = (dir / "heldout.jsonl").string();
    config.mode = NoiseMode::LabelSwap;
    config.rates = {0.0};
    config.seeds = {1};
    config.dim = 4;
    config.epochs = 1;
    config.batch_size = 8;
    config.learning_rate = 0.5;
    config.out_dir = (dir / "out").string();
    return config;
}

} // namespace

TEST_CASE("degenerate study: one rate, one epoch") {
    const fs::path dir = temp_dir("degenerate");
    const StudyConfig config = demo_config(dir);
    run_study(config);

    const fs::path run_dir = fs::path(config.out_dir) / "seed_1" / "rate_000";
    for (const char* name : {"noisy_corpus.jsonl", "noise_manifest.json", "trace.jsonl",
                             "model.json", "metrics.csv", "score_curves.csv"}) {
        CHECK_MESSAGE(fs::exists(run_dir / name), name);
    }
    CHECK(fs::exists(fs::path(config.out_dir) / "summary.md"));
    CHECK(fs::exists(fs::path(config.out_dir) / "study_config.json"));
    CHECK(!fs::exists(fs::path(config.out_dir) / "FAILED"));

    // rate 0: the noisy corpus is the identity
    const Corpus base = load_corpus(config.base_corpus, Task::MethodName);
    const Corpus noisy = load_corpus((run_dir / "noisy_corpus.jsonl").string(), Task::MethodName);
    CHECK(noisy == base);

    // every produced file is reachable from the summary index
    std::ifstream summary_in(fs::path(config.out_dir) / "summary.md");
    const std::string summary((std::istreambuf_iterator<char>(summary_in)),
                              std::istreambuf_iterator<char>());
    for (const auto& entry : fs::recursive_directory_iterator(config.out_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel = fs::relative(entry.path(), config.out_dir).string();
        CHECK_MESSAGE(summary.find(rel) != std::string::npos, rel);
    }
}

TEST_CASE("study rerun is byte-identical") {
    const fs::path dir = temp_dir("rerun");
    StudyConfig config = demo_config(dir);
    config.rates = {0.0, 1.0};
    config.epochs = 2;
    run_study(config);
    const auto first = tree_digest(config.out_dir);
    run_study(config);
    const auto second = tree_digest(config.out_dir);
    CHECK(first == second);
    CHECK(first.size() > 0);
}

TEST_CASE("code_search study end to end with parallel pipelines") {
    const fs::path dir = temp_dir("code_search");
    write_corpus(testing::synthetic_code_search_corpus(6, 53, "trn"),
                 (dir / "train.jsonl").string());
    write_corpus(testing::synthetic_code_search_corpus(3, 54, "tst"),
                 (dir / "heldout.jsonl").string());
    StudyConfig config;
    config.name = "cs-demo";
    config.task = Task::CodeSearch;
    config.base_corpus = (dir / "train.jsonl").string();
    config.heldout_corpus = (dir / "heldout.jsonl").string();
    config.mode = NoiseMode::LabelFlip;
    config.rates = {0.0, 0.5, 1.0};
    config.seeds = {1};
    config.dim = 4;
    config.epochs = 2;
    config.batch_size = 4;
    config.learning_rate = 0.5;
    config.jobs = 3; // exercise the worker pool even on one core
    config.out_dir = (dir / "out").string();
    run_study(config);
    const auto first = tree_digest(config.out_dir);

    config.jobs = 1; // parallelism must not change a single byte
    run_study(config);
    CHECK(tree_digest(config.out_dir) == first);

    const RunTrace trace =
        read_trace((fs::path(config.out_dir) / "seed_1" / "rate_100" / "trace.jsonl").string());
    const auto series = analyze_trace(trace, Task::CodeSearch);
    CHECK(series[0].metric == "accuracy");
}

TEST_CASE("analyze_trace picks task metrics") {
    const fs::path dir = temp_dir("analyze");
    StudyConfig config = demo_config(dir);
    run_study(config);
    const RunTrace trace =
        read_trace((fs::path(config.out_dir) / "seed_1" / "rate_000" / "trace.jsonl").string());
    const auto series = analyze_trace(trace, Task::MethodName);
    REQUIRE(series.size() == 2);
    CHECK(series[0].metric == "f1");
    CHECK(series[1].metric == "gini_loss");
    CHECK(series[0].train.size() == trace.epoch_count());
    CHECK(series[0].heldout.size() == trace.epoch_count());
}

TEST_CASE("missing corpus leaves a FAILED marker and throws") {
    const fs::path dir = temp_dir("failure");
    StudyConfig config = demo_config(dir);
    config.base_corpus = (dir / "nope.jsonl").string();
    config.out_dir = (dir / "out_failed").string();
    CHECK_THROWS_AS(run_study(config), Error);
    CHECK(fs::exists(fs::path(config.out_dir) / "FAILED"));
    std::ifstream in(fs::path(config.out_dir) / "FAILED");
    const std::string marker((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
    CHECK(marker.find("nope.jsonl") != std::string::npos);
}

TEST_CASE("manifest validation") {
    const fs::path dir = temp_dir("manifest");
    const fs::path path = dir / "bad.json";
    std::ofstream(path) << R"({"task":"method_name"})";
    CHECK_THROWS_AS(load_study_config(path.string()), Error);

    std::ofstream(path, std::ios::trunc)
        << R"({"task":"method_name","base_corpus":"a","heldout_corpus":"b","mode":"label_flip"})";
    try {
        load_study_config(path.string());
        FAIL("expected ConfigError for a mode/task mismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ConfigError);
    }
}

// ---------------------------------------------------------------------------
// CLI integration

TEST_CASE("cli: noise subcommand is deterministic") {
    const fs::path dir = temp_dir("cli_noise");
    write_corpus(testing::synthetic_method_name_corpus({.per_label = 3, .seed = 61}, "cn"),
                 (dir / "c.jsonl").string());
    const std::string base = "noise --task method_name --corpus " + (dir / "c.jsonl").string() +
                             " --mode label_swap --rate 0.5 --seed 7 --manifest " +
                             (dir / "m.json").string();
    CHECK(run_cli(base + " --out " + (dir / "n1.jsonl").string()) == 0);
    CHECK(run_cli(base + " --out " + (dir / "n2.jsonl").string()) == 0);
    std::ifstream a(dir / "n1.jsonl", std::ios::binary), b(dir / "n2.jsonl", std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    CHECK(fs::exists(dir / "m.json"));
}

TEST_CASE("cli: exit codes distinguish config and data errors") {
    const fs::path dir = temp_dir("cli_exit");
    CHECK(run_cli("run-study --config " + (dir / "missing.json").string()) == 2);
    CHECK(run_cli("noise --task bogus --corpus x --rate 0.5 --out y") == 2);

    std::ofstream(dir / "manifest.json")
        << R"({"task":"method_name","base_corpus":")" << (dir / "ghost.jsonl").string()
        << R"(","heldout_corpus":")" << (dir / "ghost.jsonl").string() << R"("})";
    CHECK(run_cli("run-study --config " + (dir / "manifest.json").string()) == 3);
}

TEST_CASE("cli: normalize then analyze round") {
    const fs::path dir = temp_dir("cli_norm");
    std::ofstream(dir / "one.java") << "void f(int a){a=1;}";
    std::ofstream(dir / "two.java") << "int g(int b){b=2;return b;}";
    CHECK(run_cli("normalize --task method_name --out " + (dir / "c.jsonl").string() + " " +
                  (dir / "one.java").string() + " " + (dir / "two.java").string()) == 0);
    const Corpus corpus = load_corpus((dir / "c.jsonl").string(), Task::MethodName);
    CHECK(corpus.samples.size() == 2);
    CHECK(corpus.label_pool.count("f") == 1);
    CHECK(corpus.label_pool.count("g") == 1);
}

TEST_CASE("cli: subprocess oracle speaks the line protocol") {
    const fs::path dir = temp_dir("cli_oracle");
    const Corpus corpus = testing::synthetic_method_name_corpus({.per_label = 2, .seed = 71}, "or");
    const Vocab vocab = build_vocab(corpus, 1);
    const std::vector<std::string> classes(corpus.label_pool.begin(), corpus.label_pool.end());
    RefModel model = init_model(Task::MethodName, vocab, classes, 4, 5);
    model = train(std::move(model), corpus, corpus, {3, 8, 0.5, 5}, {"or", 0.0, "label_swap"},
                  nullptr);
    const fs::path ckpt = dir / "model.json";
    save_model(model, ckpt.string());

    SubprocessOracle oracle(binary_path() + " csr --serve --model " + ckpt.string());
    for (const auto& sample : corpus.samples) {
        CHECK(oracle.predict(sample.tokens) == predict(model, sample.tokens).label);
    }

    // the same checkpoint through csr() via an OraclePool
    OraclePool pool(binary_path() + " csr --serve --model " + ckpt.string(), 2);
    const CsrReport via_pool = csr(corpus, pool.as_oracle(), {.workers = 2});
    const CsrReport in_process = csr(corpus, [&model](const std::vector<std::string>& tokens) {
        return predict(model, tokens).label;
    });
    CHECK(via_pool.critical_ids == in_process.critical_ids);
    CHECK(via_pool.ratio == in_process.ratio);
}

TEST_CASE("cli: train then analyze on existing traces, report regenerates") {
    const fs::path dir = temp_dir("cli_stages");
    write_corpus(testing::synthetic_method_name_corpus({.per_label = 3, .seed = 95}, "tr"),
                 (dir / "train.jsonl").string());
    write_corpus(testing::synthetic_method_name_corpus({.per_label = 1, .seed = 96}, "te"),
                 (dir / "heldout.jsonl").string());
    CHECK(run_cli("train --task method_name --corpus " + (dir / "train.jsonl").string() +
                  " --heldout " + (dir / "heldout.jsonl").string() +
                  " --dim 4 --epochs 2 --batch-size 8 --learning-rate 0.5 --seed 11 --trace " +
                  (dir / "trace.jsonl").string() + " --model-out " +
                  (dir / "model.json").string()) == 0);
    CHECK(run_cli("analyze --task method_name --trace " + (dir / "trace.jsonl").string() +
                  " --out-dir " + (dir / "analysis").string()) == 0);
    CHECK(fs::exists(dir / "analysis" / "metrics.csv"));
    CHECK(fs::exists(dir / "analysis" / "score_curves.csv"));

    // csr against the trained checkpoint
    CHECK(run_cli("csr --task method_name --corpus " + (dir / "heldout.jsonl").string() +
                  " --model " + (dir / "model.json").string() + " --out " +
                  (dir / "csr.csv").string()) == 0);
    CHECK(fs::exists(dir / "csr.csv"));

    // report re-renders a study directory from its CSV checkpoints
    StudyConfig config = demo_config(dir);
    config.out_dir = (dir / "study").string();
    run_study(config);
    fs::remove_all(fs::path(config.out_dir) / "plots");
    fs::remove(fs::path(config.out_dir) / "summary.md");
    CHECK(run_cli("report --study " + config.out_dir) == 0);
    CHECK(fs::exists(fs::path(config.out_dir) / "summary.md"));
    CHECK(fs::exists(fs::path(config.out_dir) / "plots" / "seed_1_f1.svg"));
    const auto first = tree_digest(fs::path(config.out_dir) / "plots");
    CHECK(run_cli("report --study " + config.out_dir) == 0);
    CHECK(tree_digest(fs::path(config.out_dir) / "plots") == first);
}

TEST_CASE("subprocess oracle failures are errors, not crashes") {
    const Sample probe = [] {
        Sample s;
        s.id = "p";
        s.task = Task::MethodName;
        s.tokens = {"a"};
        s.variables["a"] = {0};
        s.target_label = "run";
        return s;
    }();
    // child exits immediately: the broken pipe must surface as OracleFailure
    SubprocessOracle dead("true");
    try {
        is_critical(probe, dead.as_oracle());
        FAIL("expected OracleFailure");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::OracleFailure);
    }

    // child answers garbage
    SubprocessOracle garbage("echo not-json");
    try {
        is_critical(probe, garbage.as_oracle());
        FAIL("expected OracleFailure");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::OracleFailure);
    }

    // child never answers: the per-query timeout fires
    SubprocessOracle silent("sleep 30", /*timeout_seconds=*/1);
    try {
        silent.predict({"a"});
        FAIL("expected OracleFailure");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::OracleFailure);
        CHECK(std::string(e.what()).find("timed out") != std::string::npos);
    }
}

TEST_CASE("telemetry rejects unknown fields") {
    try {
        record_from_json_line(
            R"({"run_id":"r","noise_rate":0,"noise_mode":"m","epoch":0,"split":"train",)"
            R"("sample_id":"s","loss":0,"predicted":"x","score":0.5,"correct":true,)"
            R"("target":"x","loc_los":0.1})",
            1);
        FAIL("expected SchemaViolation");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SchemaViolation);
        CHECK(std::string(e.what()).find("loc_los") != std::string::npos);
    }
}

TEST_CASE("cli: config file overrides flags") {
    const fs::path dir = temp_dir("cli_config");
    write_corpus(testing::synthetic_method_name_corpus({.per_label = 2, .seed = 81}, "cf"),
                 (dir / "c.jsonl").string());
    std::ofstream(dir / "override.json") << R"({"rate":0.0})";
    // flag says rate 1.0 but the config pins 0.0, so nothing may change
    CHECK(run_cli("noise --task method_name --corpus " + (dir / "c.jsonl").string() +
                  " --mode label_swap --rate 1.0 --seed 3 --out " + (dir / "n.jsonl").string() +
                  " --config " + (dir / "override.json").string()) == 0);
    const Corpus original = load_corpus((dir / "c.jsonl").string(), Task::MethodName);
    const Corpus noisy = load_corpus((dir / "n.jsonl").string(), Task::MethodName);
    CHECK(noisy == original);
}
