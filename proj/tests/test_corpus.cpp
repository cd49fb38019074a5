#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "memgauge/corpus.hpp"
#include "memgauge/rng.hpp"
#include "memgauge/subtoken.hpp"
#include "support/synthetic.hpp"

using namespace memgauge;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "memgauge_corpus_tests";
    fs::create_directories(dir);
    return dir / name;
}

} // namespace

TEST_CASE("subtoken splitting rule") {
    CHECK(split_subtokens("setUp") == std::vector<std::string>{"set", "up"});
    CHECK(split_subtokens("set_up") == std::vector<std::string>{"set", "up"});
    CHECK(split_subtokens("getName") == std::vector<std::string>{"get", "name"});
    CHECK(split_subtokens("var3") == std::vector<std::string>{"var", "3"});
    CHECK(split_subtokens("x2y") == std::vector<std::string>{"x", "2", "y"});
    CHECK(split_subtokens("HTMLParser") == std::vector<std::string>{"htmlparser"});
    CHECK(split_subtokens("(") == std::vector<std::string>{"("});
    CHECK(normalized_form("setUp") == "setup");
    CHECK(normalized_form("Set_Up") == "setup");
}

TEST_CASE("normalize_source hand-traced example") {
    const Sample sample = normalize_source("void f(int a){a=1;}", Task::MethodName, "m0");
    const std::vector<std::string> expected = {"void", "f", "(", "int", "a", ")",
                                               "{",    "a", "=", "1",   ";", "}"};
    CHECK(sample.tokens == expected);
    REQUIRE(sample.variables.count("a") == 1);
    CHECK(sample.variables.at("a") == std::vector<std::size_t>{4, 7});
    CHECK(sample.variables.size() == 1);
    REQUIRE(sample.statements.size() == 1);
    CHECK(sample.statements[0] == TokenSpan{7, 11});
    CHECK(sample.target_label == "f");
}

TEST_CASE("normalize_source error cases") {
    CHECK_THROWS_WITH_AS(normalize_source("", Task::MethodName, "m"), doctest::Contains("m"),
                         Error);
    try {
        normalize_source("", Task::MethodName, "m");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyTokenStream);
    }
    try {
        normalize_source("x}", Task::MethodName, "m");
        FAIL("expected UnbalancedDelimiters");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnbalancedDelimiters);
    }
    try {
        normalize_source("// only a comment", Task::MethodName, "m");
        FAIL("expected EmptyTokenStream");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyTokenStream);
    }
}

TEST_CASE("normalize_source is deterministic and tolerant") {
    const std::string code = "int sum(int a, int b) { int total = a + b; return total; }";
    const Sample first = normalize_source(code, Task::MethodName, "m1");
    const Sample second = normalize_source(code, Task::MethodName, "m1");
    CHECK(first == second);
    CHECK(first.target_label == "sum");
    CHECK(first.variables.count("a") == 1);
    CHECK(first.variables.count("b") == 1);
    CHECK(first.variables.count("total") == 1);
    CHECK(first.statements.size() == 2);

    // comments and strings lex as units
    const Sample strings = normalize_source("void f(){ s = \"a b\"; /* gone */ }",
                                            Task::MethodName, "m2");
    CHECK(std::count(strings.tokens.begin(), strings.tokens.end(), "\"a b\"") == 1);
}

TEST_CASE("statements are segmented at any depth, closers belong to none") {
    const Sample nested = normalize_source("void f(){ if (x) { y = 1; } }", Task::MethodName, "n");
    REQUIRE(nested.statements.size() == 2);
    CHECK(nested.statements[0] == TokenSpan{5, 10});  // "if ( x ) {"
    CHECK(nested.statements[1] == TokenSpan{10, 14}); // "y = 1 ;"
    CHECK(nested.tokens[9] == "{");
    CHECK(nested.tokens[13] == ";");
}

TEST_CASE("corpus JSONL round trip is exact and byte-stable") {
    const Corpus corpus =
        testing::synthetic_method_name_corpus({.per_label = 3, .seed = 11}, "rt");
    const fs::path path = temp_file("roundtrip.jsonl");
    write_corpus(corpus, path.string());
    const Corpus loaded = load_corpus(path.string(), Task::MethodName);
    CHECK(loaded == corpus);

    const fs::path path2 = temp_file("roundtrip2.jsonl");
    write_corpus(corpus, path2.string());
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    CHECK(!sa.empty());
}

TEST_CASE("round trip for the other task schemas") {
    for (const auto& [corpus, task] :
         {std::make_pair(testing::synthetic_var_misuse_corpus(3, 5, "vm"), Task::VarMisuse),
          std::make_pair(testing::synthetic_code_search_corpus(3, 6, "cs"), Task::CodeSearch),
          std::make_pair(testing::synthetic_code_to_text_corpus(4, 7, "ct"), Task::CodeToText)}) {
        const fs::path path = temp_file(std::string("rt_") + task_name(task) + ".jsonl");
        write_corpus(corpus, path.string());
        CHECK(load_corpus(path.string(), task) == corpus);
    }
}

TEST_CASE("load_corpus rejects duplicate ids with the id in the message") {
    Corpus corpus = testing::synthetic_method_name_corpus({.per_label = 2, .seed = 3}, "dup");
    const fs::path path = temp_file("dup.jsonl");
    write_corpus(corpus, path.string());
    std::ofstream out(path, std::ios::app | std::ios::binary);
    out << sample_to_json_line(corpus.samples.front()) << "\n";
    out.close();
    try {
        load_corpus(path.string(), Task::MethodName);
        FAIL("expected DuplicateId");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DuplicateId);
        CHECK(std::string(e.what()).find(corpus.samples.front().id) != std::string::npos);
    }
}

TEST_CASE("load_corpus reports schema violations with line numbers") {
    const fs::path path = temp_file("bad.jsonl");
    {
        std::ofstream out(path, std::ios::binary);
        out << sample_to_json_line(normalize_source("void f(int a){a=1;}", Task::MethodName, "ok"))
            << "\n";
        out << "{\"id\":\"x\"}\n";
    }
    try {
        load_corpus(path.string(), Task::MethodName);
        FAIL("expected SchemaViolation");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SchemaViolation);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("load_corpus rejects out-of-range indices rather than repairing") {
    Sample sample = normalize_source("void f(int a){a=1;}", Task::MethodName, "oob");
    sample.variables["a"].push_back(99);
    const fs::path path = temp_file("oob.jsonl");
    {
        std::ofstream out(path, std::ios::binary);
        out << sample_to_json_line(sample) << "\n";
    }
    try {
        load_corpus(path.string(), Task::MethodName);
        FAIL("expected SchemaViolation");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SchemaViolation);
    }
}

TEST_CASE("task mismatch is its own failure") {
    const Corpus corpus = testing::synthetic_code_search_corpus(2, 9, "tm");
    const fs::path path = temp_file("tm.jsonl");
    write_corpus(corpus, path.string());
    try {
        load_corpus(path.string(), Task::MethodName);
        FAIL("expected TaskMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::TaskMismatch);
    }
}

TEST_CASE("a Java-Top10-shaped corpus loads with the right pools") {
    // 10 labels x 1000 samples each
    std::vector<Sample> samples;
    samples.reserve(10000);
    for (std::size_t label = 0; label < 10; ++label) {
        for (std::size_t i = 0; i < 1000; ++i) {
            Sample sample;
            sample.id = "jt-" + std::to_string(label) + "-" + std::to_string(i);
            sample.task = Task::MethodName;
            sample.target_label = testing::synthetic_labels()[label];
            sample.tokens = {"{", "x", "=", std::to_string(i), ";", "}"};
            sample.statements.push_back({1, 5});
            sample.variables["x"] = {1};
            samples.push_back(std::move(sample));
        }
    }
    const fs::path path = temp_file("top10.jsonl");
    write_corpus(make_corpus(Task::MethodName, std::move(samples)), path.string());
    const Corpus loaded = load_corpus(path.string(), Task::MethodName);
    CHECK(loaded.samples.size() == 10000);
    CHECK(loaded.label_pool.size() == 10);
}

TEST_CASE("write_corpus to an unwritable path fails with IoFailure") {
    const Corpus corpus = testing::synthetic_method_name_corpus({.per_label = 1, .seed = 1}, "io");
    try {
        write_corpus(corpus, "/nonexistent-dir/out.jsonl");
        FAIL("expected IoFailure");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::IoFailure);
    }
}

TEST_CASE("lexer survives arbitrary input deterministically") {
    Rng rng(997);
    const std::string alphabet =
        " \t\n{}();=+-*/<>!&|\"'\\abcXYZ019_#$.,:[]%^~?";
    std::size_t normalized = 0;
    for (int trial = 0; trial < 500; ++trial) {
        std::string raw;
        const std::size_t length = 1 + rng.below(120);
        for (std::size_t i = 0; i < length; ++i) raw.push_back(alphabet[rng.below(alphabet.size())]);
        try {
            const Sample a = normalize_source(raw, Task::MethodName, "fz");
            const Sample b = normalize_source(raw, Task::MethodName, "fz");
            CHECK(a == b);
            validate_sample(a);
            ++normalized;
        } catch (const Error& e) {
            CHECK((e.kind() == ErrorKind::EmptyTokenStream ||
                   e.kind() == ErrorKind::UnbalancedDelimiters));
        }
    }
    CHECK(normalized > 100); // most random strings lex fine
}

TEST_CASE("malformed corpus lines raise schema errors, never crash") {
    const char* broken[] = {
        "",
        "{",
        "null",
        "[1,2]",
        R"({"id": 7})",
        R"({"id":"x","task":"method_name","tokens":"notarray","statements":[],"variables":{},"target_label":"","target_tokens":[],"query_tokens":[]})",
        R"({"id":"x","task":"method_name","tokens":[],"statements":[[0]],"variables":{},"target_label":"","target_tokens":[],"query_tokens":[]})",
        R"({"id":"x","task":"method_name","tokens":["a"],"statements":[],"variables":{"a":[-1]},"target_label":"","target_tokens":[],"query_tokens":[]})",
        R"({"id":"x","task":"nonsense","tokens":[],"statements":[],"variables":{},"target_label":"","target_tokens":[],"query_tokens":[]})",
    };
    for (const char* line : broken) {
        if (std::string(line).empty()) continue;
        CHECK_THROWS_AS(sample_from_json_line(line, 1), Error);
    }
}

TEST_CASE("prune_variables drops stale indices and empty entries") {
    Sample sample = normalize_source("void f(int a){a=1;}", Task::MethodName, "pv");
    sample.tokens[4] = "MASK";
    prune_variables(sample);
    CHECK(sample.variables.at("a") == std::vector<std::size_t>{7});
    sample.tokens[7] = "MASK";
    prune_variables(sample);
    CHECK(sample.variables.empty());
}
