#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "memgauge/errors.hpp"

namespace memgauge {

enum class Task {
    MethodName,
    VarMisuse,
    CodeToText,
    CodeSearch,
};

const char* task_name(Task task);
Task parse_task(const std::string& name);

// Half-open token-index range [begin, end).
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool operator==(const TokenSpan&) const = default;
};

// var_misuse target data. A bug-free sample has error_location 0 and no
// repair targets.
struct BugMeta {
    bool is_buggy = false;
    std::size_t error_location = 0;
    std::vector<std::size_t> repair_targets; // sorted token indices

    bool operator==(const BugMeta&) const = default;
};

// One task-tagged corpus record. `variables` maps a variable name to the
// sorted token indices where it occurs; `statements` is populated for the
// method_name task only.
struct Sample {
    std::string id;
    Task task = Task::MethodName;
    std::vector<std::string> tokens;
    std::vector<TokenSpan> statements;
    std::map<std::string, std::vector<std::size_t>> variables;
    std::string target_label;
    std::vector<std::string> target_tokens;
    std::optional<BugMeta> bug_meta;
    std::vector<std::string> query_tokens;

    bool operator==(const Sample&) const = default;
};

struct Corpus {
    Task task = Task::MethodName;
    std::vector<Sample> samples;
    std::set<std::string> label_pool;
    std::vector<std::vector<std::string>> docstring_pool; // sorted, distinct

    bool operator==(const Corpus&) const = default;
};

// Validates every Sample invariant (index bounds, statement ordering,
// variable/token agreement, bug_meta consistency, code_search label domain).
// Throws Error{SchemaViolation, TaskMismatch} naming the offending field.
void validate_sample(const Sample& sample);

// Rebuilds label_pool / docstring_pool from the samples and validates ids
// unique and tasks homogeneous.
void finalize_corpus(Corpus& corpus);

// Builds a Corpus around already-validated samples of one task.
Corpus make_corpus(Task task, std::vector<Sample> samples);

struct NormalizeOptions {
    // Identifiers following one of these are treated as declared variables.
    std::vector<std::string> type_keywords = {
        "int",  "long",   "short", "byte", "char",   "float", "double",
        "bool", "boolean", "var",  "let",  "auto",   "String", "string",
    };
};

// Heuristic lexer + segmenter from raw code text. This is a stand-in for
// the parsed-AST pipelines of the systems this schema mirrors: tokens are
// identifiers / numbers / string literals / operators, comments are
// skipped, statements are semicolon- and brace-delimited spans after the
// first `{`, and variables are detected lexically (declared after a type
// keyword, assigned at statement start, or named in the first header's
// parameter list). Deterministic in (raw_code, task, id).
//
// Throws Error{UnbalancedDelimiters} when brace depth goes negative and
// Error{EmptyTokenStream} when nothing survives lexing.
Sample normalize_source(const std::string& raw_code, Task task, const std::string& id,
                        const NormalizeOptions& options = {});

// JSON Lines corpus I/O. Field names and key order are part of the wire
// format: id, task, tokens, statements, variables, target_label,
// target_tokens, bug_meta{is_buggy,error_location,repair_targets},
// query_tokens. bug_meta is present for var_misuse samples only.
Corpus load_corpus(const std::string& path, Task task);
void write_corpus(const Corpus& corpus, const std::string& path);

// Single-sample JSONL codec (shared with the CLI and the oracle protocol).
std::string sample_to_json_line(const Sample& sample);
Sample sample_from_json_line(const std::string& line, std::size_t line_number);

// Drops variable occurrence indices whose token no longer equals the
// variable name, then drops empty entries. Token-editing noise uses this to
// keep the variables invariant intact.
void prune_variables(Sample& sample);

} // namespace memgauge
