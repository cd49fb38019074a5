#include "memgauge/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace memgauge {

using ordered_json = nlohmann::ordered_json;

const char* task_name(Task task) {
    switch (task) {
        case Task::MethodName: return "method_name";
        case Task::VarMisuse: return "var_misuse";
        case Task::CodeToText: return "code_to_text";
        case Task::CodeSearch: return "code_search";
    }
    return "?";
}

Task parse_task(const std::string& name) {
    if (name == "method_name") return Task::MethodName;
    if (name == "var_misuse") return Task::VarMisuse;
    if (name == "code_to_text") return Task::CodeToText;
    if (name == "code_search") return Task::CodeSearch;
    throw Error(ErrorKind::SchemaViolation, "unknown task '" + name + "'");
}

// ---------------------------------------------------------------------------
// validation

void validate_sample(const Sample& sample) {
    const std::size_t n = sample.tokens.size();
    auto fail = [&](const std::string& field, const std::string& what) {
        throw Error(ErrorKind::SchemaViolation,
                    "sample '" + sample.id + "' field '" + field + "': " + what);
    };
    if (sample.id.empty()) fail("id", "empty");

    std::size_t prev_end = 0;
    bool first = true;
    for (const auto& span : sample.statements) {
        if (span.begin >= span.end) fail("statements", "empty or inverted span");
        if (span.end > n) fail("statements", "span exceeds token count");
        if (!first && span.begin < prev_end) fail("statements", "spans overlap or unordered");
        prev_end = span.end;
        first = false;
    }

    for (const auto& [name, indices] : sample.variables) {
        if (name.empty()) fail("variables", "empty variable name");
        std::size_t prev = 0;
        bool have_prev = false;
        for (std::size_t idx : indices) {
            if (idx >= n) fail("variables", "occurrence index out of range for '" + name + "'");
            if (have_prev && idx <= prev) fail("variables", "occurrences not strictly sorted for '" + name + "'");
            if (sample.tokens[idx] != name)
                fail("variables", "token at " + std::to_string(idx) + " is not '" + name + "'");
            prev = idx;
            have_prev = true;
        }
    }

    if (sample.task == Task::VarMisuse) {
        if (!sample.bug_meta) fail("bug_meta", "required for var_misuse");
        const BugMeta& bm = *sample.bug_meta;
        if (bm.error_location != 0 && bm.error_location >= n)
            fail("bug_meta", "error_location out of range");
        std::size_t prev = 0;
        bool have_prev = false;
        for (std::size_t idx : bm.repair_targets) {
            if (idx >= n) fail("bug_meta", "repair target out of range");
            if (have_prev && idx <= prev) fail("bug_meta", "repair targets not strictly sorted");
            prev = idx;
            have_prev = true;
        }
        if (!bm.is_buggy && (bm.error_location != 0 || !bm.repair_targets.empty()))
            fail("bug_meta", "bug-free sample must have error_location 0 and no repair targets");
    } else if (sample.bug_meta) {
        fail("bug_meta", "only valid for var_misuse");
    }

    if (sample.task == Task::CodeSearch) {
        if (sample.target_label != "0" && sample.target_label != "1")
            fail("target_label", "code_search label must be \"0\" or \"1\"");
    }
    if (sample.task != Task::CodeToText && !sample.target_tokens.empty())
        fail("target_tokens", "only valid for code_to_text");
    if (sample.task != Task::CodeSearch && !sample.query_tokens.empty())
        fail("query_tokens", "only valid for code_search");
}

void finalize_corpus(Corpus& corpus) {
    corpus.label_pool.clear();
    std::set<std::vector<std::string>> docs;
    std::unordered_set<std::string> ids;
    ids.reserve(corpus.samples.size());
    for (const auto& sample : corpus.samples) {
        if (sample.task != corpus.task)
            throw Error(ErrorKind::TaskMismatch,
                        "sample '" + sample.id + "' task " + task_name(sample.task) +
                            " in " + task_name(corpus.task) + " corpus");
        if (!ids.insert(sample.id).second)
            throw Error(ErrorKind::DuplicateId, sample.id);
        if (!sample.target_label.empty()) corpus.label_pool.insert(sample.target_label);
        if (!sample.target_tokens.empty()) docs.insert(sample.target_tokens);
    }
    corpus.docstring_pool.assign(docs.begin(), docs.end());
}

Corpus make_corpus(Task task, std::vector<Sample> samples) {
    Corpus corpus;
    corpus.task = task;
    corpus.samples = std::move(samples);
    for (const auto& sample : corpus.samples) validate_sample(sample);
    finalize_corpus(corpus);
    return corpus;
}

// ---------------------------------------------------------------------------
// heuristic lexer

namespace {

inline bool ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == '$';
}
inline bool ident_char(char c) {
    return ident_start(c) || (c >= '0' && c <= '9');
}
inline bool digit(char c) { return c >= '0' && c <= '9'; }

const char* kOperators3[] = {">>>", "<<=", ">>=", "===", "!==", "..."};
const char* kOperators2[] = {"==", "!=", "<=", ">=", "&&", "||", "->", "=>", "++",
                             "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
                             "::", "<<", ">>", "**"};

std::vector<std::string> lex(const std::string& text) {
    std::vector<std::string> tokens;
    const std::size_t n = text.size();
    std::size_t i = 0;
    while (i < n) {
        const char c = text[i];
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v') {
            ++i;
            continue;
        }
        if (c == '/' && i + 1 < n && text[i + 1] == '/') {
            while (i < n && text[i] != '\n') ++i;
            continue;
        }
        if (c == '#') {
            while (i < n && text[i] != '\n') ++i;
            continue;
        }
        if (c == '/' && i + 1 < n && text[i + 1] == '*') {
            i += 2;
            while (i + 1 < n && !(text[i] == '*' && text[i + 1] == '/')) ++i;
            i = (i + 1 < n) ? i + 2 : n;
            continue;
        }
        if (c == '"' || c == '\'') {
            std::size_t j = i + 1;
            while (j < n && text[j] != c && text[j] != '\n') {
                if (text[j] == '\\' && j + 1 < n) ++j;
                ++j;
            }
            if (j < n && text[j] == c) ++j; // closing quote; else stop at EOL/EOF
            tokens.push_back(text.substr(i, j - i));
            i = j;
            continue;
        }
        if (ident_start(c)) {
            std::size_t j = i + 1;
            while (j < n && ident_char(text[j])) ++j;
            tokens.push_back(text.substr(i, j - i));
            i = j;
            continue;
        }
        if (digit(c)) {
            std::size_t j = i + 1;
            while (j < n && (ident_char(text[j]) || text[j] == '.')) ++j;
            tokens.push_back(text.substr(i, j - i));
            i = j;
            continue;
        }
        bool matched = false;
        for (const char* op : kOperators3) {
            if (text.compare(i, 3, op) == 0) {
                tokens.emplace_back(op);
                i += 3;
                matched = true;
                break;
            }
        }
        if (matched) continue;
        for (const char* op : kOperators2) {
            if (text.compare(i, 2, op) == 0) {
                tokens.emplace_back(op);
                i += 2;
                matched = true;
                break;
            }
        }
        if (matched) continue;
        tokens.push_back(std::string(1, c));
        ++i;
    }
    return tokens;
}

// Statements start after the first `{`. A span ends inclusively at `;` or
// `{`; closing braces belong to no statement.
std::vector<TokenSpan> segment_statements(const std::vector<std::string>& tokens) {
    std::vector<TokenSpan> spans;
    auto body = std::find(tokens.begin(), tokens.end(), "{");
    if (body == tokens.end()) return spans;
    std::size_t cur = static_cast<std::size_t>(body - tokens.begin()) + 1;
    for (std::size_t i = cur; i < tokens.size(); ++i) {
        const std::string& t = tokens[i];
        if (t == ";" || t == "{") {
            spans.push_back({cur, i + 1});
            cur = i + 1;
        } else if (t == "}") {
            if (cur < i) spans.push_back({cur, i});
            cur = i + 1;
        }
    }
    if (cur < tokens.size()) spans.push_back({cur, tokens.size()});
    return spans;
}

bool is_identifier_token(const std::string& t) {
    if (t.empty() || !ident_start(t[0])) return false;
    return std::all_of(t.begin(), t.end(), ident_char);
}

} // namespace

Sample normalize_source(const std::string& raw_code, Task task, const std::string& id,
                        const NormalizeOptions& options) {
    Sample sample;
    sample.id = id;
    sample.task = task;
    sample.tokens = lex(raw_code);
    if (sample.tokens.empty())
        throw Error(ErrorKind::EmptyTokenStream, "no tokens in '" + id + "'");

    long depth = 0;
    for (const auto& t : sample.tokens) {
        if (t == "{") ++depth;
        if (t == "}" && --depth < 0)
            throw Error(ErrorKind::UnbalancedDelimiters, "negative brace depth in '" + id + "'");
    }

    const auto& tokens = sample.tokens;
    const std::size_t n = tokens.size();
    const auto statements = segment_statements(tokens);
    if (task == Task::MethodName) sample.statements = statements;

    const std::unordered_set<std::string> type_keywords(options.type_keywords.begin(),
                                                        options.type_keywords.end());
    auto is_candidate = [&](const std::string& t) {
        return is_identifier_token(t) && !type_keywords.contains(t);
    };

    std::set<std::string> names;
    // (i) declared after a type keyword, unless it opens a call
    for (std::size_t i = 1; i < n; ++i) {
        if (type_keywords.contains(tokens[i - 1]) && is_candidate(tokens[i]) &&
            (i + 1 >= n || tokens[i + 1] != "(")) {
            names.insert(tokens[i]);
        }
    }
    // (ii) assigned at statement start
    for (const auto& span : statements) {
        if (span.size() >= 2 && is_candidate(tokens[span.begin]) &&
            tokens[span.begin + 1] == "=") {
            names.insert(tokens[span.begin]);
        }
    }
    // (iii) parameter names in the first header's parenthesized list
    std::size_t body = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (tokens[i] == "{") {
            body = i;
            break;
        }
    }
    std::size_t open = n;
    for (std::size_t i = 0; i < body; ++i) {
        if (tokens[i] == "(") {
            open = i;
            break;
        }
    }
    if (open < n) {
        long pdepth = 1;
        std::size_t close = open + 1;
        while (close < n && pdepth > 0) {
            if (tokens[close] == "(") ++pdepth;
            if (tokens[close] == ")") --pdepth;
            if (pdepth == 0) break;
            ++close;
        }
        for (std::size_t i = open + 1; i < close && close < n; ++i) {
            if (is_candidate(tokens[i]) && (tokens[i + 1] == "," || i + 1 == close)) {
                names.insert(tokens[i]);
            }
        }
        if (task == Task::MethodName && open > 0 && is_identifier_token(tokens[open - 1])) {
            sample.target_label = tokens[open - 1];
        }
    }

    for (const auto& name : names) {
        std::vector<std::size_t> occ;
        for (std::size_t i = 0; i < n; ++i) {
            if (tokens[i] == name) occ.push_back(i);
        }
        sample.variables.emplace(name, std::move(occ));
    }

    if (task == Task::VarMisuse) sample.bug_meta = BugMeta{};
    if (task == Task::CodeSearch) sample.target_label = "0";
    validate_sample(sample);
    return sample;
}

// ---------------------------------------------------------------------------
// JSONL codec

namespace {

std::vector<std::string> string_array(const ordered_json& j, const std::string& field,
                                      std::size_t line_number) {
    if (!j.is_array())
        throw Error(ErrorKind::SchemaViolation,
                    "line " + std::to_string(line_number) + " field '" + field + "': not an array");
    std::vector<std::string> out;
    out.reserve(j.size());
    for (const auto& item : j) {
        if (!item.is_string())
            throw Error(ErrorKind::SchemaViolation, "line " + std::to_string(line_number) +
                                                        " field '" + field + "': non-string item");
        out.push_back(item.get<std::string>());
    }
    return out;
}

std::size_t index_value(const ordered_json& j, const std::string& field, std::size_t line_number) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
        throw Error(ErrorKind::SchemaViolation, "line " + std::to_string(line_number) + " field '" +
                                                    field + "': not a non-negative integer");
    return j.get<std::size_t>();
}

} // namespace

std::string sample_to_json_line(const Sample& sample) {
    ordered_json j;
    j["id"] = sample.id;
    j["task"] = task_name(sample.task);
    j["tokens"] = sample.tokens;
    auto spans = ordered_json::array();
    for (const auto& s : sample.statements) spans.push_back({s.begin, s.end});
    j["statements"] = std::move(spans);
    auto vars = ordered_json::object();
    for (const auto& [name, indices] : sample.variables) vars[name] = indices;
    j["variables"] = std::move(vars);
    j["target_label"] = sample.target_label;
    j["target_tokens"] = sample.target_tokens;
    if (sample.bug_meta) {
        ordered_json bm;
        bm["is_buggy"] = sample.bug_meta->is_buggy;
        bm["error_location"] = sample.bug_meta->error_location;
        bm["repair_targets"] = sample.bug_meta->repair_targets;
        j["bug_meta"] = std::move(bm);
    }
    j["query_tokens"] = sample.query_tokens;
    return j.dump();
}

Sample sample_from_json_line(const std::string& line, std::size_t line_number) {
    ordered_json j;
    try {
        j = ordered_json::parse(line);
    } catch (const std::exception& e) {
        throw Error(ErrorKind::SchemaViolation,
                    "line " + std::to_string(line_number) + ": " + e.what());
    }
    if (!j.is_object())
        throw Error(ErrorKind::SchemaViolation, "line " + std::to_string(line_number) + ": not an object");

    static const std::set<std::string> known = {"id",           "task",          "tokens",
                                                "statements",   "variables",     "target_label",
                                                "target_tokens", "bug_meta",     "query_tokens"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known.contains(key))
            throw Error(ErrorKind::SchemaViolation,
                        "line " + std::to_string(line_number) + " field '" + key + "': unknown");
    }
    auto require = [&](const char* field) -> const ordered_json& {
        if (!j.contains(field))
            throw Error(ErrorKind::SchemaViolation,
                        "line " + std::to_string(line_number) + " field '" + field + "': missing");
        return j.at(field);
    };

    Sample sample;
    const auto& id = require("id");
    if (!id.is_string())
        throw Error(ErrorKind::SchemaViolation, "line " + std::to_string(line_number) + " field 'id': not a string");
    sample.id = id.get<std::string>();
    const auto& task = require("task");
    if (!task.is_string())
        throw Error(ErrorKind::SchemaViolation, "line " + std::to_string(line_number) + " field 'task': not a string");
    sample.task = parse_task(task.get<std::string>());
    sample.tokens = string_array(require("tokens"), "tokens", line_number);

    for (const auto& span : require("statements")) {
        if (!span.is_array() || span.size() != 2)
            throw Error(ErrorKind::SchemaViolation, "line " + std::to_string(line_number) +
                                                        " field 'statements': span is not a pair");
        sample.statements.push_back(
            {index_value(span[0], "statements", line_number), index_value(span[1], "statements", line_number)});
    }

    const auto& vars = require("variables");
    if (!vars.is_object())
        throw Error(ErrorKind::SchemaViolation,
                    "line " + std::to_string(line_number) + " field 'variables': not an object");
    for (const auto& [name, indices] : vars.items()) {
        std::vector<std::size_t> occ;
        if (!indices.is_array())
            throw Error(ErrorKind::SchemaViolation, "line " + std::to_string(line_number) +
                                                        " field 'variables': occurrences not an array");
        for (const auto& idx : indices) occ.push_back(index_value(idx, "variables", line_number));
        sample.variables.emplace(name, std::move(occ));
    }

    const auto& label = require("target_label");
    if (!label.is_string())
        throw Error(ErrorKind::SchemaViolation,
                    "line " + std::to_string(line_number) + " field 'target_label': not a string");
    sample.target_label = label.get<std::string>();
    sample.target_tokens = string_array(require("target_tokens"), "target_tokens", line_number);

    if (j.contains("bug_meta") && !j.at("bug_meta").is_null()) {
        const auto& bm = j.at("bug_meta");
        if (!bm.is_object() || !bm.contains("is_buggy") || !bm.at("is_buggy").is_boolean() ||
            !bm.contains("error_location") || !bm.contains("repair_targets"))
            throw Error(ErrorKind::SchemaViolation,
                        "line " + std::to_string(line_number) + " field 'bug_meta': malformed");
        BugMeta meta;
        meta.is_buggy = bm.at("is_buggy").get<bool>();
        meta.error_location = index_value(bm.at("error_location"), "bug_meta", line_number);
        for (const auto& idx : bm.at("repair_targets"))
            meta.repair_targets.push_back(index_value(idx, "bug_meta", line_number));
        sample.bug_meta = std::move(meta);
    }
    sample.query_tokens = string_array(require("query_tokens"), "query_tokens", line_number);

    try {
        validate_sample(sample);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::SchemaViolation) throw;
        throw Error(ErrorKind::SchemaViolation,
                    "line " + std::to_string(line_number) + ": " + e.what());
    }
    return sample;
}

Corpus load_corpus(const std::string& path, Task task) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open '" + path + "'");
    Corpus corpus;
    corpus.task = task;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Sample sample = sample_from_json_line(line, line_number);
        if (sample.task != task)
            throw Error(ErrorKind::TaskMismatch,
                        "line " + std::to_string(line_number) + ": sample task " +
                            task_name(sample.task) + ", expected " + task_name(task));
        corpus.samples.push_back(std::move(sample));
    }
    if (in.bad()) throw Error(ErrorKind::IoFailure, "read error on '" + path + "'");
    finalize_corpus(corpus);
    return corpus;
}

void write_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot open '" + path + "' for writing");
    for (const auto& sample : corpus.samples) {
        out << sample_to_json_line(sample) << '\n';
    }
    out.flush();
    if (!out) throw Error(ErrorKind::IoFailure, "write error on '" + path + "'");
}

void prune_variables(Sample& sample) {
    for (auto it = sample.variables.begin(); it != sample.variables.end();) {
        auto& indices = it->second;
        std::erase_if(indices, [&](std::size_t idx) {
            return idx >= sample.tokens.size() || sample.tokens[idx] != it->first;
        });
        it = indices.empty() ? sample.variables.erase(it) : std::next(it);
    }
}

} // namespace memgauge
