#include "memgauge/noising.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "memgauge/rng.hpp"
#include "memgauge/subtoken.hpp"

namespace memgauge {

using ordered_json = nlohmann::ordered_json;

const char* noise_mode_name(NoiseMode mode) {
    switch (mode) {
        case NoiseMode::LabelSwap: return "label_swap";
        case NoiseMode::StmtDelete: return "stmt_delete";
        case NoiseMode::NameLeak: return "name_leak";
        case NoiseMode::OutputFlip: return "output_flip";
        case NoiseMode::InputCues: return "input_cues";
        case NoiseMode::DocSwap: return "doc_swap";
        case NoiseMode::MaskOverlap: return "mask_overlap";
        case NoiseMode::LabelFlip: return "label_flip";
        case NoiseMode::IdentityTokens: return "identity_tokens";
    }
    return "?";
}

NoiseMode parse_noise_mode(const std::string& name) {
    if (name == "label_swap") return NoiseMode::LabelSwap;
    if (name == "stmt_delete") return NoiseMode::StmtDelete;
    if (name == "name_leak") return NoiseMode::NameLeak;
    if (name == "output_flip") return NoiseMode::OutputFlip;
    if (name == "input_cues") return NoiseMode::InputCues;
    if (name == "doc_swap") return NoiseMode::DocSwap;
    if (name == "mask_overlap") return NoiseMode::MaskOverlap;
    if (name == "label_flip") return NoiseMode::LabelFlip;
    if (name == "identity_tokens") return NoiseMode::IdentityTokens;
    throw Error(ErrorKind::ConfigError, "unknown noise mode '" + name + "'");
}

Task noise_mode_task(NoiseMode mode) {
    switch (mode) {
        case NoiseMode::LabelSwap:
        case NoiseMode::StmtDelete:
        case NoiseMode::NameLeak: return Task::MethodName;
        case NoiseMode::OutputFlip:
        case NoiseMode::InputCues: return Task::VarMisuse;
        case NoiseMode::DocSwap:
        case NoiseMode::MaskOverlap: return Task::CodeToText;
        case NoiseMode::LabelFlip:
        case NoiseMode::IdentityTokens: return Task::CodeSearch;
    }
    return Task::MethodName;
}

std::size_t round_half_up(double x) {
    return static_cast<std::size_t>(std::floor(x + 0.5));
}

namespace {

[[noreturn]] void ineligible(const Sample& sample, const std::string& why) {
    throw Error(ErrorKind::IneligibleSample, "sample '" + sample.id + "': " + why);
}

// Tokens ranked by (count desc, earliest occurrence asc) over the
// concatenation of the given sequences.
std::vector<std::string> rank_by_frequency(
    std::initializer_list<const std::vector<std::string>*> sequences) {
    struct Stat {
        std::size_t count = 0;
        std::size_t first = 0;
    };
    std::unordered_map<std::string, Stat> stats;
    std::size_t pos = 0;
    for (const auto* seq : sequences) {
        for (const auto& t : *seq) {
            auto [it, inserted] = stats.try_emplace(t, Stat{0, pos});
            ++it->second.count;
            ++pos;
        }
    }
    std::vector<std::pair<std::string, Stat>> ranked(stats.begin(), stats.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second.count != b.second.count) return a.second.count > b.second.count;
        return a.second.first < b.second.first;
    });
    std::vector<std::string> out;
    out.reserve(ranked.size());
    for (auto& [token, stat] : ranked) out.push_back(std::move(token));
    return out;
}

// Most frequently occurring variable; ties broken by earliest first
// occurrence.
std::string most_frequent_variable(const Sample& sample) {
    std::string best;
    std::size_t best_count = 0;
    std::size_t best_first = 0;
    for (const auto& [name, indices] : sample.variables) {
        if (indices.empty()) continue;
        if (indices.size() > best_count ||
            (indices.size() == best_count && indices.front() < best_first)) {
            best = name;
            best_count = indices.size();
            best_first = indices.front();
        }
    }
    return best;
}

std::set<std::string> docstring_overlap_forms(const Sample& sample) {
    std::set<std::string> forms;
    for (const auto& t : sample.target_tokens) forms.insert(normalized_form(t));
    return forms;
}

bool eligible(const Sample& sample, NoiseMode mode, const Corpus& corpus) {
    switch (mode) {
        case NoiseMode::LabelSwap:
            return corpus.label_pool.size() >= 2;
        case NoiseMode::StmtDelete:
            return sample.statements.size() >= 2;
        case NoiseMode::NameLeak:
            return !sample.target_label.empty() && !most_frequent_variable(sample).empty();
        case NoiseMode::OutputFlip:
            if (sample.bug_meta->is_buggy) return true;
            return !most_frequent_variable(sample).empty() && sample.tokens.size() >= 2;
        case NoiseMode::InputCues:
            if (sample.bug_meta->is_buggy) return !sample.bug_meta->repair_targets.empty();
            return !sample.tokens.empty();
        case NoiseMode::DocSwap:
            for (const auto& doc : corpus.docstring_pool) {
                if (doc != sample.target_tokens) return true;
            }
            return false;
        case NoiseMode::MaskOverlap: {
            const auto forms = docstring_overlap_forms(sample);
            return std::any_of(sample.tokens.begin(), sample.tokens.end(), [&](const auto& t) {
                return forms.contains(normalized_form(t));
            });
        }
        case NoiseMode::LabelFlip:
            return true;
        case NoiseMode::IdentityTokens:
            return !sample.tokens.empty() || !sample.query_tokens.empty();
    }
    return false;
}

Directive draw_directive(const Sample& sample, NoiseMode mode, const Corpus& corpus, Rng& rng,
                         const NoiseOptions& options) {
    Directive d;
    switch (mode) {
        case NoiseMode::LabelSwap: {
            std::vector<std::string> pool;
            for (const auto& label : corpus.label_pool) {
                if (label != sample.target_label) pool.push_back(label);
            }
            d.new_label = pool[rng.below(pool.size())];
            break;
        }
        case NoiseMode::StmtDelete:
            d.statement_index = rng.below(sample.statements.size());
            break;
        case NoiseMode::NameLeak:
            d.variable_name = most_frequent_variable(sample);
            break;
        case NoiseMode::OutputFlip:
            if (!sample.bug_meta->is_buggy) {
                d.error_location = 1 + rng.below(sample.tokens.size() - 1);
                std::vector<std::string> names;
                for (const auto& [name, indices] : sample.variables) {
                    if (!indices.empty()) names.push_back(name);
                }
                d.variable_name = names[rng.below(names.size())];
            }
            break;
        case NoiseMode::DocSwap: {
            std::vector<const std::vector<std::string>*> pool;
            for (const auto& doc : corpus.docstring_pool) {
                if (doc != sample.target_tokens) pool.push_back(&doc);
            }
            d.new_docstring = *pool[rng.below(pool.size())];
            break;
        }
        case NoiseMode::IdentityTokens:
            d.top_k = options.identity_top_k;
            break;
        case NoiseMode::InputCues:
        case NoiseMode::MaskOverlap:
        case NoiseMode::LabelFlip:
            break;
    }
    return d;
}

} // namespace

NoisePlan plan_noise(const Corpus& corpus, double rate, NoiseMode mode, std::uint64_t seed,
                     const NoiseOptions& options) {
    if (rate < 0.0 || rate > 1.0)
        throw Error(ErrorKind::ConfigError, "noise rate must lie in [0,1]");
    if (noise_mode_task(mode) != corpus.task)
        throw Error(ErrorKind::TaskMismatch, std::string("mode ") + noise_mode_name(mode) +
                                                 " does not apply to a " +
                                                 task_name(corpus.task) + " corpus");

    NoisePlan plan;
    plan.seed = seed;
    plan.rate = rate;
    plan.mode = mode;
    plan.options = options;

    // Class key: buggy flag for var_misuse, label for code_search, a single
    // class otherwise ("same percentage of randomly selected buggy and
    // correct training samples").
    auto class_of = [&](const Sample& s) -> std::string {
        if (corpus.task == Task::VarMisuse) return s.bug_meta->is_buggy ? "buggy" : "correct";
        if (corpus.task == Task::CodeSearch) return s.target_label;
        return "";
    };

    std::map<std::string, std::vector<std::size_t>> class_members;  // corpus order
    std::map<std::string, std::vector<std::size_t>> class_eligible; // corpus order
    for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
        const auto& sample = corpus.samples[i];
        const std::string key = class_of(sample);
        class_members[key].push_back(i);
        if (eligible(sample, mode, corpus)) class_eligible[key].push_back(i);
    }

    Rng rng(seed);
    std::unordered_set<std::size_t> selected_indices;
    for (const auto& [key, members] : class_members) {
        const std::size_t target = round_half_up(rate * static_cast<double>(members.size()));
        auto pool = class_eligible[key];
        const std::size_t take = std::min(target, pool.size());
        plan.shortfall += target - take;
        for (std::size_t i = 0; i < take; ++i) {
            std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
            selected_indices.insert(pool[i]);
        }
    }

    for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
        if (!selected_indices.contains(i)) continue;
        const auto& sample = corpus.samples[i];
        plan.selected.insert(sample.id);
        plan.directives.emplace(sample.id, draw_directive(sample, mode, corpus, rng, options));
    }
    return plan;
}

// ---------------------------------------------------------------------------
// single-sample transformations

Sample noise_method_name(const Sample& sample, const Directive& directive, NoiseMode mode) {
    Sample out = sample;
    switch (mode) {
        case NoiseMode::LabelSwap:
            if (directive.new_label.empty() || directive.new_label == sample.target_label)
                ineligible(sample, "label_swap needs a different label");
            out.target_label = directive.new_label;
            break;
        case NoiseMode::StmtDelete: {
            if (sample.statements.size() < 2) ineligible(sample, "stmt_delete needs >= 2 statements");
            if (directive.statement_index >= sample.statements.size())
                ineligible(sample, "stmt_delete statement index out of range");
            const TokenSpan span = sample.statements[directive.statement_index];
            const std::size_t width = span.size();
            out.tokens.erase(out.tokens.begin() + static_cast<std::ptrdiff_t>(span.begin),
                             out.tokens.begin() + static_cast<std::ptrdiff_t>(span.end));
            out.statements.clear();
            for (std::size_t i = 0; i < sample.statements.size(); ++i) {
                if (i == directive.statement_index) continue;
                TokenSpan s = sample.statements[i];
                if (s.begin >= span.end) {
                    s.begin -= width;
                    s.end -= width;
                }
                out.statements.push_back(s);
            }
            for (auto& [name, indices] : out.variables) {
                std::vector<std::size_t> kept;
                for (std::size_t idx : indices) {
                    if (idx < span.begin) {
                        kept.push_back(idx);
                    } else if (idx >= span.end) {
                        kept.push_back(idx - width);
                    }
                }
                indices = std::move(kept);
            }
            prune_variables(out);
            break;
        }
        case NoiseMode::NameLeak: {
            auto it = sample.variables.find(directive.variable_name);
            if (it == sample.variables.end() || it->second.empty())
                ineligible(sample, "name_leak needs a variable to replace");
            if (sample.target_label.empty()) ineligible(sample, "name_leak needs a target label");
            for (std::size_t idx : it->second) out.tokens[idx] = sample.target_label;
            prune_variables(out);
            break;
        }
        default:
            ineligible(sample, std::string("mode ") + noise_mode_name(mode) + " is not a method_name mode");
    }
    return out;
}

Sample noise_var_misuse(const Sample& sample, const Directive& directive, NoiseMode mode) {
    if (sample.task != Task::VarMisuse || !sample.bug_meta)
        ineligible(sample, "var_misuse noise needs bug_meta");
    Sample out = sample;
    BugMeta& meta = *out.bug_meta;
    switch (mode) {
        case NoiseMode::OutputFlip:
            if (sample.bug_meta->is_buggy) {
                meta.is_buggy = false;
                meta.error_location = 0;
                meta.repair_targets.clear();
            } else {
                auto it = sample.variables.find(directive.variable_name);
                if (it == sample.variables.end() || it->second.empty())
                    ineligible(sample, "output_flip needs a variable for fake repair targets");
                if (directive.error_location == 0 || directive.error_location >= sample.tokens.size())
                    ineligible(sample, "output_flip needs an error location in [1, token count)");
                meta.is_buggy = true;
                meta.error_location = directive.error_location;
                meta.repair_targets = it->second;
            }
            break;
        case NoiseMode::InputCues:
            if (sample.bug_meta->is_buggy) {
                if (sample.bug_meta->repair_targets.empty())
                    ineligible(sample, "input_cues needs repair targets");
                const std::string target_name = sample.tokens[sample.bug_meta->repair_targets.front()];
                for (auto& token : out.tokens) {
                    if (token == target_name) token = "TARGET";
                }
                out.tokens[sample.bug_meta->error_location] = "BUGGY";
            } else {
                if (sample.tokens.empty()) ineligible(sample, "input_cues needs tokens");
                const std::string frequent = rank_by_frequency({&sample.tokens}).front();
                for (auto& token : out.tokens) {
                    if (token == frequent) token = "NONBUGGY";
                }
            }
            prune_variables(out);
            break;
        default:
            ineligible(sample, std::string("mode ") + noise_mode_name(mode) + " is not a var_misuse mode");
    }
    return out;
}

Sample noise_code_to_text(const Sample& sample, const Directive& directive, NoiseMode mode) {
    Sample out = sample;
    switch (mode) {
        case NoiseMode::DocSwap:
            if (directive.new_docstring.empty() || directive.new_docstring == sample.target_tokens)
                ineligible(sample, "doc_swap needs a different docstring");
            out.target_tokens = directive.new_docstring;
            break;
        case NoiseMode::MaskOverlap: {
            const auto forms = docstring_overlap_forms(sample);
            std::size_t replaced = 0;
            for (auto& token : out.tokens) {
                if (forms.contains(normalized_form(token))) {
                    token = "MASK";
                    ++replaced;
                }
            }
            if (replaced == 0) ineligible(sample, "mask_overlap needs an overlapping token");
            prune_variables(out);
            break;
        }
        default:
            ineligible(sample, std::string("mode ") + noise_mode_name(mode) + " is not a code_to_text mode");
    }
    return out;
}

Sample noise_code_search(const Sample& sample, const Directive& directive, NoiseMode mode) {
    if (sample.target_label != "0" && sample.target_label != "1")
        ineligible(sample, "code_search label must be \"0\" or \"1\"");
    Sample out = sample;
    switch (mode) {
        case NoiseMode::LabelFlip:
            out.target_label = sample.target_label == "1" ? "0" : "1";
            break;
        case NoiseMode::IdentityTokens: {
            const auto ranked = rank_by_frequency({&sample.tokens, &sample.query_tokens});
            if (ranked.empty()) ineligible(sample, "identity_tokens needs at least one token");
            const std::size_t k = std::min(std::max<std::size_t>(directive.top_k, 1), ranked.size());
            const std::string cue = sample.target_label == "1" ? "POSITIVE" : "NEGATIVE";
            std::unordered_set<std::string> chosen(ranked.begin(),
                                                   ranked.begin() + static_cast<std::ptrdiff_t>(k));
            for (auto& token : out.tokens) {
                if (chosen.contains(token)) token = cue;
            }
            for (auto& token : out.query_tokens) {
                if (chosen.contains(token)) token = cue;
            }
            prune_variables(out);
            break;
        }
        default:
            ineligible(sample, std::string("mode ") + noise_mode_name(mode) + " is not a code_search mode");
    }
    return out;
}

Corpus apply(const Corpus& corpus, const NoisePlan& plan) {
    std::unordered_set<std::string> unresolved(plan.selected.begin(), plan.selected.end());
    std::vector<Sample> out;
    out.reserve(corpus.samples.size());
    for (const auto& sample : corpus.samples) {
        if (!plan.selected.contains(sample.id)) {
            out.push_back(sample);
            continue;
        }
        unresolved.erase(sample.id);
        const Directive& directive = plan.directives.at(sample.id);
        switch (corpus.task) {
            case Task::MethodName:
                out.push_back(noise_method_name(sample, directive, plan.mode));
                break;
            case Task::VarMisuse:
                out.push_back(noise_var_misuse(sample, directive, plan.mode));
                break;
            case Task::CodeToText:
                out.push_back(noise_code_to_text(sample, directive, plan.mode));
                break;
            case Task::CodeSearch:
                out.push_back(noise_code_search(sample, directive, plan.mode));
                break;
        }
    }
    if (!unresolved.empty())
        throw Error(ErrorKind::StalePlan,
                    "planned id '" + *unresolved.begin() + "' not present in corpus");
    return make_corpus(corpus.task, std::move(out));
}

std::uint64_t selected_ids_checksum(const NoisePlan& plan) {
    std::uint64_t hash = 0xcbf29ce484222325ULL; // FNV-1a 64
    for (const auto& id : plan.selected) {
        for (char c : id) {
            hash ^= static_cast<unsigned char>(c);
            hash *= 0x100000001b3ULL;
        }
        hash ^= static_cast<unsigned char>('\n');
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

void write_noise_manifest(const NoisePlan& plan, const std::string& path) {
    ordered_json j;
    j["seed"] = plan.seed;
    j["rate"] = plan.rate;
    j["mode"] = noise_mode_name(plan.mode);
    j["identity_top_k"] = plan.options.identity_top_k;
    j["shortfall"] = plan.shortfall;
    j["selected_count"] = plan.selected.size();
    j["selected_checksum"] = selected_ids_checksum(plan);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::IoFailure, "write error on '" + path + "'");
}

} // namespace memgauge
