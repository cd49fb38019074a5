#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "memgauge/corpus.hpp"

namespace memgauge::testing {

// Desk-scale method_name corpus with a known difficulty structure: ten
// method-name labels, each with a 30-token signature pool, a 170-token
// shared pool and 20 variable names (all single sub-token, so the sub-token
// vocabulary is ~490 plus "=" and ";"). A quarter of the samples are
// "hard": their statements draw mostly from the shared and confuser pools,
// which keeps the clean-data loss distribution heavy-tailed. Bodies are
// 2-4 statements of the shape `v = tok tok ... ;` with 2-3 tracked
// variables, so statement deletion, name leaking and variable renaming all
// have material to work on.
struct SyntheticSpec {
    std::size_t per_label = 20;
    std::uint64_t seed = 0;
    double hard_fraction = 0.25;
};

const std::vector<std::string>& synthetic_labels();

Corpus synthetic_method_name_corpus(const SyntheticSpec& spec, const std::string& id_prefix);

// Balanced code_search corpus: positive pairs share tokens between code and
// query, negatives do not.
Corpus synthetic_code_search_corpus(std::size_t per_class, std::uint64_t seed,
                                    const std::string& id_prefix);

// Balanced var_misuse corpus with consistent bug metadata.
Corpus synthetic_var_misuse_corpus(std::size_t per_class, std::uint64_t seed,
                                   const std::string& id_prefix);

// Small code_to_text corpus whose docstrings overlap their code tokens.
Corpus synthetic_code_to_text_corpus(std::size_t count, std::uint64_t seed,
                                     const std::string& id_prefix);

} // namespace memgauge::testing
