#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "memgauge/corpus.hpp"

namespace memgauge {

// The six corruption schemes, three output-noise and three input-noise
// families. Which task each one applies to is fixed:
//   method_name : label_swap | stmt_delete | name_leak
//   var_misuse  : output_flip | input_cues
//   code_to_text: doc_swap | mask_overlap
//   code_search : label_flip | identity_tokens
enum class NoiseMode {
    LabelSwap,
    StmtDelete,
    NameLeak,
    OutputFlip,
    InputCues,
    DocSwap,
    MaskOverlap,
    LabelFlip,
    IdentityTokens,
};

const char* noise_mode_name(NoiseMode mode);
NoiseMode parse_noise_mode(const std::string& name);
Task noise_mode_task(NoiseMode mode);

struct NoiseOptions {
    // identity_tokens replaces the k most frequent tokens (ties by earliest
    // occurrence, code tokens before query tokens).
    std::size_t identity_top_k = 1;
};

// Per-sample replacement directive; which fields are meaningful depends on
// the plan's mode.
struct Directive {
    std::string new_label;                  // label_swap
    std::size_t statement_index = 0;        // stmt_delete
    std::string variable_name;              // name_leak, output_flip (correct->buggy)
    std::size_t error_location = 0;         // output_flip (correct->buggy)
    std::vector<std::string> new_docstring; // doc_swap
    std::size_t top_k = 1;                  // identity_tokens

    bool operator==(const Directive&) const = default;
};

// Seeded, class-stratified selection for one noise level. Per class,
// round_half_up(rate x class size) samples are requested; ineligible ones
// are counted in `shortfall` instead of being replaced.
struct NoisePlan {
    std::uint64_t seed = 0;
    double rate = 0.0;
    NoiseMode mode = NoiseMode::LabelSwap;
    NoiseOptions options;
    std::set<std::string> selected;
    std::map<std::string, Directive> directives;
    std::size_t shortfall = 0;
};

std::size_t round_half_up(double x);

// Deterministic in (corpus, rate, mode, seed): the selection is a seeded
// partial shuffle per class and every random directive is drawn in corpus
// order. var_misuse stratifies on the buggy flag, code_search on the label.
NoisePlan plan_noise(const Corpus& corpus, double rate, NoiseMode mode, std::uint64_t seed,
                     const NoiseOptions& options = {});

// Single-sample transformations. Preconditions mirror plan_noise
// eligibility; violating them raises Error{IneligibleSample}.
Sample noise_method_name(const Sample& sample, const Directive& directive, NoiseMode mode);
Sample noise_var_misuse(const Sample& sample, const Directive& directive, NoiseMode mode);
Sample noise_code_to_text(const Sample& sample, const Directive& directive, NoiseMode mode);
Sample noise_code_search(const Sample& sample, const Directive& directive, NoiseMode mode);

// Applies a plan to the corpus it was built from. Unselected samples are
// copied verbatim and order is preserved. Throws Error{StalePlan} when a
// planned id does not resolve.
Corpus apply(const Corpus& corpus, const NoisePlan& plan);

// Sidecar manifest describing one noisy corpus (JSON: seed, rate, mode,
// shortfall, selected count and an FNV-1a checksum of the selected ids).
void write_noise_manifest(const NoisePlan& plan, const std::string& path);
std::uint64_t selected_ids_checksum(const NoisePlan& plan);

} // namespace memgauge
