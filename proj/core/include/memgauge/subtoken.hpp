#pragma once

#include <string>
#include <vector>

namespace memgauge {

// Shared identifier-splitting rule, used by the F1 metric, the vocabulary
// builder and the docstring-overlap noise scheme.
//
// A token is split at `_`, at lower->UPPER camel-case boundaries and at
// letter<->digit boundaries; fragments are lowercased. Characters that are
// neither letters nor digits act as separators, like `_`. A token that
// yields no fragments at all (pure punctuation, e.g. "(") is kept verbatim
// as its own single sub-token so that operators stay countable.
//
//   "setUp"   -> {"set", "up"}
//   "set_up"  -> {"set", "up"}
//   "var3"    -> {"var", "3"}
//   "("       -> {"("}
std::vector<std::string> split_subtokens(const std::string& token);

// The joined lowercase sub-tokens ("setUp" -> "setup"). Two tokens with the
// same normalized form are treated as the same word by the overlap-masking
// noise scheme.
std::string normalized_form(const std::string& token);

} // namespace memgauge
