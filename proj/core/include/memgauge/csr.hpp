#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "memgauge/corpus.hpp"

namespace memgauge {

// A model oracle maps a token sequence to its predicted label. Reentrancy
// is required only when csr() runs with more than one worker.
using ModelOracle = std::function<std::string(const std::vector<std::string>&)>;

// One single-place variable renaming: every occurrence of one variable
// replaced by a fresh var[0-9]+ name; token count unchanged.
struct TransformCandidate {
    std::string origin_id;
    std::string variable;
    std::string fresh_name;
    std::vector<std::string> tokens;
};

// One candidate per distinct variable, fresh names var1, var2, ... assigned
// in first-occurrence order; numbers already used as identifiers in the
// sample are skipped.
std::vector<TransformCandidate> candidates(const Sample& sample);

struct CriticalProbe {
    bool critical = false;
    std::size_t queries = 0;
};

// True iff some candidate within the query budget receives a different
// prediction than the sample itself; short-circuits on the first
// disagreement. Counts every oracle invocation, the base query included.
CriticalProbe is_critical(const Sample& sample, const ModelOracle& oracle,
                          std::size_t query_budget = std::numeric_limits<std::size_t>::max());

struct CsrReport {
    std::string run_id;
    double noise_rate = 0.0;
    std::size_t test_size = 0;
    std::vector<std::string> critical_ids; // sorted
    double ratio = 0.0;
    std::size_t queries = 0;
};

struct CsrOptions {
    std::size_t query_budget = std::numeric_limits<std::size_t>::max();
    unsigned workers = 1; // oracle must be reentrant when > 1
};

// critical-sample ratio over the whole test set, correct and incorrect
// predictions alike. Deterministic given a deterministic oracle.
CsrReport csr(const Corpus& test_set, const ModelOracle& oracle, const CsrOptions& options = {});

// External oracle speaking the line protocol: one {"id":...,"tokens":[...]}
// request per line on its stdin, one {"id":...,"prediction":...} per line
// on its stdout, matched by id in any order. A query exceeding the timeout
// raises Error{OracleFailure}. Thread-safe; calls serialize on an internal
// mutex, so use one instance per worker (or OraclePool) for parallel runs.
class SubprocessOracle {
public:
    explicit SubprocessOracle(const std::string& command, int timeout_seconds = 30);
    ~SubprocessOracle();
    SubprocessOracle(const SubprocessOracle&) = delete;
    SubprocessOracle& operator=(const SubprocessOracle&) = delete;

    std::string predict(const std::vector<std::string>& tokens);
    ModelOracle as_oracle();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// A fixed pool of subprocess oracles; concurrent callers are spread over
// the workers round-robin.
class OraclePool {
public:
    OraclePool(const std::string& command, unsigned workers, int timeout_seconds = 30);
    ModelOracle as_oracle();

private:
    std::vector<std::shared_ptr<SubprocessOracle>> workers_;
    std::shared_ptr<std::atomic<std::size_t>> next_;
};

} // namespace memgauge
