#pragma once

#include <stdexcept>
#include <string>

namespace memgauge {

// Every failure the library reports, as a closed enumeration so callers
// (and tests) can dispatch on the kind instead of parsing messages.
enum class ErrorKind {
    // corpus
    UnbalancedDelimiters,
    EmptyTokenStream,
    SchemaViolation,
    DuplicateId,
    TaskMismatch,
    IoFailure,
    // noising
    IneligibleSample,
    StalePlan,
    // telemetry
    InvariantViolation,
    RaggedEpochs,
    OutOfRange,
    // metrics
    NonFiniteInput,
    EmptySequence,
    EmptyName,
    EmptySlice,
    EmptyReference,
    IndexOutOfBounds,
    OverlappingOccurrences,
    NegativeLoss,
    EmptySplit,
    // csr
    EmptyTestSet,
    OracleFailure,
    // refmodel
    EmptyCorpus,
    IndexOutOfVocab,
    DivergedLoss,
    // report
    TooManySeries,
    EmptyInput,
    MissingRun,
    // cli / study
    ConfigError,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
          kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace memgauge
