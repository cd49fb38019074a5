#include "memgauge/errors.hpp"

namespace memgauge {

const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::UnbalancedDelimiters: return "UnbalancedDelimiters";
        case ErrorKind::EmptyTokenStream: return "EmptyTokenStream";
        case ErrorKind::SchemaViolation: return "SchemaViolation";
        case ErrorKind::DuplicateId: return "DuplicateId";
        case ErrorKind::TaskMismatch: return "TaskMismatch";
        case ErrorKind::IoFailure: return "IoFailure";
        case ErrorKind::IneligibleSample: return "IneligibleSample";
        case ErrorKind::StalePlan: return "StalePlan";
        case ErrorKind::InvariantViolation: return "InvariantViolation";
        case ErrorKind::RaggedEpochs: return "RaggedEpochs";
        case ErrorKind::OutOfRange: return "OutOfRange";
        case ErrorKind::NonFiniteInput: return "NonFiniteInput";
        case ErrorKind::EmptySequence: return "EmptySequence";
        case ErrorKind::EmptyName: return "EmptyName";
        case ErrorKind::EmptySlice: return "EmptySlice";
        case ErrorKind::EmptyReference: return "EmptyReference";
        case ErrorKind::IndexOutOfBounds: return "IndexOutOfBounds";
        case ErrorKind::OverlappingOccurrences: return "OverlappingOccurrences";
        case ErrorKind::NegativeLoss: return "NegativeLoss";
        case ErrorKind::EmptySplit: return "EmptySplit";
        case ErrorKind::EmptyTestSet: return "EmptyTestSet";
        case ErrorKind::OracleFailure: return "OracleFailure";
        case ErrorKind::EmptyCorpus: return "EmptyCorpus";
        case ErrorKind::IndexOutOfVocab: return "IndexOutOfVocab";
        case ErrorKind::DivergedLoss: return "DivergedLoss";
        case ErrorKind::TooManySeries: return "TooManySeries";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::MissingRun: return "MissingRun";
        case ErrorKind::ConfigError: return "ConfigError";
    }
    return "UnknownError";
}

} // namespace memgauge
