#include "leakscan/error.hpp"

namespace leakscan {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Schema: return "schema error";
        case ErrorKind::DimensionMismatch: return "dimension mismatch";
        case ErrorKind::Storage: return "storage error";
        case ErrorKind::Format: return "format error";
        case ErrorKind::Corruption: return "corruption error";
        case ErrorKind::DegenerateVector: return "degenerate vector";
        case ErrorKind::EmptyCollection: return "empty collection";
        case ErrorKind::InvalidInput: return "invalid input";
        case ErrorKind::EmptyEvaluation: return "empty evaluation";
        case ErrorKind::UnknownLabel: return "unknown label";
        case ErrorKind::DegenerateSet: return "degenerate set";
        case ErrorKind::InvalidCurve: return "invalid curve";
        case ErrorKind::Coverage: return "coverage error";
        case ErrorKind::Parameter: return "parameter error";
        case ErrorKind::Conflict: return "conflict";
        case ErrorKind::Validation: return "validation error";
        case ErrorKind::UnknownStore: return "unknown store";
    }
    return "error";
}

}  // namespace leakscan
