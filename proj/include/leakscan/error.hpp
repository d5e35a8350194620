#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace leakscan {

// Error categories. The CLI maps each category to a distinct exit code.
enum class ErrorKind {
    Schema,            // shape/count mismatch between paired inputs
    DimensionMismatch, // vector dimensionality disagrees
    Storage,           // I/O failure while reading or writing
    Format,            // bad magic, version or dtype
    Corruption,        // truncated or oversized data section
    DegenerateVector,  // zero row during normalization
    EmptyCollection,
    InvalidInput,      // NaN similarity, non-finite values, bad arguments
    EmptyEvaluation,
    UnknownLabel,
    DegenerateSet,     // ROC without positives or negatives
    InvalidCurve,
    Coverage,          // predictions missing for subset ids
    Parameter,
    Conflict,          // duplicate (row, col) in a leakage matrix
    Validation,        // audit plan failed validation
    UnknownStore,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace leakscan
