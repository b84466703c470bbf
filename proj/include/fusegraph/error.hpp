#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fusegraph {

enum class ErrorCode {
    // data errors
    MalformedLine,
    NegativeScore,
    NonFiniteScore,
    UnknownDocument,
    DuplicateEntry,
    DimensionMismatch,
    EmptyInput,
    EmptyTextResult,
    ZeroMass,
    NotConverged,
    MissingLocation,
    IoError,
    // configuration errors
    InvalidConfig,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MalformedLine: return "MalformedLine";
        case ErrorCode::NegativeScore: return "NegativeScore";
        case ErrorCode::NonFiniteScore: return "NonFiniteScore";
        case ErrorCode::UnknownDocument: return "UnknownDocument";
        case ErrorCode::DuplicateEntry: return "DuplicateEntry";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::EmptyTextResult: return "EmptyTextResult";
        case ErrorCode::ZeroMass: return "ZeroMass";
        case ErrorCode::NotConverged: return "NotConverged";
        case ErrorCode::MissingLocation: return "MissingLocation";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
    }
    return "Unknown";
}

/// Single exception type for the library; `code()` tells callers what went
/// wrong without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

    bool is_config_error() const noexcept { return code_ == ErrorCode::InvalidConfig; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace fusegraph
