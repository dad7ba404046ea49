#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vesselseg {

/// Every failure the library reports carries one of these codes so callers
/// (the CLI exit-code mapping, the HTTP status mapping, tests) can tell them
/// apart without parsing messages.
enum class ErrorCode {
    InvalidArgument,
    NotFound,
    UnsupportedFormat,
    CorruptData,
    IoError,
    InvalidSigma,
    ImageTooSmall,
    SeedOutOfBounds,
    OutOfBounds,
    DimensionMismatch,
    InsufficientPixels,
    ParseError,
    SchemaError,
    EmptyDataset,
    SingleClassDataset,
    SchemaMismatch,
    VersionMismatch,
    CorruptModel,
    LayerLocked,
    CorruptProject,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Parse failure in a text format; keeps the 1-based line number.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& message)
        : Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace vesselseg
