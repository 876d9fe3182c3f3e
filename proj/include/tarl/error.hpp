#pragma once

#include <stdexcept>
#include <string>

namespace tarl {

// Status values double as process exit codes and as C-API error codes.
enum class Status : int {
    Ok = 0,
    Io = 1,              // missing/unreadable file, bad config
    Parse = 2,           // ParseError, AnalysisError, ShapeError, FormatError
    NoFlow = 3,          // no taint path from source to sink
    NotConverged = 4,    // --require-converged and the table did not settle
    Degenerate = 5,      // off-line and on-line utilities identical
    NoConstants = 6,     // culprit statement has no numeric literals
    InsufficientData = 7,// no arm reached the pull floor
    Runtime = 8,         // interpreter fault, divergence, missing verdict
    Invalid = 9,         // bad arguments, stale report, name collision
};

class Error : public std::runtime_error {
public:
    Error(Status status, std::string message)
        : std::runtime_error(std::move(message)), status_(status) {}

    Status status() const { return status_; }

private:
    Status status_;
};

struct ParseError : Error {
    ParseError(int line, int column, const std::string& message)
        : Error(Status::Parse,
                "parse error at line " + std::to_string(line) + ", column " +
                    std::to_string(column) + ": " + message),
          line(line), column(column) {}
    int line;
    int column;
};

struct AnalysisError : Error {
    explicit AnalysisError(const std::string& m) : Error(Status::Parse, "analysis error: " + m) {}
};

struct NoFlowError : Error {
    explicit NoFlowError(const std::string& m) : Error(Status::NoFlow, "no flow: " + m) {}
};

struct InstrumentError : Error {
    explicit InstrumentError(const std::string& m) : Error(Status::Invalid, "instrument error: " + m) {}
};

struct RuntimeFault : Error {
    RuntimeFault(int line, const std::string& m)
        : Error(Status::Runtime, "runtime fault at line " + std::to_string(line) + ": " + m),
          line(line) {}
    int line;
};

struct DivergenceFault : Error {
    explicit DivergenceFault(const std::string& m) : Error(Status::Runtime, "divergence: " + m) {}
};

struct NoVerdictError : Error {
    explicit NoVerdictError(const std::string& m) : Error(Status::Runtime, "no verdict: " + m) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error(Status::Io, "config error: " + m) {}
};

struct FormatError : Error {
    explicit FormatError(const std::string& m) : Error(Status::Parse, "format error: " + m) {}
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& m) : Error(Status::Parse, "shape mismatch: " + m) {}
};

struct DegenerateError : Error {
    explicit DegenerateError(const std::string& m) : Error(Status::Degenerate, "degenerate: " + m) {}
};

struct NoConstantsError : Error {
    explicit NoConstantsError(const std::string& m) : Error(Status::NoConstants, "no constants: " + m) {}
};

struct NameCollisionError : Error {
    explicit NameCollisionError(const std::string& m) : Error(Status::Invalid, "name collision: " + m) {}
};

struct InsufficientDataError : Error {
    explicit InsufficientDataError(const std::string& m)
        : Error(Status::InsufficientData, "insufficient data: " + m) {}
};

}
