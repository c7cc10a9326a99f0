#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cuqr {

enum class ErrorCode {
    MissingColumn,
    NonNumericCell,
    EmptyFile,
    TooFewRows,
    EmptyVector,
    TooFewSamples,
    KTooLarge,
    TooFewPoints,
    DimensionMismatch,
    NonpositiveDensity,
    TooFewResiduals,
    EmptyCalibration,
    EmptyTestSet,
    SchemaMismatch,
    InvalidArgument,
    InvalidModel,
    IoError,
};

std::string_view to_string(ErrorCode code);

// Process exit status used by the command-line tool for each code.
int exit_status(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace cuqr
