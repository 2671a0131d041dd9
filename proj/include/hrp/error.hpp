#pragma once

#include <stdexcept>
#include <string>

namespace hrp {

// Error taxonomy shared by all modules. Codes split into two classes:
// validation errors (bad inputs, exit code 1 in the CLI) and numerical
// errors (well-formed inputs the engine could not handle, exit code 2).
enum class ErrorCode {
    // validation
    NotSymmetric,
    KernelViolation,
    NonPositiveOnComplement,
    ExponentNonPositive,
    NonPositiveComponent,
    NonPositiveBeta,
    DimensionMismatch,
    OutOfRange,
    OutOfSupport,
    ConstraintViolation,
    EmptySample,
    RowInsideThreshold,
    MarginNotExceeded,
    MomentDoesNotExist,
    BadConfig,
    FileError,
    // numerical
    CovNotPD,
    Budget,
    NoMle,
    NotConverged,
};

const char* error_code_name(ErrorCode code);

// True for codes caused by malformed input rather than numerical failure.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const { return code_; }
    const char* code_name() const { return error_code_name(code_); }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

}  // namespace hrp
