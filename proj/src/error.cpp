#include "hrp/error.hpp"

namespace hrp {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::NotSymmetric: return "NotSymmetric";
        case ErrorCode::KernelViolation: return "KernelViolation";
        case ErrorCode::NonPositiveOnComplement: return "NonPositiveOnComplement";
        case ErrorCode::ExponentNonPositive: return "ExponentNonPositive";
        case ErrorCode::NonPositiveComponent: return "NonPositiveComponent";
        case ErrorCode::NonPositiveBeta: return "NonPositiveBeta";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::OutOfSupport: return "OutOfSupport";
        case ErrorCode::ConstraintViolation: return "ConstraintViolation";
        case ErrorCode::EmptySample: return "EmptySample";
        case ErrorCode::RowInsideThreshold: return "RowInsideThreshold";
        case ErrorCode::MarginNotExceeded: return "MarginNotExceeded";
        case ErrorCode::MomentDoesNotExist: return "MomentDoesNotExist";
        case ErrorCode::BadConfig: return "BadConfig";
        case ErrorCode::FileError: return "FileError";
        case ErrorCode::CovNotPD: return "CovNotPD";
        case ErrorCode::Budget: return "Budget";
        case ErrorCode::NoMle: return "NoMle";
        case ErrorCode::NotConverged: return "NotConverged";
    }
    return "Unknown";
}

bool is_validation_error(ErrorCode code) {
    switch (code) {
        case ErrorCode::CovNotPD:
        case ErrorCode::Budget:
        case ErrorCode::NoMle:
        case ErrorCode::NotConverged:
            return false;
        default:
            return true;
    }
}

}  // namespace hrp
