#include "cuqr/error.hpp"

namespace cuqr {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::MissingColumn: return "MISSING_COLUMN";
    case ErrorCode::NonNumericCell: return "NON_NUMERIC_CELL";
    case ErrorCode::EmptyFile: return "EMPTY_FILE";
    case ErrorCode::TooFewRows: return "TOO_FEW_ROWS";
    case ErrorCode::EmptyVector: return "EMPTY_VECTOR";
    case ErrorCode::TooFewSamples: return "TOO_FEW_SAMPLES";
    case ErrorCode::KTooLarge: return "K_TOO_LARGE";
    case ErrorCode::TooFewPoints: return "TOO_FEW_POINTS";
    case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::NonpositiveDensity: return "NONPOSITIVE_DENSITY";
    case ErrorCode::TooFewResiduals: return "TOO_FEW_RESIDUALS";
    case ErrorCode::EmptyCalibration: return "EMPTY_CALIBRATION";
    case ErrorCode::EmptyTestSet: return "EMPTY_TEST_SET";
    case ErrorCode::SchemaMismatch: return "SCHEMA_MISMATCH";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::InvalidModel: return "INVALID_MODEL";
    case ErrorCode::IoError: return "IO_ERROR";
    }
    return "UNKNOWN";
}

int exit_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument: return 2;
    case ErrorCode::IoError: return 3;
    case ErrorCode::MissingColumn:
    case ErrorCode::NonNumericCell:
    case ErrorCode::EmptyFile:
    case ErrorCode::SchemaMismatch: return 4;
    case ErrorCode::InvalidModel: return 5;
    default: return 6;
    }
}

}  // namespace cuqr
