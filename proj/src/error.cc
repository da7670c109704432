#include "dln/error.hpp"

namespace dln {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::kNonFinite: return "NON_FINITE";
    case ErrorCode::kSvdNotConverged: return "SVD_NOT_CONVERGED";
    case ErrorCode::kNonsmoothAtPoint: return "NONSMOOTH_AT_POINT";
    case ErrorCode::kNotDifferentiable: return "NOT_DIFFERENTIABLE";
    case ErrorCode::kIterationCap: return "ITERATION_CAP";
    case ErrorCode::kFamilyMismatch: return "FAMILY_MISMATCH";
    case ErrorCode::kStructuralViolation: return "STRUCTURAL_VIOLATION";
    case ErrorCode::kConfig: return "CONFIG";
    case ErrorCode::kIo: return "IO";
  }
  return "UNKNOWN";
}

}  // namespace dln
