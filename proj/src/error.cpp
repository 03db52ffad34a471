#include "kgcn/error.hpp"

namespace kgcn {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::InvalidEdge: return "InvalidEdge";
    case ErrorCode::NumericalError: return "NumericalError";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::InsufficientLabels: return "InsufficientLabels";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::NotLinear: return "NotLinear";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::MissingDataset: return "MissingDataset";
    case ErrorCode::BadContainer: return "BadContainer";
  }
  return "Unknown";
}

}  // namespace kgcn
