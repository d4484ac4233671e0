#include "evadv/error.hpp"

namespace evadv {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::TruncatedRecord: return "TruncatedRecord";
    case ErrorCode::CoordOutOfRange: return "CoordOutOfRange";
    case ErrorCode::TimestampOverflow: return "TimestampOverflow";
    case ErrorCode::EmptyStream: return "EmptyStream";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ResolutionInfeasible: return "ResolutionInfeasible";
    case ErrorCode::NotLearnable: return "NotLearnable";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::AlreadyProjected: return "AlreadyProjected";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::StaleCache: return "StaleCache";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::NoCandidates: return "NoCandidates";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ConstraintViolation: return "ConstraintViolation";
  }
  return "Unknown";
}

}  // namespace evadv
