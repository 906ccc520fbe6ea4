#include "kbound/errors.hpp"

namespace kbound {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfiguration: return "ConfigurationError";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kInvalidRequest: return "InvalidRequest";
    case ErrorKind::kRemoteUnavailable: return "RemoteUnavailable";
    case ErrorKind::kUnknownMockSample: return "UnknownMockSample";
    case ErrorKind::kScoringUnsupported: return "ScoringUnsupported";
    case ErrorKind::kJudgeParseFailure: return "JudgeParseFailure";
    case ErrorKind::kInternalInconsistency: return "InternalInconsistency";
    case ErrorKind::kInsufficientPool: return "InsufficientPool";
    case ErrorKind::kEmptyBatch: return "EmptyBatch";
    case ErrorKind::kMissingReference: return "MissingReference";
    case ErrorKind::kNumericalFailure: return "NumericalFailure";
    case ErrorKind::kMissingMastery: return "MissingMastery";
    case ErrorKind::kEmptyEvaluation: return "EmptyEvaluation";
    case ErrorKind::kIncomparableReports: return "IncomparableReports";
    case ErrorKind::kIo: return "IoError";
  }
  return "Error";
}

}  // namespace kbound
