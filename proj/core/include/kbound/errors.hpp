/// @file errors.hpp
/// @brief Exception types raised across the pipeline.
///
/// Every error carries an ErrorKind so callers (the CLI in particular) can map
/// failures onto exit codes without string matching.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kbound {

enum class ErrorKind {
  kConfiguration,
  kInvalidArgument,
  kInvalidRequest,
  kRemoteUnavailable,
  kUnknownMockSample,
  kScoringUnsupported,
  kJudgeParseFailure,
  kInternalInconsistency,
  kInsufficientPool,
  kEmptyBatch,
  kMissingReference,
  kNumericalFailure,
  kMissingMastery,
  kEmptyEvaluation,
  kIncomparableReports,
  kIo,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigurationError : public Error {
 public:
  explicit ConfigurationError(const std::string& m) : Error(ErrorKind::kConfiguration, m) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& m) : Error(ErrorKind::kInvalidArgument, m) {}
};

class InvalidRequest : public Error {
 public:
  explicit InvalidRequest(const std::string& m) : Error(ErrorKind::kInvalidRequest, m) {}
};

/// Raised once a remote call has exhausted its retries. `completed_ids`
/// lists the corpus items finished before the failure, when known.
class RemoteUnavailable : public Error {
 public:
  explicit RemoteUnavailable(const std::string& m, std::vector<std::string> completed_ids = {})
      : Error(ErrorKind::kRemoteUnavailable, m), completed_ids_(std::move(completed_ids)) {}

  const std::vector<std::string>& completed_ids() const noexcept { return completed_ids_; }

 private:
  std::vector<std::string> completed_ids_;
};

class UnknownMockSample : public Error {
 public:
  explicit UnknownMockSample(const std::string& id)
      : Error(ErrorKind::kUnknownMockSample, "sample id not in mock knowledge map: " + id) {}
};

class ScoringUnsupported : public Error {
 public:
  explicit ScoringUnsupported(const std::string& endpoint)
      : Error(ErrorKind::kScoringUnsupported, "endpoint does not support scoring: " + endpoint) {}
};

class JudgeParseFailure : public Error {
 public:
  explicit JudgeParseFailure(const std::string& m) : Error(ErrorKind::kJudgeParseFailure, m) {}
};

class InternalInconsistency : public Error {
 public:
  explicit InternalInconsistency(const std::string& m)
      : Error(ErrorKind::kInternalInconsistency, m) {}
};

class InsufficientPool : public Error {
 public:
  InsufficientPool(const std::string& m, std::size_t max_train, std::size_t max_test)
      : Error(ErrorKind::kInsufficientPool, m), max_train_(max_train), max_test_(max_test) {}

  /// Largest train size achievable at the requested mix with the requested test size.
  std::size_t max_train() const noexcept { return max_train_; }
  /// Largest test size achievable at the requested mix with the requested train size.
  std::size_t max_test() const noexcept { return max_test_; }

 private:
  std::size_t max_train_;
  std::size_t max_test_;
};

class EmptyBatch : public Error {
 public:
  EmptyBatch() : Error(ErrorKind::kEmptyBatch, "loss batch is empty") {}
};

class MissingReference : public Error {
 public:
  explicit MissingReference(const std::string& m) : Error(ErrorKind::kMissingReference, m) {}
};

class NumericalFailure : public Error {
 public:
  explicit NumericalFailure(const std::string& m) : Error(ErrorKind::kNumericalFailure, m) {}
};

class MissingMastery : public Error {
 public:
  explicit MissingMastery(const std::string& id)
      : Error(ErrorKind::kMissingMastery, "no probe record for sample: " + id) {}
};

class EmptyEvaluation : public Error {
 public:
  EmptyEvaluation() : Error(ErrorKind::kEmptyEvaluation, "no outcomes to evaluate") {}
};

class IncomparableReports : public Error {
 public:
  explicit IncomparableReports(const std::string& m)
      : Error(ErrorKind::kIncomparableReports, m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error(ErrorKind::kIo, m) {}
};

}  // namespace kbound
