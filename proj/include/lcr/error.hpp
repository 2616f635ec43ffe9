#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lcr {

enum class ErrorCode {
  EmptyBody,
  MissingLabel,
  DuplicateCandidateId,
  UnreadableFile,
  MissingQuerySummary,
  InvalidExponent,
  InvalidSubsetCode,
  EmptyInput,
  EmptyScores,
  EmptyDocument,
  LengthMismatch,
  BadMagic,
  VersionMismatch,
  ShapeMismatch,
  MalformedLine,
  NoSummarizedDocuments,
  NoPairs,
  NoRelevant,
  EmptyResults,
  TooFewQueries,
  MissingArtifact,
  InvalidConfig,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyBody: return "EmptyBody";
    case ErrorCode::MissingLabel: return "MissingLabel";
    case ErrorCode::DuplicateCandidateId: return "DuplicateCandidateId";
    case ErrorCode::UnreadableFile: return "UnreadableFile";
    case ErrorCode::MissingQuerySummary: return "MissingQuerySummary";
    case ErrorCode::InvalidExponent: return "InvalidExponent";
    case ErrorCode::InvalidSubsetCode: return "InvalidSubsetCode";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyScores: return "EmptyScores";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::NoSummarizedDocuments: return "NoSummarizedDocuments";
    case ErrorCode::NoPairs: return "NoPairs";
    case ErrorCode::NoRelevant: return "NoRelevant";
    case ErrorCode::EmptyResults: return "EmptyResults";
    case ErrorCode::TooFewQueries: return "TooFewQueries";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable code; the
/// message carries the human context (offending path, line number, sizes).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lcr
