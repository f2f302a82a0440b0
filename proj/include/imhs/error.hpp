#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace imhs {

enum class ErrorKind {
  // kb
  MissingField,
  DuplicateKey,
  WrongCardinality,
  EmptyCombo,
  // taxonomy
  DimMismatch,
  ZeroVector,
  InvalidMatrix,
  InsufficientCategories,
  // corpus
  UnknownFormat,
  BadLabel,
  EmptyDataset,
  ClassTooSmall,
  // gateway
  HttpError,
  ReplayMiss,
  MalformedResponse,
  DumpMiss,
  DimDrift,
  // embed_method
  PartCountMismatch,
  // classifier
  EmptyTrainSet,
  // metrics
  LengthMismatch,
  // runner
  MissingFile,
  EmptyGrid,
  InvalidConfig,
  // generic I/O and parsing
  Io,
  Parse,
};

std::string_view to_string(ErrorKind kind);

/// Every failure the library raises carries a kind so callers (and tests)
/// can branch on it without string matching.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

}  // namespace imhs
