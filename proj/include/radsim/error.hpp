#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace radsim {

enum class ErrorKind {
  // ingestion
  Io,
  MissingColumn,
  DuplicateReportId,
  EmptyText,
  UnknownLabelColumn,
  InvalidCellValue,
  MissingReportId,
  EmptyCorpus,
  OverlappingGroups,
  InvalidConfig,
  // metrics and similarity
  InvalidN,
  SchemaMismatch,
  ZeroVector,
  LengthMismatch,
  MissingEncoding,
  // chat provider and labeling
  ProviderError,
  RateLimited,
  UnparseableResponse,
  NoMatch,
  AmbiguousMatch,
  EmptyLabelList,
  InvalidArgument,
  // embeddings
  EmptyLabelSet,
  DimensionMismatch,
  NormalizationFailure,
  // harness and reporting
  MissingLabelSet,
  NoValidPairs,
  TooFewValues,
  IncompleteTable,
  EmptyLayer,
  MissingPrerequisite,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (and the CLI
// exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace radsim
