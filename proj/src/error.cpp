#include "radsim/error.hpp"

namespace radsim {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "Io";
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::DuplicateReportId: return "DuplicateReportId";
    case ErrorKind::EmptyText: return "EmptyText";
    case ErrorKind::UnknownLabelColumn: return "UnknownLabelColumn";
    case ErrorKind::InvalidCellValue: return "InvalidCellValue";
    case ErrorKind::MissingReportId: return "MissingReportId";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::OverlappingGroups: return "OverlappingGroups";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::InvalidN: return "InvalidN";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::MissingEncoding: return "MissingEncoding";
    case ErrorKind::ProviderError: return "ProviderError";
    case ErrorKind::RateLimited: return "RateLimited";
    case ErrorKind::UnparseableResponse: return "UnparseableResponse";
    case ErrorKind::NoMatch: return "NoMatch";
    case ErrorKind::AmbiguousMatch: return "AmbiguousMatch";
    case ErrorKind::EmptyLabelList: return "EmptyLabelList";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::EmptyLabelSet: return "EmptyLabelSet";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NormalizationFailure: return "NormalizationFailure";
    case ErrorKind::MissingLabelSet: return "MissingLabelSet";
    case ErrorKind::NoValidPairs: return "NoValidPairs";
    case ErrorKind::TooFewValues: return "TooFewValues";
    case ErrorKind::IncompleteTable: return "IncompleteTable";
    case ErrorKind::EmptyLayer: return "EmptyLayer";
    case ErrorKind::MissingPrerequisite: return "MissingPrerequisite";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind) {}

}  // namespace radsim
