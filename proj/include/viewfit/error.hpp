#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace viewfit {

enum class ErrorCode {
  NonMonotone,
  TooShort,
  NegativeIncrement,
  DegenerateZeroViews,
  DegenerateZeroAge,
  InvalidSeries,
  SingularParams,
  InvalidParams,
  DomainError,
  ZeroVariance,
  BadInitialPoint,
  ShapeError,
  InsufficientDf,
  TooShortForClassification,
  NoCandidates,
  EmptyFuture,
  NoEligibleRecords,
  ParseError,
  IoError,
  InvalidArgument,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonMonotone: return "NON_MONOTONE";
    case ErrorCode::TooShort: return "TOO_SHORT";
    case ErrorCode::NegativeIncrement: return "NEGATIVE_INCREMENT";
    case ErrorCode::DegenerateZeroViews: return "DEGENERATE_ZERO_VIEWS";
    case ErrorCode::DegenerateZeroAge: return "DEGENERATE_ZERO_AGE";
    case ErrorCode::InvalidSeries: return "INVALID_SERIES";
    case ErrorCode::SingularParams: return "SINGULAR_PARAMS";
    case ErrorCode::InvalidParams: return "INVALID_PARAMS";
    case ErrorCode::DomainError: return "DOMAIN_ERROR";
    case ErrorCode::ZeroVariance: return "ZERO_VARIANCE";
    case ErrorCode::BadInitialPoint: return "BAD_INITIAL_POINT";
    case ErrorCode::ShapeError: return "SHAPE_ERROR";
    case ErrorCode::InsufficientDf: return "INSUFFICIENT_DF";
    case ErrorCode::TooShortForClassification: return "TOO_SHORT_FOR_CLASSIFICATION";
    case ErrorCode::NoCandidates: return "NO_CANDIDATES";
    case ErrorCode::EmptyFuture: return "EMPTY_FUTURE";
    case ErrorCode::NoEligibleRecords: return "NO_ELIGIBLE_RECORDS";
    case ErrorCode::ParseError: return "PARSE_ERROR";
    case ErrorCode::IoError: return "IO_ERROR";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
  }
  return "UNKNOWN";
}

/// Exception carrying a stable machine-readable code; what() is "<CODE>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace viewfit
