#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace psychoval {

enum class Errc {
  ZeroVariance,
  LengthMismatch,
  InsufficientRows,
  NoConvergence,
  SingularMatrix,
  NotPositiveDefinite,
  NotSymmetric,
  DomainError,
  ParseError,
  RangeError,
  DuplicateId,
  UnknownItem,
  MissingDataError,
  EmptyAfterDeletion,
  EmptyDataset,
  TooFewItems,
  NoOverlap,
  SampleTooSmall,
  CannotReachThreshold,
  BadFactorCount,
  UniquenessNegative,
  InvalidSpec,
  InvalidConfig,
  AssumptionsNotMet,
  IoError,
};

[[nodiscard]] constexpr std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::InsufficientRows: return "InsufficientRows";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::SingularMatrix: return "SingularMatrix";
    case Errc::NotPositiveDefinite: return "NotPositiveDefinite";
    case Errc::NotSymmetric: return "NotSymmetric";
    case Errc::DomainError: return "DomainError";
    case Errc::ParseError: return "ParseError";
    case Errc::RangeError: return "RangeError";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::UnknownItem: return "UnknownItem";
    case Errc::MissingDataError: return "MissingDataError";
    case Errc::EmptyAfterDeletion: return "EmptyAfterDeletion";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::TooFewItems: return "TooFewItems";
    case Errc::NoOverlap: return "NoOverlap";
    case Errc::SampleTooSmall: return "SampleTooSmall";
    case Errc::CannotReachThreshold: return "CannotReachThreshold";
    case Errc::BadFactorCount: return "BadFactorCount";
    case Errc::UniquenessNegative: return "UniquenessNegative";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::AssumptionsNotMet: return "AssumptionsNotMet";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

/// Base of every anticipated failure in the toolkit. `name()` is the stable
/// identifier printed by the CLI; `what()` carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }
  [[nodiscard]] std::string_view name() const noexcept { return errc_name(code_); }
  [[nodiscard]] const std::string& detail() const noexcept { return detail_; }
  [[nodiscard]] const std::string& stage() const noexcept { return stage_; }

  /// Returns a copy tagged with the pipeline stage that raised it.
  [[nodiscard]] Error in_stage(std::string stage) const {
    Error e(code_, "stage '" + stage + "': " + detail_);
    e.stage_ = std::move(stage);
    e.value_ = value_;
    return e;
  }

  /// Numeric payload (smallest eigenvalue, last delta, ...); NaN when unused.
  [[nodiscard]] double value() const noexcept { return value_; }
  Error& with_value(double v) noexcept {
    value_ = v;
    return *this;
  }

 private:
  Errc code_;
  std::string detail_;
  std::string stage_;
  double value_ = std::numeric_limits<double>::quiet_NaN();
};

/// Cell-level CSV failure; row is the 1-based line number in the file.
class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::string column, std::string content)
      : Error(Errc::ParseError, "line " + std::to_string(row) + ", column '" + column +
                                    "': cannot parse '" + content + "' as an integer"),
        row_(row),
        column_(std::move(column)),
        content_(std::move(content)) {}

  [[nodiscard]] std::size_t row() const noexcept { return row_; }
  [[nodiscard]] const std::string& column() const noexcept { return column_; }
  [[nodiscard]] const std::string& content() const noexcept { return content_; }

 private:
  std::size_t row_;
  std::string column_;
  std::string content_;
};

class RangeError : public Error {
 public:
  RangeError(std::size_t row, std::string item, int value)
      : Error(Errc::RangeError, "line " + std::to_string(row) + ", item '" + item + "': value " +
                                    std::to_string(value) + " outside Likert bounds"),
        row_(row),
        item_(std::move(item)),
        value_(value) {}

  [[nodiscard]] std::size_t row() const noexcept { return row_; }
  [[nodiscard]] const std::string& item() const noexcept { return item_; }
  [[nodiscard]] int response() const noexcept { return value_; }

 private:
  std::size_t row_;
  std::string item_;
  int value_;
};

}  // namespace psychoval
