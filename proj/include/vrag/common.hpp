#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vrag {

enum class Label : std::uint8_t { Real, Fake };

/// A label that may be missing (e.g. an unextractable preliminary judgment).
using MaybeLabel = std::optional<Label>;

enum class ManipulationMethod : std::uint8_t {
  Real,
  DeepFakes,
  Face2Face,
  FaceSwap,
  NeuralTextures,
  Other,
};

std::string_view to_string(Label label);
std::string_view to_string(ManipulationMethod method);
std::string to_string(const MaybeLabel& label);  // "Unknown" when empty

/// Case-insensitive; surrounding whitespace and trailing `.,!;:` ignored.
MaybeLabel parse_label(std::string_view text);
std::optional<ManipulationMethod> parse_method(std::string_view text);

inline Label opposite(Label label) {
  return label == Label::Real ? Label::Fake : Label::Real;
}

enum class ErrorCode : std::uint8_t {
  // input validation
  InvalidArgument,
  EmptyAnnotation,
  MalformedClause,
  InvalidEntry,
  DimensionMismatch,
  DuplicateId,
  DanglingEmbeddingRef,
  NonFiniteValue,
  NormMismatch,
  ZeroVector,
  KTooLarge,
  EvenK,
  InvalidResponse,
  MissingSlot,
  UnknownSlot,
  EmptyBatch,
  GroupTooSmall,
  CountTooLarge,
  MissingGold,
  InvalidGold,
  StageOverlap,
  SingleClass,
  InconsistentLabel,
  NoAdversarialSamples,
  ZeroTotal,
  ParseError,
  // runtime
  Io,
  ChecksumMismatch,
  VersionUnsupported,
  TeacherFormatFailure,
  JudgeFormatFailure,
  Transport,
  Remote,
  MalformedPayload,
  UnscriptedRequest,
};

std::string_view to_string(ErrorCode code);

/// True for codes caused by bad inputs or configuration rather than by the
/// environment (files, network, remote models).
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  /// The message without the leading error-code name.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace vrag
