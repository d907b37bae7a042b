#include "vrag/common.hpp"

#include "vrag/text.hpp"

#include <array>
#include <utility>

namespace vrag {

std::string_view to_string(Label label) {
  return label == Label::Real ? "Real" : "Fake";
}

std::string to_string(const MaybeLabel& label) {
  return label ? std::string(to_string(*label)) : std::string("Unknown");
}

namespace {
constexpr std::array<std::pair<ManipulationMethod, std::string_view>, 6> kMethods{{
    {ManipulationMethod::Real, "Real"},
    {ManipulationMethod::DeepFakes, "DeepFakes"},
    {ManipulationMethod::Face2Face, "Face2Face"},
    {ManipulationMethod::FaceSwap, "FaceSwap"},
    {ManipulationMethod::NeuralTextures, "NeuralTextures"},
    {ManipulationMethod::Other, "Other"},
}};
}  // namespace

std::string_view to_string(ManipulationMethod method) {
  for (const auto& [m, name] : kMethods) {
    if (m == method) return name;
  }
  return "Other";
}

MaybeLabel parse_label(std::string_view raw) {
  auto s = text::trim(raw);
  while (!s.empty() && std::string_view(".,!;:").find(s.back()) != std::string_view::npos) {
    s.remove_suffix(1);
  }
  s = text::trim(s);
  if (text::iequals(s, "real")) return Label::Real;
  if (text::iequals(s, "fake")) return Label::Fake;
  return std::nullopt;
}

std::optional<ManipulationMethod> parse_method(std::string_view raw) {
  const auto s = text::trim(raw);
  for (const auto& [m, name] : kMethods) {
    if (text::iequals(s, name)) return m;
  }
  return std::nullopt;
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyAnnotation: return "EmptyAnnotation";
    case ErrorCode::MalformedClause: return "MalformedClause";
    case ErrorCode::InvalidEntry: return "InvalidEntry";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DanglingEmbeddingRef: return "DanglingEmbeddingRef";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::NormMismatch: return "NormMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::EvenK: return "EvenK";
    case ErrorCode::InvalidResponse: return "InvalidResponse";
    case ErrorCode::MissingSlot: return "MissingSlot";
    case ErrorCode::UnknownSlot: return "UnknownSlot";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::GroupTooSmall: return "GroupTooSmall";
    case ErrorCode::CountTooLarge: return "CountTooLarge";
    case ErrorCode::MissingGold: return "MissingGold";
    case ErrorCode::InvalidGold: return "InvalidGold";
    case ErrorCode::StageOverlap: return "StageOverlap";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::InconsistentLabel: return "InconsistentLabel";
    case ErrorCode::NoAdversarialSamples: return "NoAdversarialSamples";
    case ErrorCode::ZeroTotal: return "ZeroTotal";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::Io: return "Io";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::TeacherFormatFailure: return "TeacherFormatFailure";
    case ErrorCode::JudgeFormatFailure: return "JudgeFormatFailure";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::Remote: return "Remote";
    case ErrorCode::MalformedPayload: return "MalformedPayload";
    case ErrorCode::UnscriptedRequest: return "UnscriptedRequest";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) {
  return code < ErrorCode::Io;
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

}  // namespace vrag
