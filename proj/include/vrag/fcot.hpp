#pragma once

// Forensic chain-of-thought responses: four tagged sections
//
//   <Preliminary Visual Analysis> ... </Preliminary Visual Analysis>
//   <RAG Reference Information Analysis> ... </RAG Reference Information Analysis>
//   <Fusion, Reasoning, and Decision> ... </Fusion, Reasoning, and Decision>
//   <Answer> Real|Fake </Answer>

#include "vrag/common.hpp"
#include "vrag/retrieval.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vrag::fcot {

enum class SectionTag : std::uint8_t {
  PreliminaryVisualAnalysis,
  RagReferenceInformationAnalysis,
  FusionReasoningAndDecision,
  Answer,
};

inline constexpr std::array<SectionTag, 4> kSectionOrder{
    SectionTag::PreliminaryVisualAnalysis, SectionTag::RagReferenceInformationAnalysis,
    SectionTag::FusionReasoningAndDecision, SectionTag::Answer};

/// The literal tag name, e.g. "Fusion, Reasoning, and Decision".
std::string_view tag_name(SectionTag tag);

enum class SampleKind : std::uint8_t {
  CrossVerification,
  EvidenceGuidedCorrection,
  ResilientRejection,
};

std::string_view to_string(SampleKind kind);
std::optional<SampleKind> parse_sample_kind(std::string_view text);

enum class ViolationCode : std::uint8_t {
  MissingSection,
  DuplicateSection,
  OutOfOrder,
  UnmatchedTag,
  BadAnswerToken,
};

std::string_view to_string(ViolationCode code);

struct Violation {
  ViolationCode code;
  std::optional<SectionTag> section;

  bool operator==(const Violation&) const = default;
};

std::string to_string(const Violation& v);  // e.g. "MissingSection(Answer)"

enum class ParseMode : std::uint8_t {
  Strict,   // case-sensitive tags; answer token must be exactly Real or Fake
  Lenient,  // case-insensitive tags, `<Tag>:` accepted, answer normalized
};

struct FCotResponse {
  std::string preliminary;
  std::string rag_analysis;
  std::string fusion;
  MaybeLabel answer;
  MaybeLabel s1_pred;
  bool format_valid = false;
  std::vector<Violation> violations;
};

/// Never throws. Malformed input gives format_valid == false and the full
/// violation list. The answer is filled whenever its token normalizes to a
/// label, even in strict mode when the raw token was not canonical.
FCotResponse parse_fcot(std::string_view text, ParseMode mode = ParseMode::Strict);

/// Canonical text. Throws InvalidResponse for format-invalid responses, for
/// section text that itself contains a section tag, and when s1_pred does not
/// agree with what extract_s1_pred reads from the preliminary section.
std::string serialize_fcot(const FCotResponse& response);

/// `Initial Judgment: <label>` marker if present (last one wins), otherwise
/// the last standalone real/fake word, otherwise Unknown.
MaybeLabel extract_s1_pred(std::string_view preliminary);

/// Appends an `Initial Judgment:` line unless the section already carries an
/// explicit marker.
std::string with_initial_judgment(std::string_view preliminary, Label label);
bool has_initial_judgment_marker(std::string_view preliminary);

struct EvidenceBlock {
  std::string text;
  std::vector<std::string> warnings;
};

/// `i. ("<Label>: <annotation>", <similarity, 2 decimals>)` per item.
EvidenceBlock format_evidence_block(const retrieval::EvidenceBundle& bundle);

nlohmann::json to_json(const FCotResponse& response);

}  // namespace vrag::fcot
