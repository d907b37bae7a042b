#pragma once

// Prompt templates: role-tagged segments with `{{slot}}` markers.
//
// Asset file layout (UTF-8):
//
//   --- system ---
//   text with {{slots}}
//   --- user ---
//   more text
//
// Built-in assets are compiled into the library; a directory of `*.tmpl`
// files can override or extend them.

#include "vrag/common.hpp"
#include "vrag/fcot.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace vrag::prompt {

enum class Role : std::uint8_t { System, User, Assistant };

std::string_view to_string(Role role);  // "system", "user", "assistant"
Role parse_role(std::string_view text);  // throws InvalidArgument

struct Segment {
  Role role = Role::User;
  std::string text;

  bool operator==(const Segment&) const = default;
};

struct PromptTemplate {
  std::string template_id;
  std::vector<Segment> segments;
  std::set<std::string> required_slots;
};

struct Message {
  Role role = Role::User;
  std::string text;

  bool operator==(const Message&) const = default;
};

using SlotMap = std::map<std::string, std::string, std::less<>>;

/// Parses the asset format above. Text before the first marker must be blank.
/// Throws ParseError.
PromptTemplate parse_template(std::string template_id, std::string_view text);

/// Substitutes every `{{slot}}` in one pass, so slot values containing marker
/// syntax are inserted verbatim. Throws MissingSlot, and UnknownSlot when
/// strict and a supplied slot is not declared by the template.
std::vector<Message> render_prompt(const PromptTemplate& tmpl, const SlotMap& slots,
                                   bool strict = true);

/// All messages joined as "role: text" blocks; handy for fingerprints and logs.
std::string flatten(const std::vector<Message>& messages);

namespace ids {
inline constexpr std::string_view kInference = "inference";
inline constexpr std::string_view kStage1Question = "stage1_vqa_question";
inline constexpr std::string_view kJudgeRubric = "judge_rubric";
}  // namespace ids

namespace slots {
inline constexpr std::string_view kImageRef = "image_ref";
inline constexpr std::string_view kEvidenceBlock = "evidence_block";
inline constexpr std::string_view kGroundTruth = "ground_truth";
inline constexpr std::string_view kExplanation = "explanation";
inline constexpr std::string_view kManipulatedImage = "manipulated_image_path";
inline constexpr std::string_view kOriginalImage = "original_image_path";
inline constexpr std::string_view kRealImage = "real_image_path";
}  // namespace slots

/// Throws InvalidArgument for ManipulationMethod::Other.
std::string annotation_template_id(ManipulationMethod method);
std::string teacher_template_id(fcot::SampleKind kind);

class TemplateLibrary {
 public:
  /// The assets compiled into the library.
  static TemplateLibrary builtin();

  /// Adds or replaces templates from every `*.tmpl` file in `dir`; the file
  /// stem is the template id.
  void load_dir(const std::filesystem::path& dir);
  void add(PromptTemplate tmpl);

  bool contains(std::string_view id) const;
  const PromptTemplate& get(std::string_view id) const;  // throws InvalidArgument
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
};

}  // namespace vrag::prompt
