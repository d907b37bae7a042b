#pragma once

// Stage partitioning, training-sample typing, gold F-CoT construction through
// a teacher model, and stage-wise dataset and recipe export.

#include "vrag/common.hpp"
#include "vrag/fcot.hpp"
#include "vrag/gateway.hpp"
#include "vrag/prompt.hpp"
#include "vrag/retrieval.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace vrag::dataset {

// --- partitioning -------------------------------------------------------------

struct VideoItem {
  std::string video_id;
  Label label = Label::Real;
};

struct StagePartition {
  std::vector<std::string> stage1_videos;   // sorted
  std::vector<std::string> stage23_videos;  // sorted
  std::uint64_t seed = 0;

  std::string digest() const;  // sha256 over both id lists
};

/// Label-stratified split: per-class quotas by largest remainder, then a
/// seeded draw inside each class. Throws CountTooLarge (stage1_count >= size),
/// DuplicateId.
StagePartition partition_stages(std::span<const VideoItem> inventory, std::size_t stage1_count,
                                std::uint64_t seed);

struct PoolSplit {
  std::vector<std::string> stage2_videos;  // sorted
  std::vector<std::string> stage3_videos;  // sorted
  double stage2_fraction = 0.5;
};

/// Splits the Stage-2/3 pool, stratified the same way. Throws InvalidArgument
/// for a fraction outside [0, 1].
PoolSplit split_pool(std::span<const VideoItem> pool, double stage2_fraction, std::uint64_t seed);

nlohmann::json to_json(const StagePartition& p);
nlohmann::json to_json(const PoolSplit& p);

// --- sample typing ------------------------------------------------------------

fcot::SampleKind classify_sample(bool s1_correct, bool rag_correct);

/// The preliminary judgment a gold response of this kind must state:
/// the ground truth for cross-verification and resilient rejection, the
/// opposite label for evidence-guided correction.
Label gold_initial_judgment(fcot::SampleKind kind, Label ground_truth);

struct SampleRecord {
  std::string sample_id;
  std::string video_id;
  std::string image_ref;
  Label ground_truth = Label::Real;
  MaybeLabel s1_pred;
  std::string s1_mode = "no-rag";  // which inference mode produced s1_pred
  retrieval::EvidenceBundle bundle;
  fcot::SampleKind kind = fcot::SampleKind::CrossVerification;
  std::optional<std::string> gold_fcot;
  std::string teacher_template_id;
  int attempts = 0;

  bool s1_correct() const { return s1_pred && *s1_pred == ground_truth; }
  bool rag_correct() const { return bundle.majority_label == ground_truth; }
};

/// Fills kind and teacher_template_id from s1_pred and the bundle. An unknown
/// s1_pred counts as an incorrect preliminary judgment.
void assign_kind(SampleRecord& record);

/// Checks the kind invariant and, when present, that the gold text parses
/// strictly with answer == ground truth. Throws InvalidGold.
void validate_sample(const SampleRecord& record);

nlohmann::json to_json(const SampleRecord& record);
SampleRecord sample_from_json(const nlohmann::json& j);

struct KindReport {
  std::map<fcot::SampleKind, std::uint64_t> counts;
  std::uint64_t mixed_evidence = 0;  // bundles holding both labels
  std::uint64_t unknown_s1 = 0;
};

KindReport kind_report(std::span<const SampleRecord> records);
nlohmann::json to_json(const KindReport& report);

// --- gold construction --------------------------------------------------------

struct TeacherOptions {
  int max_attempts = 3;
  int parallel = 4;
};

/// Renders the kind's teacher template, asks the teacher, and keeps the first
/// reply that parses (lenient) with answer == ground truth and a preliminary
/// judgment matching the kind. The stored gold is the canonical serialization
/// with an explicit `Initial Judgment:` line. Throws TeacherFormatFailure;
/// gateway errors propagate.
SampleRecord build_fcot_sample(SampleRecord record, gateway::Gateway& teacher,
                               const prompt::TemplateLibrary& templates,
                               const TeacherOptions& options = {});

struct BuildOutcome {
  std::optional<SampleRecord> record;
  std::optional<Error> error;
};

/// build_fcot_sample over many records on up to `options.parallel` workers;
/// results are positional.
std::vector<BuildOutcome> build_fcot_batch(const std::vector<SampleRecord>& records,
                                           gateway::Gateway& teacher,
                                           const prompt::TemplateLibrary& templates,
                                           const TeacherOptions& options = {});

// --- exports ------------------------------------------------------------------

struct Stage1Frame {
  std::string sample_id;
  std::string image_ref;
  Label label = Label::Real;
};

/// One `{sample_id, image_ref, question, label}` line per frame. Returns the
/// number of records written.
std::size_t export_stage1_vqa(std::span<const Stage1Frame> frames,
                              const prompt::PromptTemplate& question,
                              const std::filesystem::path& out);

/// The inference prompt for a sample (image attached separately).
std::vector<prompt::Message> inference_messages(const prompt::PromptTemplate& inference,
                                                const std::string& image_ref,
                                                const retrieval::EvidenceBundle& bundle);

/// `{sample_id, image_ref, prompt, target, kind, ground_truth}` per sample.
/// Throws MissingGold, InvalidGold.
KindReport export_stage2_sft(std::span<const SampleRecord> samples,
                             const prompt::PromptTemplate& inference,
                             const std::filesystem::path& out);

/// Prompts only; rewards come from the reward engine. Throws StageOverlap when
/// a sample's video belongs to an earlier stage.
std::size_t export_stage3_prompts(std::span<const SampleRecord> samples,
                                  const std::set<std::string>& earlier_stage_videos,
                                  const prompt::PromptTemplate& inference,
                                  const std::filesystem::path& out);

// --- recipes ------------------------------------------------------------------

struct TrainingRecipe {
  int stage = 1;
  std::string objective;
  int epochs = 0;
  double learning_rate = 0.0;
  int batch_size = 0;
  std::map<std::string, double> extra_params;
  std::map<std::string, int> adapter_params;
  std::vector<std::string> tuned_submodules;
  std::vector<std::string> frozen_submodules;
  std::vector<std::string> augmentations;
};

/// Throws InvalidArgument for stages other than 1, 2, 3.
TrainingRecipe export_training_recipe(int stage);
nlohmann::json to_json(const TrainingRecipe& recipe);

}  // namespace vrag::dataset
