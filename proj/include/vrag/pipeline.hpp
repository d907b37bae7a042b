#pragma once

// Configuration and subcommands of the `vrag` command-line tool. Each
// subcommand reads its inputs from the config and from earlier artifacts under
// the output directory, and writes its own artifacts plus a manifest entry.

#include "vrag/evaluation.hpp"
#include "vrag/gateway.hpp"
#include "vrag/retrieval.hpp"
#include "vrag/reward.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace vrag::pipeline {

inline constexpr std::string_view kToolName = "vrag";
inline constexpr std::string_view kToolVersion = "0.1.0";

inline constexpr std::string_view kPolicyRole = "policy";
inline constexpr std::string_view kTeacherRole = "teacher";
inline constexpr std::string_view kJudgeRole = "judge";

struct PipelineConfig {
  std::filesystem::path base_dir;  // relative paths in the file resolve against this

  // inputs
  std::optional<std::filesystem::path> corpus_source;    // entries.jsonl + vectors.bin
  std::optional<std::filesystem::path> inventory;        // video inventory records
  std::optional<std::filesystem::path> queries;          // query batch records
  std::optional<std::filesystem::path> annotate_source;  // frames to annotate
  std::optional<std::filesystem::path> templates_dir;    // overrides built-in templates
  std::map<Label, std::uint64_t> sampling_targets;

  retrieval::RetrievalConfig retrieval;
  reward::RewardConfig reward;
  std::map<std::string, gateway::GatewayConfig, std::less<>> gateways;

  // dataset builder
  std::optional<std::uint64_t> seed;
  std::size_t stage1_count = 0;  // 0: no stage partition
  double stage2_fraction = 0.5;
  int teacher_attempts = 3;
  int parallel = 4;
  int rollouts_per_sample = 1;

  // evaluation
  eval::Aggregation aggregation = eval::Aggregation::Mean;
  eval::ScoreRule score_rule = eval::ScoreRule::LogprobThenHard;
  std::string dataset_name = "default";
  std::optional<std::filesystem::path> eval_scores;      // precomputed frame scores
  std::optional<std::filesystem::path> eval_robustness;  // precomputed robustness records
  std::vector<eval::RobustnessResult> robustness_counts;
  std::optional<eval::CostProfile> cost;
  std::vector<std::string> judges;  // gateway roles used as judges
  int judge_attempts = 3;

  const gateway::GatewayConfig& gateway(std::string_view role) const;
};

/// Unknown keys are rejected. Throws InvalidArgument, ParseError.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const PipelineConfig& config);

struct Flags {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k;
  std::filesystem::path out = "out";
  bool mock = false;
  bool dry_run = false;
  bool strict_format = false;
};

/// Output layout below `--out`.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path corpus() const { return root / "corpus"; }
  std::filesystem::path index() const { return root / "index"; }
  std::filesystem::path datasets() const { return root / "datasets"; }
  std::filesystem::path rollouts() const { return root / "rollouts"; }
  std::filesystem::path reports() const { return root / "reports"; }
  std::filesystem::path manifest() const { return root / "manifest.json"; }
};

/// Replaces the network for every gateway role, e.g. with a MockResponder.
using TransportFactory =
    std::function<std::shared_ptr<gateway::Transport>(std::string_view role)>;

struct RunContext {
  PipelineConfig config;
  Flags flags;
  Layout layout;
  TransportFactory transport_factory;  // empty: HTTP, or the rule mock under --mock
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
};

/// Parses argv (without the program name) and runs one subcommand. Returns
/// 0 on success, 1 on validation errors, 2 on runtime errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        TransportFactory transport_factory = {});

// Subcommands, callable directly once a context is set up. Each throws
// vrag::Error; `run` maps the code to the exit status.
void cmd_ingest(RunContext& ctx);
void cmd_plan_sample(RunContext& ctx);
void cmd_index(RunContext& ctx);
void cmd_retrieve(RunContext& ctx);
void cmd_annotate_fkd(RunContext& ctx);
void cmd_classify(RunContext& ctx);
void cmd_build_fcot(RunContext& ctx);
void cmd_export_stage(RunContext& ctx, int stage);
void cmd_infer(RunContext& ctx);
void cmd_score_rewards(RunContext& ctx);
void cmd_eval(RunContext& ctx);
void cmd_report(RunContext& ctx);

/// Renders the tables of an evaluation summary (reports/eval.json).
std::string render_report(const nlohmann::json& summary);

/// sha256 over the canonical dump of the effective configuration.
std::string config_digest(const PipelineConfig& config);

}  // namespace vrag::pipeline
