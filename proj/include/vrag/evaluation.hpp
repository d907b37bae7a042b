#pragma once

// Metrics: answer-to-score conversion, video-level AUC, robustness rate under
// misleading evidence, compute-cost shares, and judge-based explanation scores.

#include "vrag/common.hpp"
#include "vrag/fcot.hpp"
#include "vrag/gateway.hpp"
#include "vrag/prompt.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vrag::eval {

// --- scores -----------------------------------------------------------------

enum class ScoreRule : std::uint8_t {
  LogprobThenHard,  // answer-token probabilities when exposed, else hard labels
  Hard,
};

std::string_view to_string(ScoreRule rule);
ScoreRule parse_score_rule(std::string_view text);  // throws InvalidArgument

struct ScoreResult {
  double score = 0.5;
  std::string route;  // "logprob", "hard" or "unparseable"
};

/// Probability that the frame is fake. Unparseable answers score 0.5.
ScoreResult answer_to_score(const fcot::FCotResponse& response,
                            const std::optional<std::vector<gateway::TokenLogprob>>& logprobs,
                            ScoreRule rule = ScoreRule::LogprobThenHard);

// --- video-level AUC ----------------------------------------------------------

struct FrameScore {
  std::string video_id;
  std::string frame_id;
  double score = 0.0;
  Label ground_truth = Label::Real;
};

enum class Aggregation : std::uint8_t { Mean, Median, Max };

std::string_view to_string(Aggregation aggregation);
Aggregation parse_aggregation(std::string_view text);  // throws InvalidArgument

struct VideoScore {
  std::string video_id;
  double score = 0.0;
  Label label = Label::Real;
  std::size_t frames = 0;
};

/// One score per video, ordered by video id. Throws InvalidArgument for
/// scores outside [0, 1], InconsistentLabel when a video mixes labels.
std::vector<VideoScore> aggregate_videos(std::span<const FrameScore> frames,
                                         Aggregation aggregation = Aggregation::Mean);

/// P(fake > real) + 0.5 P(tie) over all cross-class pairs, by explicit pair
/// counting. Throws SingleClass.
double auc_pairwise(std::span<const VideoScore> videos);

/// Same quantity from mid-ranks in O(n log n); both paths reduce to the same
/// integer ratio, so they agree exactly.
double auc_rank(std::span<const VideoScore> videos);

double video_level_auc(std::span<const FrameScore> frames,
                       Aggregation aggregation = Aggregation::Mean);

// --- robustness ---------------------------------------------------------------

struct RobustnessRecord {
  std::string sample_id;
  bool s1_correct = false;
  bool rag_correct = false;
  bool final_correct = false;

  /// The preliminary judgment was right but the evidence majority was wrong.
  bool adversarial() const { return s1_correct && !rag_correct; }
};

struct RobustnessResult {
  std::string name;
  std::int64_t adversarial = 0;
  std::int64_t correct = 0;
  double rate_percent = 0.0;  // exact ratio rounded half-even to 2 decimals
};

/// Throws NoAdversarialSamples.
RobustnessResult robustness_rate(std::span<const RobustnessRecord> records, std::string name = {});
RobustnessResult robustness_from_counts(std::int64_t adversarial, std::int64_t correct,
                                        std::string name = {});
/// Total correct over total adversarial.
RobustnessResult weighted_robustness(std::span<const RobustnessResult> sets,
                                     std::string name = "Weighted");

// --- compute cost -------------------------------------------------------------

struct CostProfile {
  std::vector<std::pair<std::string, double>> components;  // name, GFLOPs
};

struct CostShare {
  std::string name;
  double gflops = 0.0;
  double percent = 0.0;  // 2 decimals; shares sum to exactly 100.00
};

/// Largest-remainder apportionment of 10000 hundredths of a percent.
/// Throws ZeroTotal, InvalidArgument (negative or non-finite), DuplicateId.
std::vector<CostShare> cost_ratio(const CostProfile& profile);

// --- explanation judging ------------------------------------------------------

struct JudgeScore {
  std::string sample_id;
  int accuracy = 0;
  int faithfulness = 0;
  int professionalism = 0;

  int total() const { return accuracy + faithfulness + professionalism; }
};

/// Reads `accuracy: d`, `faithfulness: d`, `professionalism: d` lines.
/// Throws JudgeFormatFailure for missing, repeated, or out-of-range scores.
JudgeScore parse_judge_reply(std::string sample_id, std::string_view reply);

struct JudgeSample {
  std::string sample_id;
  std::string explanation;
  std::string image_ref;
  Label ground_truth = Label::Real;
};

struct JudgeMissing {
  std::string sample_id;
  std::string reason;
};

/// An exact mean: numerator / denominator.
struct ExactMean {
  std::string name;
  std::int64_t numerator = 0;
  std::int64_t denominator = 1;

  double value() const;
  double rounded(int decimals = 2) const;  // half-even
  /// A mean already reported with `decimals` places, e.g. 7.55 -> 755/100.
  static ExactMean from_decimal(std::string name, double value, int decimals = 2);
};

struct JudgeRun {
  std::string judge;
  std::vector<JudgeScore> scores;
  std::vector<JudgeMissing> missing;
  ExactMean mean_total;  // over scored samples
};

/// Renders the rubric per sample and submits through the gateway. Replies
/// that fail to parse are re-requested up to `max_attempts` rounds, then
/// reported as missing.
JudgeRun judge_explanations(gateway::Gateway& judge, std::span<const JudgeSample> samples,
                            const prompt::PromptTemplate& rubric, std::string judge_name = "judge",
                            int max_attempts = 3);

/// Average of per-judge means, computed exactly and rounded half-even.
ExactMean cross_judge_average(std::span<const ExactMean> means);

// --- reports ------------------------------------------------------------------

struct AucRow {
  std::string dataset;
  double auc = 0.0;
  std::size_t real_videos = 0;
  std::size_t fake_videos = 0;
};

std::string render_auc_table(std::span<const AucRow> rows);
std::string render_robustness_table(std::span<const RobustnessResult> sets,
                                    const RobustnessResult& weighted);
std::string render_cost_table(std::span<const CostShare> shares);
std::string render_judge_table(std::span<const ExactMean> judges, const ExactMean& average);

nlohmann::json to_json(const RobustnessResult& r);
nlohmann::json to_json(const CostShare& c);
nlohmann::json to_json(const JudgeScore& s);
nlohmann::json to_json(const ExactMean& m);

FrameScore frame_score_from_json(const nlohmann::json& j);
RobustnessRecord robustness_record_from_json(const nlohmann::json& j);
CostProfile cost_profile_from_json(const nlohmann::json& j);

}  // namespace vrag::eval
