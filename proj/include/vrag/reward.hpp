#pragma once

// Process-aware rollout reward: conflict reward, format reward, their weighted
// sum, batch mean, and group-relative advantages for an external trainer.

#include "vrag/common.hpp"
#include "vrag/fcot.hpp"
#include "vrag/retrieval.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vrag::reward {

enum class UnknownS1Policy : std::uint8_t {
  TreatAsNoConflict,
  TreatAsConflict,
  ZeroConflictReward,
};

std::string_view to_string(UnknownS1Policy policy);
UnknownS1Policy parse_unknown_policy(std::string_view text);  // throws InvalidArgument

struct RewardConfig {
  double alpha = 1.0;
  double beta = 1.0;
  double format_reward_valid = 1.0;
  double format_reward_invalid = 0.0;
  UnknownS1Policy unknown_s1_policy = UnknownS1Policy::ZeroConflictReward;
  double epsilon = 1e-8;

  void validate() const;  // throws InvalidArgument on non-finite values
};

struct ConflictContext {
  MaybeLabel s1_pred;
  Label rag_majority = Label::Real;
  Label ground_truth = Label::Real;
  int A = 0;
  int C = 0;
};

struct RewardRecord {
  double r_conflict = 0.0;
  double f_format = 0.0;
  double R_i = 0.0;
  ConflictContext context;
};

struct GroupAdvantages {
  std::vector<double> rewards;
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> advantages;
};

/// C = 1 iff a known s1_pred disagrees with the evidence majority; an unknown
/// s1_pred gives 1 only under TreatAsConflict.
int detect_conflict(const MaybeLabel& s1_pred, Label rag_majority, UnknownS1Policy policy);

/// {(1,1): +2, (1,0): +1, (0,0): -1, (0,1): -2}. Throws InvalidArgument for
/// values outside {0, 1}.
double conflict_reward(int A, int C);

/// Strict-mode validity decides the value.
double format_reward(const fcot::FCotResponse& response, const RewardConfig& config);

RewardRecord score_rollout(std::string_view response_text, Label ground_truth,
                           const retrieval::EvidenceBundle& bundle, const RewardConfig& config);

/// Mean R_i with pairwise summation. Throws EmptyBatch.
double batch_reward(std::span<const RewardRecord> records);

/// Sum with pairwise reduction; exposed for callers that aggregate rewards.
double pairwise_sum(std::span<const double> values);

/// (R_i - mean) / std with population std; all zeros when std <= epsilon.
/// Throws GroupTooSmall for fewer than two rewards.
GroupAdvantages group_advantages(std::span<const double> rewards, double epsilon = 1e-8);

nlohmann::json to_json(const RewardRecord& record);

}  // namespace vrag::reward
