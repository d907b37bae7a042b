#include "vrag/reward.hpp"

#include "vrag/text.hpp"

#include <cmath>

namespace vrag::reward {

std::string_view to_string(UnknownS1Policy policy) {
  switch (policy) {
    case UnknownS1Policy::TreatAsNoConflict: return "TreatAsNoConflict";
    case UnknownS1Policy::TreatAsConflict: return "TreatAsConflict";
    case UnknownS1Policy::ZeroConflictReward: return "ZeroConflictReward";
  }
  return "";
}

UnknownS1Policy parse_unknown_policy(std::string_view s) {
  for (auto p : {UnknownS1Policy::TreatAsNoConflict, UnknownS1Policy::TreatAsConflict,
                 UnknownS1Policy::ZeroConflictReward}) {
    if (text::iequals(text::trim(s), to_string(p))) return p;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown s1 policy '" + std::string(s) + "'");
}

void RewardConfig::validate() const {
  for (double v : {alpha, beta, format_reward_valid, format_reward_invalid, epsilon}) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::InvalidArgument, "reward config values must be finite");
    }
  }
  if (epsilon < 0) throw Error(ErrorCode::InvalidArgument, "epsilon must be non-negative");
}

int detect_conflict(const MaybeLabel& s1_pred, Label rag_majority, UnknownS1Policy policy) {
  if (s1_pred) return *s1_pred != rag_majority ? 1 : 0;
  return policy == UnknownS1Policy::TreatAsConflict ? 1 : 0;
}

double conflict_reward(int A, int C) {
  if ((A != 0 && A != 1) || (C != 0 && C != 1)) {
    throw Error(ErrorCode::InvalidArgument, "A and C must be 0 or 1");
  }
  if (A == 1) return C == 1 ? 2.0 : 1.0;
  return C == 1 ? -2.0 : -1.0;
}

double format_reward(const fcot::FCotResponse& response, const RewardConfig& config) {
  return response.format_valid ? config.format_reward_valid : config.format_reward_invalid;
}

RewardRecord score_rollout(std::string_view response_text, Label ground_truth,
                           const retrieval::EvidenceBundle& bundle, const RewardConfig& config) {
  const auto parsed = fcot::parse_fcot(response_text, fcot::ParseMode::Strict);
  RewardRecord rec;
  rec.context.s1_pred = parsed.s1_pred;
  rec.context.rag_majority = bundle.majority_label;
  rec.context.ground_truth = ground_truth;
  rec.context.A = parsed.answer && *parsed.answer == ground_truth ? 1 : 0;
  rec.context.C = detect_conflict(parsed.s1_pred, bundle.majority_label, config.unknown_s1_policy);
  const bool zeroed =
      !parsed.s1_pred && config.unknown_s1_policy == UnknownS1Policy::ZeroConflictReward;
  rec.r_conflict = zeroed ? 0.0 : conflict_reward(rec.context.A, rec.context.C);
  rec.f_format = format_reward(parsed, config);
  rec.R_i = config.alpha * rec.r_conflict + config.beta * rec.f_format;
  return rec;
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const auto half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

double batch_reward(std::span<const RewardRecord> records) {
  if (records.empty()) throw Error(ErrorCode::EmptyBatch, "no reward records");
  std::vector<double> values;
  values.reserve(records.size());
  for (const auto& r : records) values.push_back(r.R_i);
  return pairwise_sum(values) / static_cast<double>(values.size());
}

GroupAdvantages group_advantages(std::span<const double> rewards, double epsilon) {
  if (rewards.size() < 2) {
    throw Error(ErrorCode::GroupTooSmall, "a group needs at least two rewards, got " +
                                              std::to_string(rewards.size()));
  }
  GroupAdvantages g;
  g.rewards.assign(rewards.begin(), rewards.end());
  const auto n = static_cast<double>(rewards.size());
  g.mean = pairwise_sum(rewards) / n;
  std::vector<double> sq;
  sq.reserve(rewards.size());
  for (double r : rewards) sq.push_back((r - g.mean) * (r - g.mean));
  g.std = std::sqrt(pairwise_sum(sq) / n);
  g.advantages.assign(rewards.size(), 0.0);
  if (g.std > epsilon) {
    for (std::size_t i = 0; i < rewards.size(); ++i) {
      g.advantages[i] = (rewards[i] - g.mean) / g.std;
    }
  }
  return g;
}

nlohmann::json to_json(const RewardRecord& r) {
  return {{"A", r.context.A},
          {"C", r.context.C},
          {"s1_pred", to_string(r.context.s1_pred)},
          {"rag_majority", to_string(r.context.rag_majority)},
          {"ground_truth", to_string(r.context.ground_truth)},
          {"r_conflict", r.r_conflict},
          {"f_format", r.f_format},
          {"R_i", r.R_i}};
}

}  // namespace vrag::reward
