#include "vrag/reward.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <numeric>

namespace vrag::reward {
namespace {

using vrag::testing::fcot_text;

retrieval::EvidenceBundle bundle_with_majority(Label l) {
  retrieval::EvidenceBundle b;
  b.items = {{"a", l, 0.9, "x"}, {"b", l, 0.8, "y"}, {"c", opposite(l), 0.7, "z"}};
  b.majority_label = l;
  return b;
}

TEST(ConflictReward, TruthTable) {
  EXPECT_EQ(conflict_reward(1, 1), 2.0);
  EXPECT_EQ(conflict_reward(1, 0), 1.0);
  EXPECT_EQ(conflict_reward(0, 0), -1.0);
  EXPECT_EQ(conflict_reward(0, 1), -2.0);
  EXPECT_THROW(conflict_reward(2, 0), Error);
}

TEST(ConflictReward, Monotone) {
  for (int c : {0, 1}) EXPECT_GT(conflict_reward(1, c), conflict_reward(0, c));
  EXPECT_GT(conflict_reward(1, 1), conflict_reward(1, 0));
  EXPECT_LT(conflict_reward(0, 1), conflict_reward(0, 0));
}

TEST(Conflict, Disagreement) {
  EXPECT_EQ(detect_conflict(Label::Fake, Label::Real, UnknownS1Policy::ZeroConflictReward), 1);
  EXPECT_EQ(detect_conflict(Label::Real, Label::Real, UnknownS1Policy::ZeroConflictReward), 0);
  EXPECT_EQ(detect_conflict(std::nullopt, Label::Real, UnknownS1Policy::TreatAsConflict), 1);
  EXPECT_EQ(detect_conflict(std::nullopt, Label::Real, UnknownS1Policy::TreatAsNoConflict), 0);
}

TEST(Conflict, EqualsXorOfCorrectness) {
  for (auto gt : {Label::Real, Label::Fake}) {
    for (bool s1_ok : {false, true}) {
      for (bool rag_ok : {false, true}) {
        const Label s1 = s1_ok ? gt : opposite(gt);
        const Label rag = rag_ok ? gt : opposite(gt);
        EXPECT_EQ(detect_conflict(s1, rag, UnknownS1Policy::ZeroConflictReward), s1_ok != rag_ok ? 1 : 0);
      }
    }
  }
}

TEST(FormatReward, Schemes) {
  RewardConfig cfg;
  const auto valid = fcot::parse_fcot(fcot_text("p Real", "r", "f", "Real"));
  EXPECT_EQ(format_reward(valid, cfg), 1.0);
  EXPECT_EQ(format_reward(fcot::parse_fcot("<Answer> Real </Answer>"), cfg), 0.0);
  cfg.format_reward_valid = 2.0;
  cfg.format_reward_invalid = -1.0;
  EXPECT_EQ(format_reward(valid, cfg), 2.0);
}

TEST(ScoreRollout, CorrectAnswerUnderConflict) {
  const auto text = fcot_text("Initial Judgment: Fake", "r", "f", "Real");
  const auto rec = score_rollout(text, Label::Real, bundle_with_majority(Label::Real), {});
  EXPECT_EQ(rec.context.A, 1);
  EXPECT_EQ(rec.context.C, 1);
  EXPECT_EQ(rec.R_i, 3.0);
}

TEST(ScoreRollout, UnparseableWithoutConflict) {
  const auto text = "<Preliminary Visual Analysis>Initial Judgment: Real</Preliminary Visual Analysis> then nothing";
  const auto rec = score_rollout(text, Label::Fake, bundle_with_majority(Label::Real), {});
  EXPECT_EQ(rec.context.A, 0);
  EXPECT_EQ(rec.context.C, 0);
  EXPECT_EQ(rec.R_i, -1.0);
}

TEST(ScoreRollout, WeightedSum) {
  RewardConfig cfg;
  cfg.alpha = 0.5;
  cfg.beta = 2.0;
  const auto text = fcot_text("Initial Judgment: Real", "r", "f", "Real");
  const auto rec = score_rollout(text, Label::Real, bundle_with_majority(Label::Real), cfg);
  EXPECT_EQ(rec.r_conflict, 1.0);
  EXPECT_EQ(rec.R_i, 2.5);
}

TEST(ScoreRollout, UnknownS1ZeroesConflictReward) {
  const auto text = fcot_text("The lighting is even.", "r", "f", "Real");
  const auto rec = score_rollout(text, Label::Real, bundle_with_majority(Label::Real), {});
  EXPECT_EQ(rec.r_conflict, 0.0);
  EXPECT_EQ(rec.R_i, 1.0);
}

RewardRecord with_r(double r) {
  RewardRecord rec;
  rec.R_i = r;
  return rec;
}

TEST(BatchReward, Mean) {
  const std::vector<RewardRecord> recs{with_r(3.0), with_r(0.0), with_r(-1.0)};
  EXPECT_DOUBLE_EQ(batch_reward(recs), 2.0 / 3.0);
  const std::vector<RewardRecord> same(7, with_r(1.25));
  EXPECT_EQ(batch_reward(same), 1.25);
  EXPECT_THROW(batch_reward({}), Error);
}

TEST(Advantages, Examples) {
  const std::vector<double> r1{2.0, 0.0};
  const auto a1 = group_advantages(r1);
  EXPECT_EQ(a1.advantages, (std::vector<double>{1.0, -1.0}));
  const std::vector<double> r2{1.0, 1.0, 1.0};
  EXPECT_EQ(group_advantages(r2).advantages, (std::vector<double>{0.0, 0.0, 0.0}));
  const std::vector<double> one{1.0};
  EXPECT_THROW(group_advantages(one), Error);
}

TEST(Advantages, ShiftInvariantScaleEquivariantZeroSum) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> r(2 + t % 7);
    for (auto& x : r) x = u(rng);
    const auto base = group_advantages(r);
    EXPECT_NEAR(std::accumulate(base.advantages.begin(), base.advantages.end(), 0.0), 0.0, 1e-9);
    auto shifted = r;
    for (auto& x : shifted) x += 5.0;
    auto scaled = r;
    for (auto& x : scaled) x *= 3.0;
    const auto s = group_advantages(shifted);
    const auto k = group_advantages(scaled);
    for (std::size_t i = 0; i < r.size(); ++i) {
      EXPECT_NEAR(s.advantages[i], base.advantages[i], 1e-9);
      EXPECT_NEAR(k.advantages[i], base.advantages[i], 1e-9);
    }
  }
}

TEST(Json, DumpFields) {
  const auto text = fcot_text("Initial Judgment: Fake", "r", "f", "Real");
  const auto j = to_json(score_rollout(text, Label::Real, bundle_with_majority(Label::Real), {}));
  EXPECT_EQ(j.at("A"), 1);
  EXPECT_EQ(j.at("C"), 1);
  EXPECT_EQ(j.at("R_i"), 3.0);
  EXPECT_EQ(j.at("s1_pred"), "Fake");
}

}  // namespace
}  // namespace vrag::reward
