#include "vrag/dataset.hpp"
#include "vrag/jsonl.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>

namespace vrag::dataset {
namespace {

using fcot::SampleKind;
using vrag::testing::fast_config;
using vrag::testing::fcot_text;
using vrag::testing::no_sleep;
using vrag::testing::ok_reply;
using vrag::testing::SequenceTransport;
using vrag::testing::TempDir;

std::vector<VideoItem> inventory(std::size_t fake, std::size_t real) {
  std::vector<VideoItem> v;
  for (std::size_t i = 0; i < fake; ++i) v.push_back({"f" + std::to_string(i), Label::Fake});
  for (std::size_t i = 0; i < real; ++i) v.push_back({"r" + std::to_string(i), Label::Real});
  return v;
}

TEST(Partition, StratifiedDisjointSplit) {
  const auto inv = inventory(2800, 700);
  const auto p = partition_stages(inv, 2500, 42);
  EXPECT_EQ(p.stage1_videos.size(), 2500U);
  EXPECT_EQ(p.stage23_videos.size(), 1000U);
  std::vector<std::string> both;
  std::set_intersection(p.stage1_videos.begin(), p.stage1_videos.end(), p.stage23_videos.begin(),
                        p.stage23_videos.end(), std::back_inserter(both));
  EXPECT_TRUE(both.empty());
  const auto fakes = std::count_if(p.stage1_videos.begin(), p.stage1_videos.end(),
                                   [](const std::string& id) { return id[0] == 'f'; });
  EXPECT_NEAR(static_cast<double>(fakes), 2000.0, 1.0);
}

TEST(Partition, DeterministicPerSeed) {
  const auto inv = inventory(40, 10);
  const auto a = partition_stages(inv, 20, 7);
  const auto b = partition_stages(inv, 20, 7);
  const auto c = partition_stages(inv, 20, 8);
  EXPECT_EQ(a.stage1_videos, b.stage1_videos);
  EXPECT_EQ(a.digest(), b.digest());
  EXPECT_NE(a.stage1_videos, c.stage1_videos);
}

TEST(Partition, CountMustLeaveAPool) {
  const auto inv = inventory(3, 2);
  try {
    partition_stages(inv, 5, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CountTooLarge);
  }
}

TEST(Partition, PoolSplitFraction) {
  const auto inv = inventory(8, 2);
  const auto s = split_pool(inv, 0.5, 3);
  EXPECT_EQ(s.stage2_videos.size(), 5U);
  EXPECT_EQ(s.stage3_videos.size(), 5U);
  EXPECT_THROW(split_pool(inv, 1.5, 3), Error);
}

TEST(Typing, ClassificationTable) {
  EXPECT_EQ(classify_sample(true, true), SampleKind::CrossVerification);
  EXPECT_EQ(classify_sample(true, false), SampleKind::CrossVerification);
  EXPECT_EQ(classify_sample(false, true), SampleKind::EvidenceGuidedCorrection);
  EXPECT_EQ(classify_sample(false, false), SampleKind::ResilientRejection);
  EXPECT_EQ(gold_initial_judgment(SampleKind::EvidenceGuidedCorrection, Label::Fake), Label::Real);
  EXPECT_EQ(gold_initial_judgment(SampleKind::CrossVerification, Label::Fake), Label::Fake);
}

retrieval::EvidenceBundle bundle(Label majority) {
  return retrieval::assemble_bundle("q", {{"e1", majority, 0.9, "seam"}, {"e2", majority, 0.8, "blur"},
                                          {"e3", opposite(majority), 0.7, "clean"}});
}

SampleRecord record(const std::string& id, Label gt, MaybeLabel s1, Label majority) {
  SampleRecord r;
  r.sample_id = id;
  r.video_id = "v_" + id;
  r.image_ref = "frames/" + id + ".png";
  r.ground_truth = gt;
  r.s1_pred = s1;
  r.bundle = bundle(majority);
  r.bundle.rag_correct = majority == gt;
  assign_kind(r);
  return r;
}

TEST(Typing, UnknownS1CountsAsIncorrect) {
  const auto r = record("a", Label::Fake, std::nullopt, Label::Fake);
  EXPECT_EQ(r.kind, SampleKind::EvidenceGuidedCorrection);
}

TEST(Typing, KindReportCounts) {
  const std::vector<SampleRecord> recs{record("a", Label::Fake, Label::Fake, Label::Fake),
                                       record("b", Label::Fake, Label::Real, Label::Fake),
                                       record("c", Label::Real, Label::Fake, Label::Fake)};
  const auto rep = kind_report(recs);
  EXPECT_EQ(rep.counts.at(SampleKind::CrossVerification), 1U);
  EXPECT_EQ(rep.counts.at(SampleKind::EvidenceGuidedCorrection), 1U);
  EXPECT_EQ(rep.counts.at(SampleKind::ResilientRejection), 1U);
  EXPECT_EQ(rep.mixed_evidence, 3U);
}

TEST(Typing, SampleJsonRoundTrip) {
  auto r = record("a", Label::Real, Label::Fake, Label::Real);
  r.gold_fcot = fcot_text("Initial Judgment: Fake", "r", "f", "Real");
  const auto back = sample_from_json(to_json(r));
  EXPECT_EQ(back.kind, r.kind);
  EXPECT_EQ(back.gold_fcot, r.gold_fcot);
  EXPECT_EQ(back.s1_pred, r.s1_pred);
  EXPECT_EQ(back.bundle.items, r.bundle.items);
}

class TeacherTest : public ::testing::Test {
 protected:
  gateway::Gateway teacher(std::vector<gateway::HttpReply> replies) {
    transport = std::make_shared<SequenceTransport>(std::move(replies));
    return gateway::Gateway(fast_config(), transport, no_sleep());
  }
  std::shared_ptr<SequenceTransport> transport;
  prompt::TemplateLibrary lib = prompt::TemplateLibrary::builtin();
};

TEST_F(TeacherTest, ValidReplyBecomesGold) {
  auto gw = teacher({ok_reply(fcot_text("Edges blur near the jaw.", "Two of three cite seams.",
                                        "Both agree.", "Fake"))});
  const auto out = build_fcot_sample(record("a", Label::Fake, Label::Fake, Label::Fake), gw, lib);
  ASSERT_TRUE(out.gold_fcot.has_value());
  EXPECT_EQ(out.attempts, 1);
  const auto parsed = fcot::parse_fcot(*out.gold_fcot, fcot::ParseMode::Strict);
  EXPECT_TRUE(parsed.format_valid);
  EXPECT_EQ(parsed.answer, Label::Fake);
  EXPECT_EQ(parsed.s1_pred, Label::Fake);
  EXPECT_NO_THROW(validate_sample(out));
}

TEST_F(TeacherTest, WrongAnswersAreRetried) {
  const auto wrong = ok_reply(fcot_text("p", "r", "f", "Real"));
  auto gw = teacher({wrong, wrong, ok_reply(fcot_text("p", "r", "f", "Fake"))});
  const auto out = build_fcot_sample(record("a", Label::Fake, Label::Fake, Label::Fake), gw, lib);
  EXPECT_EQ(out.attempts, 3);
  EXPECT_EQ(transport->calls(), 3U);
}

TEST_F(TeacherTest, AlwaysMalformedFails) {
  auto gw = teacher({ok_reply("I cannot follow the format.")});
  try {
    build_fcot_sample(record("a", Label::Fake, Label::Fake, Label::Fake), gw, lib);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TeacherFormatFailure);
  }
  EXPECT_EQ(transport->calls(), 3U);
}

TEST_F(TeacherTest, BatchKeepsPositions) {
  auto gw = teacher({ok_reply(fcot_text("p", "r", "f", "Fake"))});
  const std::vector<SampleRecord> recs{record("a", Label::Fake, Label::Fake, Label::Fake),
                                       record("b", Label::Real, Label::Real, Label::Real),
                                       record("c", Label::Fake, Label::Fake, Label::Real)};
  const auto out = build_fcot_batch(recs, gw, lib, {3, 2});
  ASSERT_EQ(out.size(), 3U);
  EXPECT_TRUE(out[0].record.has_value());
  EXPECT_TRUE(out[1].error.has_value());
  EXPECT_TRUE(out[2].record.has_value());
  EXPECT_EQ(out[2].record->sample_id, "c");
}

TEST(Export, Stage1Records) {
  TempDir dir("s1");
  const auto lib = prompt::TemplateLibrary::builtin();
  const std::vector<Stage1Frame> frames{{"a", "frames/a.png", Label::Fake}, {"b", "frames/b.png", Label::Real}};
  EXPECT_EQ(export_stage1_vqa(frames, lib.get(prompt::ids::kStage1Question), dir / "s1.jsonl"), 2U);
  const auto lines = jsonl::read_all(dir / "s1.jsonl");
  ASSERT_EQ(lines.size(), 2U);
  const auto& first = lines[0];
  EXPECT_EQ(first.at("label"), "Fake");
  EXPECT_EQ(first.at("image_ref"), "frames/a.png");
  EXPECT_FALSE(first.at("question").get<std::string>().empty());
  EXPECT_EQ(export_stage1_vqa({}, lib.get(prompt::ids::kStage1Question), dir / "empty.jsonl"), 0U);
}

TEST(Export, Stage2NeedsGold) {
  TempDir dir("s2");
  const auto lib = prompt::TemplateLibrary::builtin();
  const std::vector<SampleRecord> recs{record("a", Label::Fake, Label::Fake, Label::Fake)};
  try {
    export_stage2_sft(recs, lib.get(prompt::ids::kInference), dir / "s2.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingGold);
  }
}

TEST(Export, Stage2RecordsAndCounts) {
  TempDir dir("s2");
  const auto lib = prompt::TemplateLibrary::builtin();
  auto a = record("a", Label::Fake, Label::Fake, Label::Fake);
  a.gold_fcot = fcot_text("Initial Judgment: Fake", "r", "f", "Fake");
  auto b = record("b", Label::Fake, Label::Real, Label::Fake);
  b.gold_fcot = fcot_text("Initial Judgment: Real", "r", "f", "Fake");
  auto c = record("c", Label::Real, Label::Fake, Label::Fake);
  c.gold_fcot = fcot_text("Initial Judgment: Real", "r", "f", "Real");
  const std::vector<SampleRecord> recs{a, b, c};
  const auto rep = export_stage2_sft(recs, lib.get(prompt::ids::kInference), dir / "s2.jsonl");
  EXPECT_EQ(rep.counts.at(SampleKind::CrossVerification), 1U);
  EXPECT_EQ(rep.counts.at(SampleKind::EvidenceGuidedCorrection), 1U);
  EXPECT_EQ(rep.counts.at(SampleKind::ResilientRejection), 1U);
  const auto line = jsonl::read_all(dir / "s2.jsonl").at(1);
  EXPECT_EQ(line.at("kind"), "EvidenceGuidedCorrection");
  EXPECT_EQ(line.at("target"), *b.gold_fcot);
  EXPECT_TRUE(line.at("prompt").is_array());
}

TEST(Export, Stage2RejectsBadGold) {
  TempDir dir("s2");
  const auto lib = prompt::TemplateLibrary::builtin();
  auto a = record("a", Label::Fake, Label::Fake, Label::Fake);
  a.gold_fcot = fcot_text("Initial Judgment: Fake", "r", "f", "Real");
  const std::vector<SampleRecord> recs{a};
  try {
    export_stage2_sft(recs, lib.get(prompt::ids::kInference), dir / "s2.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidGold);
  }
}

TEST(Export, Stage3RejectsOverlap) {
  TempDir dir("s3");
  const auto lib = prompt::TemplateLibrary::builtin();
  const std::vector<SampleRecord> recs{record("a", Label::Fake, Label::Fake, Label::Fake)};
  EXPECT_EQ(export_stage3_prompts(recs, {}, lib.get(prompt::ids::kInference), dir / "s3.jsonl"), 1U);
  try {
    export_stage3_prompts(recs, {"v_a"}, lib.get(prompt::ids::kInference), dir / "s3b.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StageOverlap);
  }
}

TEST(Recipes, StageParameters) {
  const auto s1 = export_training_recipe(1);
  EXPECT_EQ(s1.epochs, 3);
  EXPECT_DOUBLE_EQ(s1.learning_rate, 5e-5);
  EXPECT_EQ(s1.batch_size, 512);
  EXPECT_EQ(s1.augmentations.size(), 3U);
  const auto s2 = export_training_recipe(2);
  EXPECT_EQ(s2.epochs, 2);
  EXPECT_DOUBLE_EQ(s2.learning_rate, 3e-5);
  EXPECT_EQ(s2.batch_size, 64);
  EXPECT_EQ(s2.adapter_params.at("rank"), 128);
  EXPECT_EQ(s2.adapter_params.at("scaling"), 256);
  EXPECT_EQ(s2.frozen_submodules, std::vector<std::string>{"vision_encoder"});
  const auto s3 = export_training_recipe(3);
  EXPECT_EQ(s3.epochs, 1);
  EXPECT_DOUBLE_EQ(s3.learning_rate, 1e-6);
  EXPECT_EQ(s3.batch_size, 32);
  EXPECT_DOUBLE_EQ(s3.extra_params.at("kl_beta"), 0.001);
  EXPECT_THROW(export_training_recipe(4), Error);
  EXPECT_EQ(to_json(s3).at("adapter").at("rank"), 128);
}

}  // namespace
}  // namespace vrag::dataset
