#include "vrag/fkd_store.hpp"
#include "vrag/jsonl.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

namespace vrag::fkd {
namespace {

using vrag::testing::make_embedding;
using vrag::testing::make_entry;
using vrag::testing::TempDir;

TEST(Annotation, ParsesBracketedClauses) {
  const auto f = parse_annotation("[mouth region]: abnormal blending");
  ASSERT_EQ(f.size(), 1U);
  EXPECT_EQ(f[0].region, "mouth region");
  EXPECT_EQ(f[0].description, "abnormal blending");
}

TEST(Annotation, KeepsClauseOrderAfterAHeading) {
  const auto f = parse_annotation(
      "Forgery Artifacts: [Skin]: Central area cool white, edges warmer. [Eyebrows]: Ghosting along the brow.");
  ASSERT_EQ(f.size(), 2U);
  EXPECT_EQ(f[0].region, "Skin");
  EXPECT_EQ(f[1].region, "Eyebrows");
  EXPECT_EQ(f[1].description, "Ghosting along the brow.");
}

TEST(Annotation, EmptyInputIsRejected) {
  try {
    parse_annotation("   ");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyAnnotation);
  }
}

TEST(Annotation, StrictModeRejectsUnclosedBracket) {
  EXPECT_THROW(parse_annotation("[Mouth: blur", true), Error);
  EXPECT_NO_THROW(parse_annotation("[Mouth: blur", false));
}

TEST(Annotation, RenderIsInverseOfParse) {
  const std::vector<RegionFinding> f{{"Eyes", "glint mismatch"}, {"Jawline", "seam"}};
  EXPECT_EQ(parse_annotation(render_findings(f)), f);
}

TEST(Entries, ValidationCatchesLabelMethodDisagreement) {
  auto e = make_entry("v", "0", Label::Fake);
  EXPECT_NO_THROW(validate_entry(e));
  e.method = ManipulationMethod::Real;
  EXPECT_THROW(validate_entry(e), Error);
}

TEST(Entries, JsonRoundTrip) {
  const auto e = make_entry("v1", "0003", Label::Fake);
  EXPECT_EQ(entry_from_json(to_json(e)), e);
}

TEST(SamplingPlan, EvenDivision) {
  std::map<std::string, VideoInventory> inv;
  for (int i = 0; i < 10; ++i) inv["r" + std::to_string(i)] = {Label::Real, 50};
  const auto plan = build_sampling_plan(inv, {{Label::Real, 20}}, 1);
  for (const auto& [id, n] : plan.frames_per_video) EXPECT_EQ(n, 2U);
  EXPECT_EQ(plan.planned.at(Label::Real), 20U);
}

TEST(SamplingPlan, CapacityCapReportsShortfall) {
  std::map<std::string, VideoInventory> inv{
      {"a", {Label::Fake, 1}}, {"b", {Label::Fake, 1}}, {"c", {Label::Fake, 1}}};
  const auto plan = build_sampling_plan(inv, {{Label::Fake, 5}}, 3);
  EXPECT_EQ(plan.planned.at(Label::Fake), 3U);
  EXPECT_EQ(plan.shortfall.at(Label::Fake), 2U);
}

TEST(SamplingPlan, LargeInventoryGivesNearUniformCounts) {
  std::map<std::string, VideoInventory> inv;
  for (int i = 0; i < 2800; ++i) inv["f" + std::to_string(i)] = {Label::Fake, 300};
  for (int i = 0; i < 700; ++i) inv["r" + std::to_string(i)] = {Label::Real, 300};
  const auto plan = build_sampling_plan(inv, {{Label::Fake, 8000}, {Label::Real, 8000}}, 11);
  EXPECT_EQ(plan.planned.at(Label::Fake), 8000U);
  EXPECT_EQ(plan.planned.at(Label::Real), 8000U);
  for (const auto& [id, n] : plan.frames_per_video) {
    if (id[0] == 'f') {
      EXPECT_TRUE(n == 2 || n == 3) << id;
    } else {
      EXPECT_TRUE(n == 11 || n == 12) << id;
    }
  }
  EXPECT_EQ(to_json(plan), to_json(build_sampling_plan(inv, {{Label::Fake, 8000}, {Label::Real, 8000}}, 11)));
}

class CorpusTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 4; ++i) {
      const auto label = i < 2 ? Label::Real : Label::Fake;
      auto e = make_entry("v" + std::to_string(i), "0", label,
                          label == Label::Real ? "[Skin]: even texture" : "[Mouth]: blurred teeth");
      vectors.push_back(make_embedding(e.embedding_id, vrag::testing::random_vector(rng, 8)));
      entries.push_back(std::move(e));
    }
  }

  std::vector<KnowledgeEntry> entries;
  std::vector<EmbeddingRecord> vectors;
  TempDir dir{"fkd"};
};

TEST_F(CorpusTest, ManifestCountsByLabel) {
  const auto m = ingest(entries, vectors, dir.path());
  EXPECT_EQ(m.count, 4U);
  EXPECT_EQ(m.dimension, 8U);
  EXPECT_EQ(m.counts_by_label.at(Label::Real), 2U);
  EXPECT_EQ(m.counts_by_label.at(Label::Fake), 2U);
}

TEST_F(CorpusTest, SaveLoadRoundTripIsByteIdentical) {
  const auto m = ingest(entries, vectors, dir.path());
  const auto bytes = jsonl::read_file(dir.path() / kVectorsFile);
  const auto corpus = load_corpus(dir.path());
  EXPECT_EQ(corpus.manifest, m);
  EXPECT_EQ(corpus.entries, entries);
  EXPECT_EQ(encode_vector_file(corpus.dimension, corpus.vectors), bytes);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const auto row = corpus.row(i);
    EXPECT_TRUE(std::equal(row.begin(), row.end(), vectors[i].vector.begin()));
  }
}

TEST_F(CorpusTest, VectorFileLayoutIsBitExact) {
  ingest(entries, vectors, dir.path());
  const auto bytes = jsonl::read_file(dir.path() / kVectorsFile);
  ASSERT_EQ(bytes.size(), 4U + 4 + 4 + 8 + 4 * 8 * 4);
  EXPECT_EQ(bytes.substr(0, 4), "VRAG");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);   // version, little endian
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 8);   // dimension
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 4);  // count
  float first = 0;
  std::memcpy(&first, bytes.data() + 20, 4);
  EXPECT_EQ(first, vectors[0].vector[0]);
}

TEST_F(CorpusTest, DanglingEmbeddingReference) {
  entries[1].embedding_id = "missing";
  try {
    ingest(entries, vectors, dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DanglingEmbeddingRef);
  }
}

TEST_F(CorpusTest, MixedDimensions) {
  vectors[2].vector.resize(16, 0.5f);
  vectors[2].l2_norm = l2_norm(vectors[2].vector);
  try {
    ingest(entries, vectors, dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST_F(CorpusTest, DuplicateEntry) {
  entries[1] = entries[0];
  EXPECT_THROW(ingest(entries, vectors, dir.path()), Error);
}

TEST_F(CorpusTest, NonFiniteComponent) {
  vectors[0].vector[0] = std::nanf("");
  try {
    ingest(entries, vectors, dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteValue);
  }
}

TEST_F(CorpusTest, CorruptedVectorFile) {
  ingest(entries, vectors, dir.path());
  auto bytes = jsonl::read_file(dir.path() / kVectorsFile);
  bytes[30] ^= 0x40;
  jsonl::write_file(dir.path() / kVectorsFile, bytes);
  try {
    load_corpus(dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ChecksumMismatch);
  }
}

TEST_F(CorpusTest, UnknownFormatVersion) {
  ingest(entries, vectors, dir.path());
  auto bytes = jsonl::read_file(dir.path() / kVectorsFile);
  bytes[4] = 2;
  jsonl::write_file(dir.path() / kVectorsFile, bytes);
  try {
    load_corpus(dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::VersionUnsupported);
  }
}

}  // namespace
}  // namespace vrag::fkd
