#include "vrag/retrieval.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

namespace vrag::retrieval {
namespace {

using vrag::testing::random_vector;

std::vector<std::string> make_ids(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("e" + std::to_string(1000 + i));
  return ids;
}

// Full-scan oracle: every cosine in long double, sorted by (similarity desc, id asc).
std::vector<std::string> oracle(const std::vector<std::string>& ids, const std::vector<float>& rows,
                                std::size_t dim, const std::vector<float>& q, std::size_t k,
                                const std::string& skip = {}) {
  std::vector<std::pair<long double, std::string>> scored;
  long double qn = 0;
  for (auto x : q) qn += static_cast<long double>(x) * x;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == skip) continue;
    long double dot = 0, rn = 0;
    for (std::size_t d = 0; d < dim; ++d) {
      dot += static_cast<long double>(rows[i * dim + d]) * q[d];
      rn += static_cast<long double>(rows[i * dim + d]) * rows[i * dim + d];
    }
    scored.emplace_back(dot / std::sqrt(rn * qn), ids[i]);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(scored[i].second);
  return out;
}

TEST(VectorIndex, NormalizesRows) {
  const auto idx = VectorIndex::build({"a"}, 2, std::vector<float>{3.0f, 4.0f});
  EXPECT_NEAR(idx.row(0)[0], 0.6, 1e-12);
  EXPECT_NEAR(idx.row(0)[1], 0.8, 1e-12);
}

TEST(VectorIndex, ZeroVectorIsRejected) {
  try {
    VectorIndex::build({"a", "b"}, 2, std::vector<float>{1.0f, 0.0f, 0.0f, 0.0f});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroVector);
  }
}

TEST(VectorIndex, AllRowsUnitNorm) {
  std::mt19937_64 rng(17);
  std::vector<float> rows;
  for (int i = 0; i < 100; ++i) {
    const auto v = random_vector(rng, 8);
    rows.insert(rows.end(), v.begin(), v.end());
  }
  const auto idx = VectorIndex::build(make_ids(100), 8, rows);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    double n = 0;
    for (auto x : idx.row(i)) n += x * x;
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-6);
  }
}

TEST(VectorIndex, SelfQueryAndExclusion) {
  std::mt19937_64 rng(2);
  std::vector<float> rows;
  for (int i = 0; i < 20; ++i) {
    const auto v = random_vector(rng, 8);
    rows.insert(rows.end(), v.begin(), v.end());
  }
  const auto idx = VectorIndex::build(make_ids(20), 8, rows);
  const std::vector<float> q(rows.begin() + 8 * 7, rows.begin() + 8 * 8);
  const auto hits = idx.top_k(q, 5);
  EXPECT_EQ(hits[0].row, 7U);
  EXPECT_NEAR(hits[0].similarity, 1.0, 1e-6);
  const auto excluded = idx.top_k(q, 5, 7);
  for (const auto& h : excluded) EXPECT_NE(h.row, 7U);
}

TEST(VectorIndex, MatchesFullScanOracle) {
  std::mt19937_64 rng(99);
  std::vector<float> rows;
  for (int i = 0; i < 100; ++i) {
    const auto v = random_vector(rng, 8);
    rows.insert(rows.end(), v.begin(), v.end());
  }
  const auto ids = make_ids(100);
  const auto idx = VectorIndex::build(ids, 8, rows);
  for (int n = 0; n < 20; ++n) {
    const auto q = random_vector(rng, 8);
    std::vector<std::string> got;
    for (const auto& h : idx.top_k(q, 5)) got.push_back(ids[h.row]);
    EXPECT_EQ(got, oracle(ids, rows, 8, q, 5));
  }
}

TEST(VectorIndex, TiesBreakByIdAscending) {
  const std::vector<float> rows{1, 0, 1, 0, 1, 0, 0, 1};
  const auto idx = VectorIndex::build({"c", "a", "b", "d"}, 2, rows);
  const auto hits = idx.top_k(std::vector<float>{1, 0}, 3);
  EXPECT_EQ(idx.ids()[hits[0].row], "a");
  EXPECT_EQ(idx.ids()[hits[1].row], "b");
  EXPECT_EQ(idx.ids()[hits[2].row], "c");
}

TEST(VectorIndex, KLargerThanCorpus) {
  const auto idx = VectorIndex::build({"a"}, 2, std::vector<float>{1, 0});
  EXPECT_THROW(idx.top_k(std::vector<float>{1, 0}, 3), Error);
}

TEST(VectorIndex, SaveLoadRoundTrip) {
  vrag::testing::TempDir dir("index");
  std::mt19937_64 rng(4);
  std::vector<float> rows;
  for (int i = 0; i < 10; ++i) {
    const auto v = random_vector(rng, 4);
    rows.insert(rows.end(), v.begin(), v.end());
  }
  const auto idx = VectorIndex::build(make_ids(10), 4, rows);
  idx.save(dir.path());
  const auto back = VectorIndex::load(dir.path());
  EXPECT_EQ(back.ids(), idx.ids());
  const auto q = random_vector(rng, 4);
  const auto a = idx.top_k(q, 3);
  const auto b = back.top_k(q, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a[i].row, b[i].row);
    EXPECT_EQ(a[i].similarity, b[i].similarity);
  }
}

EvidenceItem item(const std::string& id, Label l, double s) { return {id, l, s, "note"}; }

TEST(Bundle, StrictMajority) {
  const auto b = assemble_bundle("q", {item("1", Label::Fake, .9), item("2", Label::Fake, .8),
                                       item("3", Label::Real, .7), item("4", Label::Fake, .6),
                                       item("5", Label::Real, .5)},
                                 Label::Fake);
  EXPECT_EQ(b.majority_label, Label::Fake);
  EXPECT_EQ(b.rag_correct, true);
}

TEST(Bundle, EvenKIsRejected) {
  try {
    assemble_bundle("q", {item("1", Label::Fake, .9), item("2", Label::Fake, .8), item("3", Label::Real, .7),
                          item("4", Label::Real, .6)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EvenK);
  }
}

TEST(Bundle, JsonRoundTrip) {
  const auto b = assemble_bundle("q7", {item("1", Label::Real, .91), item("2", Label::Fake, .5),
                                        item("3", Label::Real, .25)},
                                 Label::Fake);
  const auto back = bundle_from_json(to_json(b));
  EXPECT_EQ(back.query_id, "q7");
  EXPECT_EQ(back.items, b.items);
  EXPECT_EQ(back.majority_label, Label::Real);
  EXPECT_EQ(back.rag_correct, false);
}

TEST(Retriever, SelfExclusionThroughEntries) {
  fkd::Corpus corpus;
  corpus.dimension = 2;
  corpus.entries = {vrag::testing::make_entry("a", "0", Label::Real, "[Skin]: smooth"),
                    vrag::testing::make_entry("b", "0", Label::Fake),
                    vrag::testing::make_entry("c", "0", Label::Fake)};
  corpus.vectors = {1, 0, 0.9f, 0.1f, 0, 1};
  const Retriever r(corpus);
  RetrievalConfig cfg;
  cfg.k = 1;
  const std::vector<float> q{1, 0};
  EXPECT_EQ(r.retrieve(q, cfg)[0].entry_id, corpus.entries[0].entry_id);
  cfg.exclude_self = true;
  EXPECT_EQ(r.retrieve(q, cfg, corpus.entries[0].entry_id)[0].entry_id, corpus.entries[1].entry_id);
  EXPECT_THROW(r.retrieve(q, cfg), Error);
}

TEST(Retriever, ResultLineHasSixDecimals) {
  const auto line = format_result_line("q", {item("x", Label::Real, 0.5)});
  EXPECT_NE(line.find("0.500000"), std::string::npos);
}

}  // namespace
}  // namespace vrag::retrieval
