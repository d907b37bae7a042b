// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include "vrag/dataset.hpp"
#include "vrag/evaluation.hpp"
#include "vrag/fcot.hpp"
#include "vrag/jsonl.hpp"
#include "vrag/retrieval.hpp"
#include "vrag/reward.hpp"
#include "vrag/synthetic.hpp"

#include "pipeline_fixture.hpp"
#include "test_support.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

namespace {

using namespace vrag;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(std::string why) {
    if (pass) detail = std::move(why);
    pass = false;
  }
  void check(bool ok, const std::function<std::string()>& why) {
    if (!ok) fail(why());
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string label_word(Label l) { return std::string(to_string(l)); }

// --- reward ---------------------------------------------------------------------

Outcome conflict_truth_table() {
  Outcome o;
  const auto start = Clock::now();
  const std::vector<std::tuple<int, int, double>> table{{1, 1, 2.0}, {1, 0, 1.0}, {0, 0, -1.0}, {0, 1, -2.0}};
  for (const auto& [a, c, want] : table) {
    const double got = reward::conflict_reward(a, c);
    o.check(got == want, [&] { return fmt::format("r({},{}) = {}, want {}", a, c, got, want); });
  }
  o.check(seconds_since(start) < 1.0, [] { return std::string("slower than 1 s"); });
  return o;
}

Outcome conflict_is_xor() {
  Outcome o;
  const auto start = Clock::now();
  for (bool s1_ok : {false, true}) {
    for (bool rag_ok : {false, true}) {
      const Label gt = Label::Fake;
      const Label s1 = s1_ok ? gt : opposite(gt);
      const Label rag = rag_ok ? gt : opposite(gt);
      const int c = reward::detect_conflict(s1, rag, reward::UnknownS1Policy::ZeroConflictReward);
      o.check(c == (s1_ok != rag_ok ? 1 : 0), [&] { return fmt::format("({}, {}) gave C={}", s1_ok, rag_ok, c); });
    }
  }
  std::mt19937_64 rng(20240601);
  std::bernoulli_distribution coin(0.5);
  for (int i = 0; i < 10'000; ++i) {
    const Label s1 = coin(rng) ? Label::Fake : Label::Real;
    const Label rag = coin(rng) ? Label::Fake : Label::Real;
    const Label gt = coin(rng) ? Label::Fake : Label::Real;
    const int disagree = reward::detect_conflict(s1, rag, reward::UnknownS1Policy::ZeroConflictReward);
    const int xor_def = ((s1 == gt) != (rag == gt)) ? 1 : 0;
    o.check(disagree == xor_def, [&] { return fmt::format("triple {} disagrees", i); });
  }
  o.check(seconds_since(start) < 1.0, [] { return std::string("slower than 1 s"); });
  return o;
}

Outcome reward_linearity_and_mean() {
  Outcome o;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> weight(-5.0, 5.0);
  std::bernoulli_distribution coin(0.5);
  std::vector<reward::RewardRecord> records;
  for (int i = 0; i < 1000; ++i) {
    reward::RewardConfig cfg;
    cfg.alpha = weight(rng);
    cfg.beta = weight(rng);
    cfg.format_reward_valid = weight(rng);
    cfg.format_reward_invalid = weight(rng);
    const Label gt = coin(rng) ? Label::Fake : Label::Real;
    const Label s1 = coin(rng) ? gt : opposite(gt);
    const Label majority = coin(rng) ? gt : opposite(gt);
    const Label answer = coin(rng) ? gt : opposite(gt);
    const bool well_formed = coin(rng);
    std::string text = vrag::testing::fcot_text("Initial Judgment: " + label_word(s1), "refs", "weigh", label_word(answer));
    if (!well_formed) text.erase(text.find("<Fusion"), text.find("<Answer>") - text.find("<Fusion"));
    const auto bundle = retrieval::assemble_bundle(
        "q", {{"a", majority, 0.9, "x"}, {"b", majority, 0.8, "y"}, {"c", opposite(majority), 0.7, "z"}}, gt);
    const auto rec = reward::score_rollout(text, gt, bundle, cfg);
    const int A = answer == gt ? 1 : 0;
    const int C = s1 != majority ? 1 : 0;
    const double r = reward::conflict_reward(A, C);
    const double f = well_formed ? cfg.format_reward_valid : cfg.format_reward_invalid;
    const double want = cfg.alpha * r + cfg.beta * f;
    o.check(std::abs(rec.R_i - want) <= 1e-12,
            [&] { return fmt::format("tuple {}: R_i {} vs {}", i, rec.R_i, want); });
    records.push_back(rec);
  }
  for (int batch = 0; batch < 20; ++batch) {
    std::uniform_int_distribution<std::size_t> pick(0, records.size() - 1);
    const std::size_t n = 1 + pick(rng) % 200;
    std::vector<reward::RewardRecord> sample;
    long double sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sample.push_back(records[pick(rng)]);
      sum += sample.back().R_i;
    }
    const double oracle = static_cast<double>(sum / static_cast<long double>(n));
    const double got = reward::batch_reward(sample);
    o.check(std::abs(got - oracle) <= 1e-12, [&] { return fmt::format("batch {}: {} vs {}", batch, got, oracle); });
  }
  return o;
}

// --- retrieval --------------------------------------------------------------------

std::vector<std::string> full_scan(const fkd::Corpus& corpus, const std::vector<float>& q, std::size_t k,
                                   const std::string& skip) {
  const auto dim = corpus.dimension;
  long double qn = 0;
  for (auto x : q) qn += static_cast<long double>(x) * x;
  std::vector<std::pair<long double, std::string>> scored;
  for (std::size_t i = 0; i < corpus.entries.size(); ++i) {
    if (corpus.entries[i].entry_id == skip) continue;
    long double dot = 0, rn = 0;
    for (std::size_t d = 0; d < dim; ++d) {
      const long double x = corpus.vectors[i * dim + d];
      dot += x * q[d];
      rn += x * x;
    }
    scored.emplace_back(dot / std::sqrt(rn * qn), corpus.entries[i].entry_id);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < k; ++i) ids.push_back(scored[i].second);
  return ids;
}

Outcome retrieval_oracle() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(8);
  fkd::Corpus corpus;
  corpus.dimension = 8;
  for (int i = 0; i < 1000; ++i) {
    corpus.entries.push_back(vrag::testing::make_entry(fmt::format("vid{:04}", i), "0",
                                                       i % 2 ? Label::Fake : Label::Real));
    const auto v = vrag::testing::random_vector(rng, 8);
    corpus.vectors.insert(corpus.vectors.end(), v.begin(), v.end());
  }
  const retrieval::Retriever retriever(corpus);
  retrieval::RetrievalConfig cfg;
  cfg.k = 5;
  std::uniform_int_distribution<std::size_t> pick(0, corpus.entries.size() - 1);
  for (int n = 0; n < 100; ++n) {
    const auto q = vrag::testing::random_vector(rng, 8);
    cfg.exclude_self = false;
    std::vector<std::string> got;
    for (const auto& item : retriever.retrieve(q, cfg)) got.push_back(item.entry_id);
    o.check(got == full_scan(corpus, q, 5, {}), [&] { return fmt::format("query {} differs", n); });

    // Self-exclusion: query with a stored vector and drop that entry.
    const auto row = pick(rng);
    const std::vector<float> self(corpus.vectors.begin() + static_cast<std::ptrdiff_t>(row * 8),
                                  corpus.vectors.begin() + static_cast<std::ptrdiff_t>(row * 8 + 8));
    const auto& self_id = corpus.entries[row].entry_id;
    cfg.exclude_self = true;
    got.clear();
    for (const auto& item : retriever.retrieve(self, cfg, self_id)) got.push_back(item.entry_id);
    o.check(got == full_scan(corpus, self, 5, self_id), [&] { return fmt::format("self query {} differs", n); });
  }
  o.check(seconds_since(start) < 5.0, [] { return std::string("slower than 5 s"); });
  return o;
}

// --- structured responses ----------------------------------------------------------

std::string random_prose(std::mt19937_64& rng, std::size_t min_words) {
  static const std::vector<std::string> words{
      "the",   "jawline", "shows",  "a",       "soft",    "seam",     "near",   "left",  "cheek",
      "three", "entries", "report", "blending", "texture", "is",       "smooth", "with",  "pores",
      "light", "falls",   "evenly", "across",  "mouth",   "teeth",    "blur",   "edges", "hair",
      "glint", "eyes",    "match",  "source",  "weighs",  "evidence", "against", "view", "(0.81)"};
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  std::uniform_int_distribution<std::size_t> extra(0, 20);
  const auto n = min_words + extra(rng);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += (i % 9 == 0) ? "\n" : " ";
    out += words[pick(rng)];
  }
  return out;
}

fcot::FCotResponse random_response(std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  fcot::FCotResponse r;
  const Label s1 = coin(rng) ? Label::Fake : Label::Real;
  r.preliminary = random_prose(rng, 3) + "\nInitial Judgment: " + label_word(s1);
  r.s1_pred = s1;
  r.rag_analysis = random_prose(rng, 5);
  r.fusion = random_prose(rng, 5);
  r.answer = coin(rng) ? Label::Fake : Label::Real;
  r.format_valid = true;
  return r;
}

bool same_content(const fcot::FCotResponse& a, const fcot::FCotResponse& b) {
  return a.preliminary == b.preliminary && a.rag_analysis == b.rag_analysis && a.fusion == b.fusion &&
         a.answer == b.answer && a.s1_pred == b.s1_pred;
}

bool has_code(const fcot::FCotResponse& r, const std::vector<fcot::ViolationCode>& codes) {
  return std::any_of(r.violations.begin(), r.violations.end(), [&](const fcot::Violation& v) {
    return std::find(codes.begin(), codes.end(), v.code) != codes.end();
  });
}

Outcome fcot_round_trip_and_mutations() {
  Outcome o;
  std::mt19937_64 rng(500);
  const std::vector<std::string> open_tags{"<Preliminary Visual Analysis>", "<RAG Reference Information Analysis>",
                                           "<Fusion, Reasoning, and Decision>", "<Answer>"};
  const std::vector<std::string> close_tags{"</Preliminary Visual Analysis>", "</RAG Reference Information Analysis>",
                                            "</Fusion, Reasoning, and Decision>", "</Answer>"};
  std::vector<std::string> texts;
  for (int i = 0; i < 500; ++i) {
    const auto r = random_response(rng);
    const auto text = fcot::serialize_fcot(r);
    const auto parsed = fcot::parse_fcot(text);
    o.check(parsed.format_valid && same_content(parsed, r), [&] { return fmt::format("response {} did not survive parse", i); });
    o.check(fcot::serialize_fcot(parsed) == text, [&] { return fmt::format("response {} re-serialized differently", i); });
    texts.push_back(text);
  }

  std::uniform_int_distribution<int> kind(0, 2);
  std::uniform_int_distribution<std::size_t> section(0, 3);
  const std::vector<std::string> bad_answers{"Maybe", "Uncertain", "Fakeish", "", "Real or Fake", "42"};
  std::uniform_int_distribution<std::size_t> bad(0, bad_answers.size() - 1);
  for (int i = 0; i < 500; ++i) {
    std::string text = texts[static_cast<std::size_t>(i)];
    const int k = kind(rng);
    const auto s = section(rng);
    std::vector<fcot::ViolationCode> expected;
    if (k == 0) {
      // Delete a whole section, tags included.
      const auto a = text.find(open_tags[s]);
      const auto b = text.find(close_tags[s]) + close_tags[s].size();
      text.erase(a, b - a);
      expected = {fcot::ViolationCode::MissingSection};
    } else if (k == 1) {
      // Corrupt one tag so it no longer names a section.
      const bool closing = rng() % 2 == 1;
      const auto& tag = closing ? close_tags[s] : open_tags[s];
      const auto at = text.find(tag);
      text.replace(at + (closing ? 2 : 1), 1, "#");
      expected = {fcot::ViolationCode::UnmatchedTag, fcot::ViolationCode::MissingSection};
    } else {
      // Replace the answer token.
      const auto a = text.find("<Answer>") + 8;
      const auto b = text.find("</Answer>");
      text.replace(a, b - a, " " + bad_answers[bad(rng)] + " ");
      expected = {fcot::ViolationCode::BadAnswerToken};
    }
    const auto parsed = fcot::parse_fcot(text);
    o.check(!parsed.format_valid, [&] { return fmt::format("mutation {} (kind {}) still valid", i, k); });
    o.check(has_code(parsed, expected), [&] { return fmt::format("mutation {} (kind {}) has wrong violation code", i, k); });
  }
  return o;
}

Outcome type_classification() {
  Outcome o;
  using fcot::SampleKind;
  const std::vector<std::tuple<bool, bool, SampleKind>> table{
      {true, true, SampleKind::CrossVerification},
      {true, false, SampleKind::CrossVerification},
      {false, true, SampleKind::EvidenceGuidedCorrection},
      {false, false, SampleKind::ResilientRejection}};
  for (const auto& [s1, rag, want] : table) {
    const auto got = dataset::classify_sample(s1, rag);
    o.check(got == want, [&] { return fmt::format("({}, {}) -> {}", s1, rag, fcot::to_string(got)); });
  }
  return o;
}

// --- metrics ---------------------------------------------------------------------

Outcome robustness_fixture() {
  Outcome o;
  const std::vector<std::tuple<std::int64_t, std::int64_t, double>> sets{
      {34, 32, 94.12}, {429, 417, 97.20}, {534, 520, 97.38}, {1374, 1345, 97.89}, {5226, 5048, 96.59}};
  std::vector<eval::RobustnessResult> results;
  for (const auto& [n, c, want] : sets) {
    results.push_back(eval::robustness_from_counts(n, c));
    const double got = results.back().rate_percent;
    o.check(fmt::format("{:.2f}", got) == fmt::format("{:.2f}", want),
            [&] { return fmt::format("{}/{} -> {:.2f}, want {:.2f}", c, n, got, want); });
  }
  const auto weighted = eval::weighted_robustness(results);
  o.check(fmt::format("{:.2f}", weighted.rate_percent) == "96.91",
          [&] { return fmt::format("weighted {:.2f}", weighted.rate_percent); });
  return o;
}

Outcome cost_fixture() {
  Outcome o;
  const auto shares = eval::cost_ratio({{{"retrieval", 81}, {"inference", 22760}}});
  o.check(fmt::format("{:.2f}", shares.at(0).percent) == "0.35",
          [&] { return fmt::format("retrieval {:.2f}", shares.at(0).percent); });
  o.check(fmt::format("{:.2f}", shares.at(1).percent) == "99.65",
          [&] { return fmt::format("inference {:.2f}", shares.at(1).percent); });
  return o;
}

double pair_count_auc(const std::vector<eval::VideoScore>& videos) {
  std::int64_t better = 0, ties = 0, pairs = 0;
  for (const auto& f : videos) {
    if (f.label != Label::Fake) continue;
    for (const auto& r : videos) {
      if (r.label != Label::Real) continue;
      ++pairs;
      if (f.score > r.score) ++better;
      else if (f.score == r.score) ++ties;
    }
  }
  return (static_cast<double>(better) + 0.5 * static_cast<double>(ties)) / static_cast<double>(pairs);
}

Outcome auc_oracle() {
  Outcome o;
  std::mt19937_64 rng(50);
  std::uniform_int_distribution<int> video_count(2, 200);
  std::uniform_int_distribution<int> frame_count(1, 4);
  std::uniform_int_distribution<int> grid(0, 40);
  for (int set = 0; set < 50; ++set) {
    const int n = video_count(rng);
    std::vector<eval::FrameScore> frames;
    std::vector<eval::VideoScore> oracle_videos;
    for (int v = 0; v < n; ++v) {
      const Label label = v == 0 ? Label::Fake : v == 1 ? Label::Real : (rng() % 2 ? Label::Fake : Label::Real);
      const int m = frame_count(rng);
      long double sum = 0;
      for (int f = 0; f < m; ++f) {
        const double s = grid(rng) / 40.0;  // coarse grid so ties occur
        sum += s;
        frames.push_back({fmt::format("v{:03}", v), std::to_string(f), s, label});
      }
      oracle_videos.push_back({fmt::format("v{:03}", v), 0.0, label, static_cast<std::size_t>(m)});
    }
    // Per-video mean, using the same aggregation the library documents.
    const auto videos = eval::aggregate_videos(frames);
    for (std::size_t i = 0; i < videos.size(); ++i) oracle_videos[i].score = videos[i].score;
    const double want = pair_count_auc(oracle_videos);
    const double got = eval::video_level_auc(frames);
    o.check(std::abs(got - want) <= 1e-12, [&] { return fmt::format("set {}: {} vs {}", set, got, want); });
    o.check(eval::auc_rank(videos) == eval::auc_pairwise(videos), [&] { return fmt::format("set {}: rank path differs", set); });
  }

  // Strictly increasing maps of one-frame-per-video scores leave AUC unchanged.
  std::uniform_real_distribution<double> param(0.2, 5.0);
  for (int t = 0; t < 20; ++t) {
    const int n = video_count(rng);
    std::vector<eval::FrameScore> base;
    for (int v = 0; v < n; ++v) {
      const Label label = v == 0 ? Label::Fake : v == 1 ? Label::Real : (rng() % 2 ? Label::Fake : Label::Real);
      base.push_back({fmt::format("v{:03}", v), "0", grid(rng) / 40.0, label});
    }
    const double p = param(rng);
    const double a = param(rng);
    const std::vector<std::function<double(double)>> maps{
        [p](double x) { return std::pow(x, p); },
        [a](double x) { return std::expm1(a * x) / std::expm1(a); },
        [](double x) { return 0.25 + 0.5 * x; }};
    const auto& map = maps[static_cast<std::size_t>(t) % maps.size()];
    auto mapped = base;
    for (auto& f : mapped) f.score = map(f.score);
    const double before = eval::video_level_auc(base);
    const double after = eval::video_level_auc(mapped);
    o.check(std::abs(before - after) <= 1e-12, [&] { return fmt::format("map {}: {} vs {}", t, before, after); });
  }
  return o;
}

Outcome judge_average() {
  Outcome o;
  const std::vector<eval::ExactMean> means{eval::ExactMean::from_decimal("judge_a", 7.55),
                                           eval::ExactMean::from_decimal("judge_b", 7.78)};
  const auto avg = eval::cross_judge_average(means);
  o.check(fmt::format("{:.2f}", avg.rounded(2)) == "7.66", [&] { return fmt::format("average {:.2f}", avg.rounded(2)); });
  return o;
}

Outcome recipes() {
  Outcome o;
  const std::vector<std::tuple<int, int, double, int>> rows{{1, 3, 5e-5, 512}, {2, 2, 3e-5, 64}, {3, 1, 1e-6, 32}};
  for (const auto& [stage, epochs, lr, batch] : rows) {
    const auto r = dataset::export_training_recipe(stage);
    o.check(r.epochs == epochs && r.learning_rate == lr && r.batch_size == batch,
            [&] { return fmt::format("stage {}: {}/{}/{}", stage, r.epochs, r.learning_rate, r.batch_size); });
    if (stage > 1) {
      o.check(r.adapter_params.at("rank") == 128 && r.adapter_params.at("scaling") == 256,
              [&] { return fmt::format("stage {} adapter", stage); });
    }
  }
  const auto s3 = dataset::export_training_recipe(3);
  o.check(s3.extra_params.count("kl_beta") && s3.extra_params.at("kl_beta") == 0.001,
          [] { return std::string("stage 3 kl_beta"); });
  const auto j = dataset::to_json(s3);
  o.check(j.at("adapter").at("rank") == 128 && j.at("adapter").at("scaling") == 256,
          [] { return std::string("adapter fields missing from JSON"); });
  return o;
}

Outcome end_to_end() {
  Outcome o;
  const auto start = Clock::now();
  vrag::testing::TempDir dir("acceptance");
  const auto ws = synthetic::write_workspace(dir / "ws");
  const auto out = dir / "out";
  const auto steps = vrag::testing::run_mock_pipeline(ws.config, out, 7);
  for (const auto& s : steps) {
    o.check(s.exit_code == 0, [&] { return fmt::format("{} exited {}: {}", s.args.front(), s.exit_code, s.err); });
  }
  if (!o.pass) return o;
  const auto summary = nlohmann::json::parse(jsonl::read_file(out / "reports" / "eval.json"));
  const auto& rows = summary.at("auc");
  o.check(!rows.empty(), [] { return std::string("no AUC rows"); });
  for (const auto& row : rows) {
    const double auc = row.at("auc").get<double>();
    o.check(fmt::format("{:.2f}", auc) == "1.00", [&] { return fmt::format("AUC {:.4f}", auc); });
  }
  const auto report = jsonl::read_file(out / "reports" / "report.txt");
  for (const char* needle : {"AUC", "1.00", "Robustness", "GFLOPs", "99.65"}) {
    o.check(report.find(needle) != std::string::npos, [&] { return fmt::format("report lacks '{}'", needle); });
  }
  const double elapsed = seconds_since(start);
  o.check(elapsed < 60.0, [&] { return fmt::format("took {:.1f} s", elapsed); });
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"conflict-reward-truth-table", conflict_truth_table},
      {"conflict-equals-xor", conflict_is_xor},
      {"reward-linearity-and-batch-mean", reward_linearity_and_mean},
      {"retrieval-matches-full-scan", retrieval_oracle},
      {"fcot-round-trip-and-mutations", fcot_round_trip_and_mutations},
      {"sample-type-classification", type_classification},
      {"robustness-rate-fixture", robustness_fixture},
      {"cost-ratio-fixture", cost_fixture},
      {"auc-pair-counting-oracle", auc_oracle},
      {"judge-cross-average", judge_average},
      {"training-recipe-fields", recipes},
      {"end-to-end-mock-pipeline", end_to_end},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.fail(std::string("threw: ") + e.what());
    }
    if (o.pass) {
      std::cout << "PASS " << name << "\n";
    } else {
      ++failed;
      std::cout << "FAIL " << name << ": " << o.detail << "\n";
    }
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
