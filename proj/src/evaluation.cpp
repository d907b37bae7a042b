#include "vrag/evaluation.hpp"

#include "vrag/text.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace vrag::eval {

using nlohmann::json;

std::string_view to_string(ScoreRule rule) {
  return rule == ScoreRule::Hard ? "hard" : "logprob-then-hard";
}

ScoreRule parse_score_rule(std::string_view s) {
  const auto t = text::trim(s);
  if (text::iequals(t, "hard")) return ScoreRule::Hard;
  if (text::iequals(t, "logprob-then-hard") || text::iequals(t, "logprob")) {
    return ScoreRule::LogprobThenHard;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown score rule '" + std::string(s) + "'");
}

ScoreResult answer_to_score(const fcot::FCotResponse& response,
                            const std::optional<std::vector<gateway::TokenLogprob>>& logprobs,
                            ScoreRule rule) {
  if (!response.answer) return {0.5, "unparseable"};
  if (rule == ScoreRule::LogprobThenHard && logprobs) {
    for (auto it = logprobs->rbegin(); it != logprobs->rend(); ++it) {
      if (!parse_label(it->token)) continue;
      double fake = 0.0;
      double real = 0.0;
      for (const auto& [token, lp] : it->top) {
        if (const auto label = parse_label(token)) (*label == Label::Fake ? fake : real) += std::exp(lp);
      }
      if (fake > 0.0 && real > 0.0) return {fake / (fake + real), "logprob"};
      break;
    }
  }
  return {*response.answer == Label::Fake ? 1.0 : 0.0, "hard"};
}

std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::Mean: return "mean";
    case Aggregation::Median: return "median";
    case Aggregation::Max: return "max";
  }
  return "";
}

Aggregation parse_aggregation(std::string_view s) {
  for (auto a : {Aggregation::Mean, Aggregation::Median, Aggregation::Max}) {
    if (text::iequals(text::trim(s), to_string(a))) return a;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown aggregation '" + std::string(s) + "'");
}

std::vector<VideoScore> aggregate_videos(std::span<const FrameScore> frames, Aggregation aggregation) {
  struct Acc {
    std::vector<double> scores;
    Label label;
  };
  std::map<std::string, Acc> by_video;
  for (const auto& f : frames) {
    if (!std::isfinite(f.score) || f.score < 0.0 || f.score > 1.0) {
      throw Error(ErrorCode::InvalidArgument, "frame " + f.video_id + "/" + f.frame_id +
                                                  " has score outside [0, 1]");
    }
    auto [it, inserted] = by_video.try_emplace(f.video_id, Acc{{}, f.ground_truth});
    if (!inserted && it->second.label != f.ground_truth) {
      throw Error(ErrorCode::InconsistentLabel, "video " + f.video_id + " has frames of both labels");
    }
    it->second.scores.push_back(f.score);
  }
  std::vector<VideoScore> out;
  out.reserve(by_video.size());
  for (auto& [id, acc] : by_video) {
    auto& s = acc.scores;
    double v = 0.0;
    switch (aggregation) {
      case Aggregation::Mean:
        v = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
        break;
      case Aggregation::Median: {
        std::sort(s.begin(), s.end());
        const auto n = s.size();
        v = n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
        break;
      }
      case Aggregation::Max:
        v = *std::max_element(s.begin(), s.end());
        break;
    }
    out.push_back({id, v, acc.label, s.size()});
  }
  return out;
}

namespace {

std::pair<std::int64_t, std::int64_t> class_counts(std::span<const VideoScore> videos) {
  std::int64_t fake = 0;
  std::int64_t real = 0;
  for (const auto& v : videos) (v.label == Label::Fake ? fake : real)++;
  if (fake == 0 || real == 0) {
    throw Error(ErrorCode::SingleClass, fmt::format("AUC needs both classes (real videos: {}, "
                                                    "fake videos: {})",
                                                    real, fake));
  }
  return {fake, real};
}

}  // namespace

double auc_pairwise(std::span<const VideoScore> videos) {
  const auto [nf, nr] = class_counts(videos);
  std::int64_t twice_wins = 0;  // 2 per win, 1 per tie
  for (const auto& f : videos) {
    if (f.label != Label::Fake) continue;
    for (const auto& r : videos) {
      if (r.label != Label::Real) continue;
      if (f.score > r.score) twice_wins += 2;
      else if (f.score == r.score) twice_wins += 1;
    }
  }
  return static_cast<double>(twice_wins) / static_cast<double>(2 * nf * nr);
}

double auc_rank(std::span<const VideoScore> videos) {
  const auto [nf, nr] = class_counts(videos);
  std::vector<std::size_t> order(videos.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return videos[a].score < videos[b].score; });
  // Twice the mid-rank sum of fake videos keeps everything integral.
  std::int64_t twice_rank_sum = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && videos[order[j]].score == videos[order[i]].score) ++j;
    const auto twice_mid = static_cast<std::int64_t>(i + 1 + j);  // 2 * (i+1 + j)/2
    for (std::size_t t = i; t < j; ++t) {
      if (videos[order[t]].label == Label::Fake) twice_rank_sum += twice_mid;
    }
    i = j;
  }
  const std::int64_t twice_u = twice_rank_sum - nf * (nf + 1);
  return static_cast<double>(twice_u) / static_cast<double>(2 * nf * nr);
}

double video_level_auc(std::span<const FrameScore> frames, Aggregation aggregation) {
  const auto videos = aggregate_videos(frames, aggregation);
  // Pair counting stays cheap up to about a million cross pairs.
  if (videos.size() <= 2000) return auc_pairwise(videos);
  return auc_rank(videos);
}

RobustnessResult robustness_from_counts(std::int64_t adversarial, std::int64_t correct,
                                        std::string name) {
  if (adversarial <= 0) {
    throw Error(ErrorCode::NoAdversarialSamples,
                "robustness rate is undefined without adversarial samples" +
                    (name.empty() ? std::string() : " (" + name + ")"));
  }
  if (correct < 0 || correct > adversarial) {
    throw Error(ErrorCode::InvalidArgument, "correct count must lie in [0, adversarial]");
  }
  return {std::move(name), adversarial, correct,
          text::round_ratio_half_even(correct * 100, adversarial, 2)};
}

RobustnessResult robustness_rate(std::span<const RobustnessRecord> records, std::string name) {
  std::int64_t adversarial = 0;
  std::int64_t correct = 0;
  for (const auto& r : records) {
    if (!r.adversarial()) continue;
    ++adversarial;
    if (r.final_correct) ++correct;
  }
  return robustness_from_counts(adversarial, correct, std::move(name));
}

RobustnessResult weighted_robustness(std::span<const RobustnessResult> sets, std::string name) {
  std::int64_t adversarial = 0;
  std::int64_t correct = 0;
  for (const auto& s : sets) {
    adversarial += s.adversarial;
    correct += s.correct;
  }
  return robustness_from_counts(adversarial, correct, std::move(name));
}

std::vector<CostShare> cost_ratio(const CostProfile& profile) {
  if (profile.components.empty()) throw Error(ErrorCode::ZeroTotal, "cost profile is empty");
  std::set<std::string> seen;
  double total = 0.0;
  for (const auto& [name, g] : profile.components) {
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::DuplicateId, "cost component '" + name + "' listed twice");
    }
    if (!std::isfinite(g) || g < 0) {
      throw Error(ErrorCode::InvalidArgument, "cost component '" + name + "' must be >= 0");
    }
    total += g;
  }
  if (total <= 0) throw Error(ErrorCode::ZeroTotal, "total cost is zero");

  constexpr std::int64_t kUnits = 10'000;  // hundredths of a percent
  const auto n = profile.components.size();
  std::vector<std::int64_t> units(n);
  std::vector<double> remainder(n);
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double exact = static_cast<double>(kUnits) * profile.components[i].second / total;
    units[i] = static_cast<std::int64_t>(std::floor(exact));
    remainder[i] = exact - static_cast<double>(units[i]);
    assigned += units[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < kUnits; ++k, ++assigned) ++units[order[k % n]];

  std::vector<CostShare> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({profile.components[i].first, profile.components[i].second,
                   static_cast<double>(units[i]) / 100.0});
  }
  return out;
}

JudgeScore parse_judge_reply(std::string sample_id, std::string_view reply) {
  std::map<std::string, int> found;
  for (const auto& raw : text::split_lines(reply)) {
    auto line = text::trim(raw);
    while (!line.empty() && (line.front() == '-' || line.front() == '*')) {
      line = text::trim(line.substr(1));
    }
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    auto name = text::to_lower(text::trim(line.substr(0, colon)));
    std::erase(name, '*');
    if (name != "accuracy" && name != "faithfulness" && name != "professionalism") continue;
    auto value = text::trim(line.substr(colon + 1));
    while (!value.empty() && value.front() == '*') value.remove_prefix(1);
    while (!value.empty() && value.back() == '*') value.remove_suffix(1);
    value = text::trim(value);
    if (const auto slash = value.find('/'); slash != std::string_view::npos) {
      value = text::trim(value.substr(0, slash));
    }
    if (value.size() != 1 || value[0] < '0' || value[0] > '9') {
      throw Error(ErrorCode::JudgeFormatFailure,
                  "sample " + sample_id + ": " + name + " is not a single digit");
    }
    const int score = value[0] - '0';
    if (score > 3) {
      throw Error(ErrorCode::JudgeFormatFailure, "sample " + sample_id + ": " + name + " = " +
                                                     std::to_string(score) + " is outside 0-3");
    }
    if (!found.emplace(name, score).second) {
      throw Error(ErrorCode::JudgeFormatFailure, "sample " + sample_id + ": " + name + " given twice");
    }
  }
  for (const char* dim : {"accuracy", "faithfulness", "professionalism"}) {
    if (!found.contains(dim)) {
      throw Error(ErrorCode::JudgeFormatFailure,
                  "sample " + sample_id + ": no " + std::string(dim) + " score");
    }
  }
  return {std::move(sample_id), found["accuracy"], found["faithfulness"], found["professionalism"]};
}

double ExactMean::value() const {
  return static_cast<double>(numerator) / static_cast<double>(denominator);
}

double ExactMean::rounded(int decimals) const {
  return text::round_ratio_half_even(numerator, denominator, decimals);
}

ExactMean ExactMean::from_decimal(std::string name, double value, int decimals) {
  std::int64_t scale = 1;
  for (int i = 0; i < decimals; ++i) scale *= 10;
  return {std::move(name), std::llround(value * static_cast<double>(scale)), scale};
}

JudgeRun judge_explanations(gateway::Gateway& judge, std::span<const JudgeSample> samples,
                            const prompt::PromptTemplate& rubric, std::string judge_name,
                            int max_attempts) {
  if (max_attempts < 1) throw Error(ErrorCode::InvalidArgument, "max_attempts must be >= 1");
  JudgeRun run;
  run.judge = std::move(judge_name);
  std::vector<std::optional<JudgeScore>> scores(samples.size());
  std::vector<std::string> last_error(samples.size());
  std::vector<std::size_t> pending(samples.size());
  std::iota(pending.begin(), pending.end(), 0);

  for (int round = 0; round < max_attempts && !pending.empty(); ++round) {
    std::vector<gateway::ChatRequest> requests;
    for (auto i : pending) {
      const auto& s = samples[i];
      prompt::SlotMap slots{{std::string(prompt::slots::kExplanation), s.explanation},
                            {std::string(prompt::slots::kGroundTruth),
                             std::string(vrag::to_string(s.ground_truth))},
                            {std::string(prompt::slots::kImageRef), s.image_ref}};
      requests.push_back(judge.make_request(
          gateway::to_chat(prompt::render_prompt(rubric, slots, false), s.image_ref)));
    }
    const auto outcomes = judge.complete_batch(requests);
    std::vector<std::size_t> still;
    for (std::size_t p = 0; p < pending.size(); ++p) {
      const auto i = pending[p];
      if (!outcomes[p].ok()) {
        last_error[i] = outcomes[p].error->what();
        still.push_back(i);
        continue;
      }
      try {
        scores[i] = parse_judge_reply(samples[i].sample_id, outcomes[p].response->text);
      } catch (const Error& e) {
        last_error[i] = e.what();
        still.push_back(i);
      }
    }
    pending = std::move(still);
  }

  std::int64_t sum = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (scores[i]) {
      sum += scores[i]->total();
      run.scores.push_back(*scores[i]);
    } else {
      run.missing.push_back({samples[i].sample_id, last_error[i]});
    }
  }
  run.mean_total = {run.judge, sum,
                    run.scores.empty() ? 1 : static_cast<std::int64_t>(run.scores.size())};
  return run;
}

ExactMean cross_judge_average(std::span<const ExactMean> means) {
  if (means.empty()) throw Error(ErrorCode::EmptyBatch, "no judge means to average");
  std::int64_t lcm = 1;
  for (const auto& m : means) {
    if (m.denominator <= 0) throw Error(ErrorCode::InvalidArgument, "mean denominator must be > 0");
    lcm = std::lcm(lcm, m.denominator);
  }
  std::int64_t numerator = 0;
  for (const auto& m : means) numerator += m.numerator * (lcm / m.denominator);
  const auto denominator = lcm * static_cast<std::int64_t>(means.size());
  const auto g = std::gcd(numerator, denominator);
  return {"Average", numerator / g, denominator / g};
}

namespace {

std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out += " | ";
      out += c == 0 ? fmt::format("{:<{}}", cells[c], width[c])
                    : fmt::format("{:>{}}", cells[c], width[c]);
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out = line(header);
  std::string rule;
  for (std::size_t c = 0; c < width.size(); ++c) {
    if (c) rule += "-+-";
    rule += std::string(width[c], '-');
  }
  out += rule + "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

}  // namespace

std::string render_auc_table(std::span<const AucRow> rows) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    cells.push_back({r.dataset, std::to_string(r.real_videos), std::to_string(r.fake_videos),
                     text::fixed(r.auc, 2)});
  }
  return render_table({"Dataset", "Real videos", "Fake videos", "Video-level AUC"}, cells);
}

std::string render_robustness_table(std::span<const RobustnessResult> sets,
                                    const RobustnessResult& weighted) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& s : sets) {
    cells.push_back({s.name, std::to_string(s.adversarial), std::to_string(s.correct),
                     text::fixed(s.rate_percent, 2)});
  }
  cells.push_back({weighted.name, std::to_string(weighted.adversarial),
                   std::to_string(weighted.correct), text::fixed(weighted.rate_percent, 2)});
  return render_table({"Set", "Adversarial", "Correct", "Robustness Rate (%)"}, cells);
}

std::string render_cost_table(std::span<const CostShare> shares) {
  std::vector<std::vector<std::string>> cells;
  double total = 0.0;
  for (const auto& s : shares) {
    cells.push_back({s.name, fmt::format("{:g}", s.gflops), text::fixed(s.percent, 2)});
    total += s.gflops;
  }
  cells.push_back({"Total", fmt::format("{:g}", total), "100.00"});
  return render_table({"Component", "GFLOPs", "Ratio (%)"}, cells);
}

std::string render_judge_table(std::span<const ExactMean> judges, const ExactMean& average) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& j : judges) cells.push_back({j.name, text::fixed(j.rounded(2), 2)});
  cells.push_back({average.name, text::fixed(average.rounded(2), 2)});
  return render_table({"Judge", "Mean total (0-9)"}, cells);
}

json to_json(const RobustnessResult& r) {
  return {{"name", r.name},
          {"adversarial", r.adversarial},
          {"correct", r.correct},
          {"rate_percent", text::fixed(r.rate_percent, 2)}};
}

json to_json(const CostShare& c) {
  return {{"name", c.name}, {"gflops", c.gflops}, {"percent", text::fixed(c.percent, 2)}};
}

json to_json(const JudgeScore& s) {
  return {{"sample_id", s.sample_id},
          {"accuracy", s.accuracy},
          {"faithfulness", s.faithfulness},
          {"professionalism", s.professionalism},
          {"total", s.total()}};
}

json to_json(const ExactMean& m) {
  return {{"name", m.name},
          {"numerator", m.numerator},
          {"denominator", m.denominator},
          {"value", text::fixed(m.rounded(2), 2)}};
}

namespace {

std::string id_field(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  throw Error(ErrorCode::ParseError, std::string(key) + " must be a string or integer");
}

Label label_field(const json& j, const char* key) {
  const auto label = parse_label(j.at(key).get<std::string>());
  if (!label) throw Error(ErrorCode::ParseError, std::string(key) + " must be Real or Fake");
  return *label;
}

template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

}  // namespace

FrameScore frame_score_from_json(const json& j) {
  return guarded([&] {
    FrameScore f;
    f.video_id = id_field(j, "video_id");
    f.frame_id = j.contains("frame_id") ? id_field(j, "frame_id") : std::string();
    f.score = j.at("score").get<double>();
    f.ground_truth = label_field(j, "ground_truth");
    return f;
  });
}

RobustnessRecord robustness_record_from_json(const json& j) {
  return guarded([&] {
    RobustnessRecord r;
    r.sample_id = id_field(j, "sample_id");
    r.s1_correct = j.at("s1_correct").get<bool>();
    r.rag_correct = j.at("rag_correct").get<bool>();
    r.final_correct = j.at("final_correct").get<bool>();
    return r;
  });
}

CostProfile cost_profile_from_json(const json& j) {
  return guarded([&] {
    CostProfile p;
    const auto& c = j.contains("components") ? j.at("components") : j;
    if (c.is_array()) {
      for (const auto& item : c) {
        p.components.emplace_back(item.at("name").get<std::string>(), item.at("gflops").get<double>());
      }
    } else {
      for (const auto& [name, g] : c.items()) p.components.emplace_back(name, g.get<double>());
    }
    return p;
  });
}

}  // namespace vrag::eval
