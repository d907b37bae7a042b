#include "vrag/dataset.hpp"

#include "vrag/digest.hpp"
#include "vrag/jsonl.hpp"
#include "vrag/random.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <numeric>
#include <thread>

namespace vrag::dataset {

using nlohmann::json;

namespace {

// Per-class quotas summing to `count`: floors of the proportional share, with
// the leftover going to the largest remainders (ties to the lower label).
std::map<Label, std::size_t> class_quotas(const std::map<Label, std::vector<std::string>>& by_label,
                                          std::size_t total, std::size_t count) {
  std::map<Label, std::size_t> quota;
  std::vector<std::pair<std::size_t, Label>> remainders;
  std::size_t assigned = 0;
  for (const auto& [label, ids] : by_label) {
    const auto share = count * ids.size();
    quota[label] = share / total;
    remainders.emplace_back(share % total, label);
    assigned += quota[label];
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < count; ++i, ++assigned) ++quota[remainders[i].second];
  return quota;
}

// Returns (selected, rest), both sorted.
std::pair<std::vector<std::string>, std::vector<std::string>> stratified_select(
    std::span<const VideoItem> items, std::size_t count, std::uint64_t seed) {
  std::map<Label, std::vector<std::string>> by_label;
  std::set<std::string> seen;
  for (const auto& v : items) {
    if (!seen.insert(v.video_id).second) {
      throw Error(ErrorCode::DuplicateId, "video " + v.video_id + " listed twice");
    }
    by_label[v.label].push_back(v.video_id);
  }
  std::vector<std::string> selected;
  std::vector<std::string> rest;
  if (items.empty()) return {selected, rest};
  const auto quota = class_quotas(by_label, items.size(), count);
  for (auto& [label, ids] : by_label) {
    std::sort(ids.begin(), ids.end());
    std::mt19937_64 rng(seed * 2 + static_cast<std::uint64_t>(label));
    seeded_shuffle(ids, rng);
    const auto q = quota.at(label);
    selected.insert(selected.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(q));
    rest.insert(rest.end(), ids.begin() + static_cast<std::ptrdiff_t>(q), ids.end());
  }
  std::sort(selected.begin(), selected.end());
  std::sort(rest.begin(), rest.end());
  return {selected, rest};
}

json string_array(const std::vector<std::string>& v) { return json(v); }

}  // namespace

std::string StagePartition::digest() const {
  std::string buf = "stage1\n";
  for (const auto& id : stage1_videos) buf += id + "\n";
  buf += "stage23\n";
  for (const auto& id : stage23_videos) buf += id + "\n";
  return sha256_hex(buf);
}

StagePartition partition_stages(std::span<const VideoItem> inventory, std::size_t stage1_count,
                                std::uint64_t seed) {
  if (stage1_count >= inventory.size()) {
    throw Error(ErrorCode::CountTooLarge,
                "stage1_count " + std::to_string(stage1_count) + " must be below the inventory size " +
                    std::to_string(inventory.size()));
  }
  auto [s1, rest] = stratified_select(inventory, stage1_count, seed);
  return {std::move(s1), std::move(rest), seed};
}

PoolSplit split_pool(std::span<const VideoItem> pool, double stage2_fraction, std::uint64_t seed) {
  if (!(stage2_fraction >= 0.0 && stage2_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "stage2 fraction must lie in [0, 1]");
  }
  const auto count =
      static_cast<std::size_t>(std::llround(stage2_fraction * static_cast<double>(pool.size())));
  // A different stream from partition_stages so the two draws are independent.
  auto [s2, s3] = stratified_select(pool, count, seed ^ 0x5354414745323333ULL);
  return {std::move(s2), std::move(s3), stage2_fraction};
}

json to_json(const StagePartition& p) {
  return {{"seed", p.seed},
          {"stage1_videos", string_array(p.stage1_videos)},
          {"stage23_videos", string_array(p.stage23_videos)},
          {"digest", p.digest()}};
}

json to_json(const PoolSplit& p) {
  return {{"stage2_fraction", p.stage2_fraction},
          {"stage2_videos", string_array(p.stage2_videos)},
          {"stage3_videos", string_array(p.stage3_videos)}};
}

fcot::SampleKind classify_sample(bool s1_correct, bool rag_correct) {
  if (s1_correct) return fcot::SampleKind::CrossVerification;
  return rag_correct ? fcot::SampleKind::EvidenceGuidedCorrection
                     : fcot::SampleKind::ResilientRejection;
}

Label gold_initial_judgment(fcot::SampleKind kind, Label ground_truth) {
  return kind == fcot::SampleKind::EvidenceGuidedCorrection ? opposite(ground_truth) : ground_truth;
}

void assign_kind(SampleRecord& r) {
  r.kind = classify_sample(r.s1_correct(), r.rag_correct());
  r.teacher_template_id = prompt::teacher_template_id(r.kind);
}

void validate_sample(const SampleRecord& r) {
  if (r.kind != classify_sample(r.s1_correct(), r.rag_correct())) {
    throw Error(ErrorCode::InvalidEntry, "sample " + r.sample_id + " is labelled " +
                                             std::string(fcot::to_string(r.kind)) +
                                             " but its judgments say otherwise");
  }
  if (!r.gold_fcot) return;
  const auto parsed = fcot::parse_fcot(*r.gold_fcot, fcot::ParseMode::Strict);
  if (!parsed.format_valid) {
    std::string why;
    for (const auto& v : parsed.violations) why += (why.empty() ? "" : ", ") + fcot::to_string(v);
    throw Error(ErrorCode::InvalidGold, "sample " + r.sample_id + " gold is malformed: " + why);
  }
  if (parsed.answer != r.ground_truth) {
    throw Error(ErrorCode::InvalidGold,
                "sample " + r.sample_id + " gold answer differs from the ground truth");
  }
}

json to_json(const SampleRecord& r) {
  return {{"sample_id", r.sample_id},
          {"video_id", r.video_id},
          {"image_ref", r.image_ref},
          {"ground_truth", to_string(r.ground_truth)},
          {"s1_pred", to_string(r.s1_pred)},
          {"s1_mode", r.s1_mode},
          {"bundle", retrieval::to_json(r.bundle)},
          {"kind", fcot::to_string(r.kind)},
          {"gold_fcot", r.gold_fcot ? json(*r.gold_fcot) : json(nullptr)},
          {"teacher_template_id", r.teacher_template_id},
          {"attempts", r.attempts}};
}

SampleRecord sample_from_json(const json& j) {
  try {
    SampleRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.video_id = j.value("video_id", std::string{});
    r.image_ref = j.at("image_ref").get<std::string>();
    const auto gt = parse_label(j.at("ground_truth").get<std::string>());
    if (!gt) throw Error(ErrorCode::ParseError, "ground_truth must be Real or Fake");
    r.ground_truth = *gt;
    if (j.contains("s1_pred") && j.at("s1_pred").is_string()) {
      r.s1_pred = parse_label(j.at("s1_pred").get<std::string>());
    }
    r.s1_mode = j.value("s1_mode", std::string("no-rag"));
    r.bundle = retrieval::bundle_from_json(j.at("bundle"));
    r.bundle.rag_correct = r.bundle.majority_label == r.ground_truth;
    if (j.contains("kind") && j.at("kind").is_string()) {
      const auto kind = fcot::parse_sample_kind(j.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorCode::ParseError, "unknown sample kind");
      r.kind = *kind;
      r.teacher_template_id = j.value("teacher_template_id", prompt::teacher_template_id(r.kind));
    } else {
      assign_kind(r);
    }
    if (j.contains("gold_fcot") && j.at("gold_fcot").is_string()) {
      r.gold_fcot = j.at("gold_fcot").get<std::string>();
    }
    r.attempts = j.value("attempts", 0);
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

KindReport kind_report(std::span<const SampleRecord> records) {
  KindReport rep;
  for (auto k : {fcot::SampleKind::CrossVerification, fcot::SampleKind::EvidenceGuidedCorrection,
                 fcot::SampleKind::ResilientRejection}) {
    rep.counts[k] = 0;
  }
  for (const auto& r : records) {
    ++rep.counts[r.kind];
    const auto fakes = std::count_if(r.bundle.items.begin(), r.bundle.items.end(),
                                     [](const auto& it) { return it.label == Label::Fake; });
    if (fakes > 0 && static_cast<std::size_t>(fakes) < r.bundle.items.size()) ++rep.mixed_evidence;
    if (!r.s1_pred) ++rep.unknown_s1;
  }
  return rep;
}

json to_json(const KindReport& rep) {
  json counts = json::object();
  std::uint64_t total = 0;
  for (const auto& [k, n] : rep.counts) {
    counts[std::string(fcot::to_string(k))] = n;
    total += n;
  }
  return {{"counts", counts},
          {"total", total},
          {"mixed_evidence", rep.mixed_evidence},
          {"unknown_s1", rep.unknown_s1}};
}

SampleRecord build_fcot_sample(SampleRecord record, gateway::Gateway& teacher,
                               const prompt::TemplateLibrary& templates,
                               const TeacherOptions& options) {
  if (options.max_attempts < 1) {
    throw Error(ErrorCode::InvalidArgument, "teacher max_attempts must be >= 1");
  }
  if (record.teacher_template_id.empty()) {
    record.teacher_template_id = prompt::teacher_template_id(record.kind);
  }
  const auto& tmpl = templates.get(record.teacher_template_id);
  const auto evidence = fcot::format_evidence_block(record.bundle);
  prompt::SlotMap slots{
      {std::string(prompt::slots::kEvidenceBlock), evidence.text},
      {std::string(prompt::slots::kGroundTruth), std::string(to_string(record.ground_truth))},
      {std::string(prompt::slots::kImageRef), record.image_ref}};
  const auto request = teacher.make_request(
      gateway::to_chat(prompt::render_prompt(tmpl, slots, false), record.image_ref));
  const Label initial = gold_initial_judgment(record.kind, record.ground_truth);

  std::string last_problem;
  for (int attempt = 1; attempt <= options.max_attempts; ++attempt) {
    const auto reply = teacher.complete(request);
    auto parsed = fcot::parse_fcot(reply.text, fcot::ParseMode::Lenient);
    if (!parsed.format_valid) {
      last_problem = "malformed reply";
      for (const auto& v : parsed.violations) last_problem += " " + fcot::to_string(v);
      continue;
    }
    if (parsed.answer != record.ground_truth) {
      last_problem = "answer " + to_string(parsed.answer) + " differs from ground truth";
      continue;
    }
    parsed.preliminary = fcot::with_initial_judgment(parsed.preliminary, initial);
    parsed.s1_pred = fcot::extract_s1_pred(parsed.preliminary);
    if (parsed.s1_pred != initial) {
      last_problem = "preliminary judgment " + to_string(parsed.s1_pred) + " does not fit " +
                     std::string(fcot::to_string(record.kind));
      continue;
    }
    try {
      record.gold_fcot = fcot::serialize_fcot(parsed);
    } catch (const Error& e) {
      last_problem = e.detail();
      continue;
    }
    record.attempts = attempt;
    return record;
  }
  throw Error(ErrorCode::TeacherFormatFailure,
              "sample " + record.sample_id + ": no usable teacher reply after " +
                  std::to_string(options.max_attempts) + " attempts (" + last_problem + ")");
}

std::vector<BuildOutcome> build_fcot_batch(const std::vector<SampleRecord>& records,
                                           gateway::Gateway& teacher,
                                           const prompt::TemplateLibrary& templates,
                                           const TeacherOptions& options) {
  std::vector<BuildOutcome> out(records.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto i = next++; i < records.size(); i = next++) {
      try {
        out[i].record = build_fcot_sample(records[i], teacher, templates, options);
      } catch (const Error& e) {
        out[i].error = e;
      }
    }
  };
  const auto n = std::min<std::size_t>(records.size(),
                                       static_cast<std::size_t>(std::max(1, options.parallel)));
  std::vector<std::jthread> threads;
  for (std::size_t t = 1; t < n; ++t) threads.emplace_back(worker);
  worker();
  return out;
}

namespace {

json messages_json(const std::vector<prompt::Message>& messages) {
  json out = json::array();
  for (const auto& m : messages) out.push_back({{"role", prompt::to_string(m.role)}, {"content", m.text}});
  return out;
}

class LineWriter {
 public:
  explicit LineWriter(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  }
  void add(const json& record) { buf_ += jsonl::dump(record) + "\n"; }
  void commit() { jsonl::write_file(path_, buf_); }

 private:
  std::filesystem::path path_;
  std::string buf_;
};

}  // namespace

std::size_t export_stage1_vqa(std::span<const Stage1Frame> frames,
                              const prompt::PromptTemplate& question,
                              const std::filesystem::path& out) {
  const auto messages = prompt::render_prompt(question, {});
  std::string question_text;
  for (const auto& m : messages) {
    if (m.role == prompt::Role::User) question_text = m.text;
  }
  LineWriter w(out);
  for (const auto& f : frames) {
    w.add({{"sample_id", f.sample_id.empty() ? f.image_ref : f.sample_id},
           {"image_ref", f.image_ref},
           {"question", question_text},
           {"label", to_string(f.label)}});
  }
  w.commit();
  return frames.size();
}

std::vector<prompt::Message> inference_messages(const prompt::PromptTemplate& inference,
                                                const std::string& image_ref,
                                                const retrieval::EvidenceBundle& bundle) {
  prompt::SlotMap slots{{std::string(prompt::slots::kImageRef), image_ref},
                        {std::string(prompt::slots::kEvidenceBlock),
                         fcot::format_evidence_block(bundle).text}};
  return prompt::render_prompt(inference, slots, false);
}

KindReport export_stage2_sft(std::span<const SampleRecord> samples,
                             const prompt::PromptTemplate& inference,
                             const std::filesystem::path& out) {
  for (const auto& s : samples) {
    if (!s.gold_fcot) {
      throw Error(ErrorCode::MissingGold, "sample " + s.sample_id + " has no gold F-CoT");
    }
    validate_sample(s);
  }
  LineWriter w(out);
  for (const auto& s : samples) {
    w.add({{"sample_id", s.sample_id},
           {"image_ref", s.image_ref},
           {"prompt", messages_json(inference_messages(inference, s.image_ref, s.bundle))},
           {"target", *s.gold_fcot},
           {"kind", fcot::to_string(s.kind)},
           {"ground_truth", to_string(s.ground_truth)}});
  }
  w.commit();
  return kind_report(samples);
}

std::size_t export_stage3_prompts(std::span<const SampleRecord> samples,
                                  const std::set<std::string>& earlier_stage_videos,
                                  const prompt::PromptTemplate& inference,
                                  const std::filesystem::path& out) {
  for (const auto& s : samples) {
    if (earlier_stage_videos.contains(s.video_id)) {
      throw Error(ErrorCode::StageOverlap, "sample " + s.sample_id + " comes from video " +
                                               s.video_id + ", which an earlier stage used");
    }
  }
  LineWriter w(out);
  for (const auto& s : samples) {
    w.add({{"sample_id", s.sample_id},
           {"video_id", s.video_id},
           {"image_ref", s.image_ref},
           {"prompt", messages_json(inference_messages(inference, s.image_ref, s.bundle))},
           {"ground_truth", to_string(s.ground_truth)},
           {"bundle", retrieval::to_json(s.bundle)}});
  }
  w.commit();
  return samples.size();
}

TrainingRecipe export_training_recipe(int stage) {
  TrainingRecipe r;
  r.stage = stage;
  r.adapter_params = {{"rank", 128}, {"scaling", 256}};
  switch (stage) {
    case 1:
      r.objective = "Alignment";
      r.epochs = 3;
      r.learning_rate = 5e-5;
      r.batch_size = 512;
      r.tuned_submodules = {"vision_encoder", "aligner", "language_model"};
      r.augmentations = {"HorizontalFlip", "ImageCompression", "HueSaturationValue"};
      break;
    case 2:
      r.objective = "SFT";
      r.epochs = 2;
      r.learning_rate = 3e-5;
      r.batch_size = 64;
      r.tuned_submodules = {"aligner", "language_model"};
      r.frozen_submodules = {"vision_encoder"};
      break;
    case 3:
      r.objective = "GRPO";
      r.epochs = 1;
      r.learning_rate = 1e-6;
      r.batch_size = 32;
      r.extra_params = {{"kl_beta", 0.001}};
      r.tuned_submodules = {"aligner", "language_model"};
      r.frozen_submodules = {"vision_encoder"};
      break;
    default:
      throw Error(ErrorCode::InvalidArgument, "stage must be 1, 2 or 3, got " + std::to_string(stage));
  }
  return r;
}

json to_json(const TrainingRecipe& r) {
  return {{"stage", r.stage},
          {"objective", r.objective},
          {"epochs", r.epochs},
          {"learning_rate", r.learning_rate},
          {"batch_size", r.batch_size},
          {"extra_params", r.extra_params},
          {"adapter", {{"type", "lora"}, {"rank", r.adapter_params.at("rank")},
                       {"scaling", r.adapter_params.at("scaling")}}},
          {"tuned_submodules", r.tuned_submodules},
          {"frozen_submodules", r.frozen_submodules},
          {"augmentations", r.augmentations}};
}

}  // namespace vrag::dataset
