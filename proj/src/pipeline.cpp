#include "vrag/pipeline.hpp"

#include "vrag/dataset.hpp"
#include "vrag/digest.hpp"
#include "vrag/fcot.hpp"
#include "vrag/fkd_store.hpp"
#include "vrag/jsonl.hpp"
#include "vrag/prompt.hpp"
#include "vrag/text.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>

#include <unistd.h>

namespace vrag::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

// --- configuration --------------------------------------------------------------

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed,
                std::string_view section) {
  if (!j.is_object()) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("config: {} must be an object", section));
  }
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("config: unknown key '{}' in {}", key, section));
    }
  }
}

std::optional<fs::path> path_field(const json& j, const char* key, const fs::path& base) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  fs::path p = j.at(key).get<std::string>();
  return p.is_absolute() ? p : base / p;
}

gateway::GatewayConfig role_defaults(std::string_view role) {
  gateway::GatewayConfig g;
  // Gold explanations benefit from some diversity across retries.
  if (role == kTeacherRole) g.temperature = 0.7;
  return g;
}

std::string path_string(const std::optional<fs::path>& p) { return p ? p->generic_string() : ""; }

}  // namespace

const gateway::GatewayConfig& PipelineConfig::gateway(std::string_view role) const {
  const auto it = gateways.find(role);
  if (it == gateways.end()) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("config: no gateway for role '{}'", role));
  }
  return it->second;
}

PipelineConfig config_from_json(const json& j, const fs::path& base_dir) {
  try {
    PipelineConfig c;
    c.base_dir = base_dir;
    for (auto role : {kPolicyRole, kTeacherRole, kJudgeRole}) {
      c.gateways.emplace(std::string(role), role_defaults(role));
    }
    check_keys(j, {"seed", "inputs", "sampling", "retrieval", "reward", "gateways", "dataset", "evaluation"},
               "the top level");
    if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();

    if (j.contains("inputs")) {
      const auto& in = j.at("inputs");
      check_keys(in, {"corpus", "inventory", "queries", "annotate", "templates"}, "inputs");
      c.corpus_source = path_field(in, "corpus", base_dir);
      c.inventory = path_field(in, "inventory", base_dir);
      c.queries = path_field(in, "queries", base_dir);
      c.annotate_source = path_field(in, "annotate", base_dir);
      c.templates_dir = path_field(in, "templates", base_dir);
    }
    if (j.contains("sampling")) {
      const auto& s = j.at("sampling");
      check_keys(s, {"targets"}, "sampling");
      const auto targets = s.value("targets", json::object());
      for (const auto& [name, n] : targets.items()) {
        const auto label = parse_label(name);
        if (!label) throw Error(ErrorCode::InvalidArgument, "config: sampling target '" + name + "'");
        c.sampling_targets[*label] = n.get<std::uint64_t>();
      }
    }
    if (j.contains("retrieval")) {
      const auto& r = j.at("retrieval");
      check_keys(r, {"k", "exclude_self"}, "retrieval");
      c.retrieval.k = r.value("k", c.retrieval.k);
      c.retrieval.exclude_self = r.value("exclude_self", c.retrieval.exclude_self);
    }
    if (j.contains("reward")) {
      const auto& r = j.at("reward");
      check_keys(r, {"alpha", "beta", "format_valid", "format_invalid", "unknown_s1", "epsilon"}, "reward");
      c.reward.alpha = r.value("alpha", c.reward.alpha);
      c.reward.beta = r.value("beta", c.reward.beta);
      c.reward.format_reward_valid = r.value("format_valid", c.reward.format_reward_valid);
      c.reward.format_reward_invalid = r.value("format_invalid", c.reward.format_reward_invalid);
      c.reward.epsilon = r.value("epsilon", c.reward.epsilon);
      if (r.contains("unknown_s1")) {
        c.reward.unknown_s1_policy = reward::parse_unknown_policy(r.at("unknown_s1").get<std::string>());
      }
      c.reward.validate();
    }
    if (j.contains("gateways")) {
      const auto& g = j.at("gateways");
      if (!g.is_object()) throw Error(ErrorCode::InvalidArgument, "config: gateways must be an object");
      for (const auto& [role, section] : g.items()) {
        auto cfg = gateway::gateway_config_from_json(section, role_defaults(role));
        if (cfg.cache_dir && cfg.cache_dir->is_relative()) cfg.cache_dir = base_dir / *cfg.cache_dir;
        c.gateways.insert_or_assign(role, std::move(cfg));
      }
    }
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      check_keys(d, {"stage1_count", "stage2_fraction", "teacher_attempts", "parallel", "rollouts_per_sample"},
                 "dataset");
      c.stage1_count = d.value("stage1_count", c.stage1_count);
      c.stage2_fraction = d.value("stage2_fraction", c.stage2_fraction);
      c.teacher_attempts = d.value("teacher_attempts", c.teacher_attempts);
      c.parallel = d.value("parallel", c.parallel);
      c.rollouts_per_sample = d.value("rollouts_per_sample", c.rollouts_per_sample);
    }
    if (j.contains("evaluation")) {
      const auto& e = j.at("evaluation");
      check_keys(e, {"aggregation", "score_rule", "dataset_name", "scores", "robustness", "robustness_counts",
                     "cost", "judges", "judge_attempts"},
                 "evaluation");
      if (e.contains("aggregation")) c.aggregation = eval::parse_aggregation(e.at("aggregation").get<std::string>());
      if (e.contains("score_rule")) c.score_rule = eval::parse_score_rule(e.at("score_rule").get<std::string>());
      c.dataset_name = e.value("dataset_name", c.dataset_name);
      c.eval_scores = path_field(e, "scores", base_dir);
      c.eval_robustness = path_field(e, "robustness", base_dir);
      const auto counts = e.value("robustness_counts", json::array());
      for (const auto& s : counts) {
        c.robustness_counts.push_back(eval::robustness_from_counts(
            s.at("adversarial").get<std::int64_t>(), s.at("correct").get<std::int64_t>(),
            s.at("name").get<std::string>()));
      }
      if (e.contains("cost")) c.cost = eval::cost_profile_from_json(e.at("cost"));
      c.judges = e.value("judges", c.judges);
      c.judge_attempts = e.value("judge_attempts", c.judge_attempts);
    }
    if (c.stage2_fraction < 0.0 || c.stage2_fraction > 1.0) {
      throw Error(ErrorCode::InvalidArgument, "config: dataset.stage2_fraction must lie in [0, 1]");
    }
    if (c.teacher_attempts < 1 || c.parallel < 1 || c.rollouts_per_sample < 1 || c.judge_attempts < 1) {
      throw Error(ErrorCode::InvalidArgument,
                  "config: attempts, parallel and rollouts_per_sample must be positive");
    }
    for (const auto& role : c.judges) c.gateway(role);
    for (const auto& [role, g] : c.gateways) g.validate();
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
}

PipelineConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::InvalidArgument, "config file " + path.string() + " not found");
  json j;
  try {
    j = json::parse(jsonl::read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

json to_json(const PipelineConfig& c) {
  json gateways = json::object();
  for (const auto& [role, g] : c.gateways) gateways[role] = gateway::to_json(g);
  json targets = json::object();
  for (const auto& [label, n] : c.sampling_targets) targets[std::string(to_string(label))] = n;
  json counts = json::array();
  for (const auto& r : c.robustness_counts) {
    counts.push_back({{"name", r.name}, {"adversarial", r.adversarial}, {"correct", r.correct}});
  }
  json cost = nullptr;
  if (c.cost) {
    cost = json::array();
    for (const auto& [name, g] : c.cost->components) cost.push_back({{"name", name}, {"gflops", g}});
  }
  return {{"seed", c.seed ? json(*c.seed) : json(nullptr)},
          {"inputs",
           {{"corpus", path_string(c.corpus_source)},
            {"inventory", path_string(c.inventory)},
            {"queries", path_string(c.queries)},
            {"annotate", path_string(c.annotate_source)},
            {"templates", path_string(c.templates_dir)}}},
          {"sampling", {{"targets", targets}}},
          {"retrieval", {{"k", c.retrieval.k}, {"exclude_self", c.retrieval.exclude_self}}},
          {"reward",
           {{"alpha", c.reward.alpha},
            {"beta", c.reward.beta},
            {"format_valid", c.reward.format_reward_valid},
            {"format_invalid", c.reward.format_reward_invalid},
            {"unknown_s1", reward::to_string(c.reward.unknown_s1_policy)},
            {"epsilon", c.reward.epsilon}}},
          {"gateways", gateways},
          {"dataset",
           {{"stage1_count", c.stage1_count},
            {"stage2_fraction", c.stage2_fraction},
            {"teacher_attempts", c.teacher_attempts},
            {"parallel", c.parallel},
            {"rollouts_per_sample", c.rollouts_per_sample}}},
          {"evaluation",
           {{"aggregation", eval::to_string(c.aggregation)},
            {"score_rule", eval::to_string(c.score_rule)},
            {"dataset_name", c.dataset_name},
            {"scores", path_string(c.eval_scores)},
            {"robustness", path_string(c.eval_robustness)},
            {"robustness_counts", counts},
            {"cost", cost},
            {"judges", c.judges},
            {"judge_attempts", c.judge_attempts}}}};
}

std::string config_digest(const PipelineConfig& config) {
  return sha256_hex(jsonl::dump(to_json(config)));
}

// --- shared plumbing --------------------------------------------------------------

namespace {

std::ostream& out(RunContext& ctx) { return ctx.out ? *ctx.out : std::cout; }

fs::path require_input(const std::optional<fs::path>& p, std::string_view key) {
  if (!p) throw Error(ErrorCode::InvalidArgument, fmt::format("config: inputs.{} is required", key));
  if (!fs::exists(*p)) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("config: inputs.{} ({}) does not exist", key, p->string()));
  }
  return *p;
}

fs::path require_artifact(const fs::path& p, std::string_view producer) {
  if (!fs::exists(p)) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("{} not found; run `{}` first", p.generic_string(), producer));
  }
  return p;
}

std::uint64_t require_seed(const RunContext& ctx, std::string_view what) {
  if (!ctx.config.seed) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("{} needs an explicit seed (--seed or config seed)", what));
  }
  return *ctx.config.seed;
}

// Artifacts a command wrote, hashed into the manifest. Nothing is written in
// dry-run mode.
class Artifacts {
 public:
  explicit Artifacts(RunContext& ctx) : ctx_(ctx) {}

  bool enabled() const { return !ctx_.flags.dry_run; }

  void write(const fs::path& path, const std::string& contents) {
    if (!enabled()) return;
    jsonl::write_file(path, contents);
    paths_.push_back(path);
  }
  void write_json(const fs::path& path, const json& j) { write(path, j.dump(2) + "\n"); }
  void write_lines(const fs::path& path, const std::vector<json>& records) {
    std::string buf;
    for (const auto& r : records) buf += jsonl::dump(r) + "\n";
    write(path, buf);
  }
  void wrote(const fs::path& path) {
    if (enabled()) paths_.push_back(path);
  }

  void commit(std::string_view command) {
    if (!enabled()) {
      out(ctx_) << command << ": dry run, inputs valid, nothing written\n";
      return;
    }
    const auto manifest_path = ctx_.layout.manifest();
    json manifest = {{"tool", kToolName}, {"tool_version", kToolVersion}, {"runs", json::object()}};
    if (fs::exists(manifest_path)) {
      try {
        auto existing = json::parse(jsonl::read_file(manifest_path));
        if (existing.is_object() && existing.contains("runs")) manifest["runs"] = existing["runs"];
      } catch (const json::exception&) {
        // A corrupt manifest is replaced rather than trusted.
      }
    }
    json files = json::object();
    for (const auto& p : paths_) {
      files[fs::relative(p, ctx_.layout.root).generic_string()] = sha256_file(p);
    }
    manifest["runs"][std::string(command)] = {
        {"config_digest", config_digest(ctx_.config)},
        {"seed", ctx_.config.seed ? json(*ctx_.config.seed) : json(nullptr)},
        {"k", ctx_.config.retrieval.k},
        {"mock", ctx_.flags.mock},
        {"strict_format", ctx_.flags.strict_format},
        {"tool_version", kToolVersion},
        {"timestamp", utc_timestamp()},
        {"artifacts", files}};
    jsonl::write_file(manifest_path, manifest.dump(2) + "\n");
  }

 private:
  static std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  RunContext& ctx_;
  std::vector<fs::path> paths_;
};

prompt::TemplateLibrary templates(const RunContext& ctx) {
  auto lib = prompt::TemplateLibrary::builtin();
  if (ctx.config.templates_dir) lib.load_dir(*ctx.config.templates_dir);
  return lib;
}

std::unique_ptr<gateway::Gateway> make_gateway(const RunContext& ctx, std::string_view role) {
  const auto& cfg = ctx.config.gateway(role);
  std::shared_ptr<gateway::Transport> transport;
  if (ctx.transport_factory) {
    transport = ctx.transport_factory(role);
  } else if (ctx.flags.mock) {
    gateway::MockOptions opts;
    opts.seed = ctx.config.seed.value_or(0);
    transport = std::make_shared<gateway::MockResponder>(opts);
  } else {
    transport = std::make_shared<gateway::HttpTransport>(cfg.endpoint_url);
  }
  return std::make_unique<gateway::Gateway>(cfg, std::move(transport), gateway::Gateway::Sleeper{},
                                            ctx.config.seed.value_or(0));
}

fcot::ParseMode parse_mode(const RunContext& ctx) {
  return ctx.flags.strict_format ? fcot::ParseMode::Strict : fcot::ParseMode::Lenient;
}

std::string optional_string(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return {};
  const auto& v = j.at(key);
  return v.is_string() ? v.get<std::string>() : v.dump();
}

MaybeLabel optional_label(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const auto text = j.at(key).get<std::string>();
  if (text::iequals(text, "unknown")) return std::nullopt;
  const auto label = parse_label(text);
  if (!label) throw Error(ErrorCode::ParseError, fmt::format("{} must be Real or Fake, got '{}'", key, text));
  return label;
}

json label_json(const MaybeLabel& l) { return l ? json(to_string(*l)) : json(nullptr); }

// Turns the first failed batch outcome into an error naming the sample.
void raise_batch_failures(const std::vector<gateway::BatchOutcome>& outcomes,
                          const std::vector<std::string>& ids, std::string_view role) {
  std::size_t failed = 0;
  std::optional<std::size_t> first;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].ok()) continue;
    ++failed;
    if (!first) first = i;
  }
  if (!first) return;
  const auto& e = *outcomes[*first].error;
  throw Error(e.code(), fmt::format("{} of {} {} requests failed; first: sample '{}': {}", failed,
                                    outcomes.size(), role, ids[*first], e.detail()));
}

// One line of datasets/retrieval.jsonl.
struct RetrievedQuery {
  std::string query_id;
  std::string video_id;
  std::string image_ref;
  std::string dataset;
  MaybeLabel ground_truth;
  MaybeLabel s1_pred;
  retrieval::EvidenceBundle bundle;
};

json to_json(const RetrievedQuery& q) {
  json j = {{"query_id", q.query_id},
            {"video_id", q.video_id},
            {"image_ref", q.image_ref},
            {"dataset", q.dataset},
            {"ground_truth", label_json(q.ground_truth)},
            {"bundle", retrieval::to_json(q.bundle)}};
  if (q.s1_pred) j["s1_pred"] = to_string(*q.s1_pred);
  return j;
}

std::vector<RetrievedQuery> load_retrieved(const fs::path& path) {
  std::vector<RetrievedQuery> out;
  jsonl::for_each(path, [&](std::size_t, const json& j) {
    RetrievedQuery q;
    q.query_id = j.at("query_id").get<std::string>();
    q.video_id = optional_string(j, "video_id");
    q.image_ref = optional_string(j, "image_ref");
    q.dataset = optional_string(j, "dataset");
    q.ground_truth = optional_label(j, "ground_truth");
    q.s1_pred = optional_label(j, "s1_pred");
    q.bundle = retrieval::bundle_from_json(j.at("bundle"));
    if (q.ground_truth) q.bundle.rag_correct = q.bundle.majority_label == *q.ground_truth;
    out.push_back(std::move(q));
  });
  return out;
}

std::vector<dataset::SampleRecord> load_samples(const fs::path& path) {
  std::vector<dataset::SampleRecord> out;
  jsonl::for_each(path, [&](std::size_t, const json& j) { out.push_back(dataset::sample_from_json(j)); });
  return out;
}

retrieval::Retriever load_retriever(const RunContext& ctx) {
  const auto corpus = fkd::load_corpus(require_artifact(ctx.layout.corpus(), "ingest"));
  if (fs::exists(ctx.layout.index())) {
    return retrieval::Retriever(retrieval::VectorIndex::load(ctx.layout.index()), corpus);
  }
  return retrieval::Retriever(corpus);
}

json logprobs_json(const std::optional<std::vector<gateway::TokenLogprob>>& lp) {
  if (!lp) return nullptr;
  json out = json::array();
  for (const auto& t : *lp) {
    json top = json::array();
    for (const auto& [tok, p] : t.top) top.push_back(json::array({tok, p}));
    out.push_back({{"token", t.token}, {"logprob", t.logprob}, {"top", top}});
  }
  return out;
}

std::optional<std::vector<gateway::TokenLogprob>> logprobs_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  std::vector<gateway::TokenLogprob> out;
  for (const auto& t : j) {
    gateway::TokenLogprob tl;
    tl.token = t.at("token").get<std::string>();
    tl.logprob = t.at("logprob").get<double>();
    for (const auto& pair : t.at("top")) {
      tl.top.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<double>());
    }
    out.push_back(std::move(tl));
  }
  return out;
}

struct Partition {
  std::set<std::string> stage1;
  std::set<std::string> stage2;
  std::set<std::string> stage3;
};

std::optional<Partition> load_partition(const Layout& layout) {
  const auto path = layout.datasets() / "partition.json";
  if (!fs::exists(path)) return std::nullopt;
  const auto j = json::parse(jsonl::read_file(path));
  Partition p;
  for (const auto& id : j.at("partition").at("stage1_videos")) p.stage1.insert(id.get<std::string>());
  for (const auto& id : j.at("pool").at("stage2_videos")) p.stage2.insert(id.get<std::string>());
  for (const auto& id : j.at("pool").at("stage3_videos")) p.stage3.insert(id.get<std::string>());
  return p;
}

}  // namespace

// --- subcommands ------------------------------------------------------------------

void cmd_ingest(RunContext& ctx) {
  const auto src = require_input(ctx.config.corpus_source, "corpus");
  std::vector<fkd::KnowledgeEntry> entries;
  jsonl::for_each(src / fkd::kEntriesFile,
                  [&](std::size_t, const json& j) { entries.push_back(fkd::entry_from_json(j)); });
  std::uint32_t dim = 0;
  std::vector<float> rows;
  fkd::decode_vector_file(jsonl::read_file(src / fkd::kVectorsFile), dim, rows);
  const std::size_t count = dim == 0 ? 0 : rows.size() / dim;
  if (count != entries.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("{} holds {} vectors for {} entries", (src / fkd::kVectorsFile).string(), count,
                            entries.size()));
  }
  std::vector<fkd::EmbeddingRecord> vectors;
  vectors.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    fkd::EmbeddingRecord rec;
    rec.embedding_id = entries[i].embedding_id;
    rec.vector.assign(rows.begin() + static_cast<std::ptrdiff_t>(i * dim),
                      rows.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
    rec.l2_norm = fkd::l2_norm(rec.vector);
    vectors.push_back(std::move(rec));
  }

  Artifacts artifacts(ctx);
  fkd::CorpusManifest manifest;
  if (artifacts.enabled()) {
    manifest = fkd::ingest(entries, vectors, ctx.layout.corpus());
    for (auto name : {fkd::kEntriesFile, fkd::kVectorsFile, fkd::kManifestFile}) {
      artifacts.wrote(ctx.layout.corpus() / name);
    }
  } else {
    const auto scratch = fs::temp_directory_path() / fmt::format("vrag-dry-{}", ::getpid());
    try {
      manifest = fkd::ingest(entries, vectors, scratch);
    } catch (...) {
      fs::remove_all(scratch);
      throw;
    }
    fs::remove_all(scratch);
  }
  out(ctx) << fmt::format("ingest: {} entries (Real {}, Fake {}), dimension {}\n", manifest.count,
                          manifest.counts_by_label[Label::Real], manifest.counts_by_label[Label::Fake],
                          manifest.dimension);
  artifacts.commit("ingest");
}

void cmd_plan_sample(RunContext& ctx) {
  const auto seed = require_seed(ctx, "plan-sample");
  const auto path = require_input(ctx.config.inventory, "inventory");
  if (ctx.config.sampling_targets.empty() && ctx.config.stage1_count == 0) {
    throw Error(ErrorCode::InvalidArgument,
                "plan-sample needs sampling.targets or dataset.stage1_count in the config");
  }
  std::map<std::string, fkd::VideoInventory> inventory;
  std::vector<dataset::VideoItem> videos;
  jsonl::for_each(path, [&](std::size_t, const json& j) {
    const auto id = j.at("video_id").get<std::string>();
    const auto label = optional_label(j, "label");
    if (!label) throw Error(ErrorCode::ParseError, "label is required");
    const auto frames = j.value("available_frames", 0U);
    if (!inventory.emplace(id, fkd::VideoInventory{*label, frames}).second) {
      throw Error(ErrorCode::DuplicateId, "video " + id + " listed twice");
    }
    videos.push_back({id, *label});
  });

  Artifacts artifacts(ctx);
  if (!ctx.config.sampling_targets.empty()) {
    const auto plan = fkd::build_sampling_plan(inventory, ctx.config.sampling_targets, seed);
    artifacts.write_json(ctx.layout.datasets() / "sampling_plan.json", fkd::to_json(plan));
    for (const auto& [label, n] : plan.planned) {
      out(ctx) << fmt::format("plan-sample: {} {} frames planned, shortfall {}\n", to_string(label), n,
                              plan.shortfall.contains(label) ? plan.shortfall.at(label) : 0);
    }
  }
  if (ctx.config.stage1_count > 0) {
    const auto partition = dataset::partition_stages(videos, ctx.config.stage1_count, seed);
    std::set<std::string> pool_ids(partition.stage23_videos.begin(), partition.stage23_videos.end());
    std::vector<dataset::VideoItem> pool;
    for (const auto& v : videos) {
      if (pool_ids.contains(v.video_id)) pool.push_back(v);
    }
    const auto split = dataset::split_pool(pool, ctx.config.stage2_fraction, seed);
    artifacts.write_json(ctx.layout.datasets() / "partition.json",
                         {{"partition", dataset::to_json(partition)}, {"pool", dataset::to_json(split)}});
    out(ctx) << fmt::format("plan-sample: stage1 {} videos, stage2 {}, stage3 {} (digest {})\n",
                            partition.stage1_videos.size(), split.stage2_videos.size(),
                            split.stage3_videos.size(), partition.digest().substr(0, 12));
  }
  artifacts.commit("plan-sample");
}

void cmd_index(RunContext& ctx) {
  const auto corpus = fkd::load_corpus(require_artifact(ctx.layout.corpus(), "ingest"));
  const auto index = retrieval::VectorIndex::build(corpus);
  Artifacts artifacts(ctx);
  if (artifacts.enabled()) {
    index.save(ctx.layout.index());
    for (const auto& entry : fs::directory_iterator(ctx.layout.index())) artifacts.wrote(entry.path());
  }
  out(ctx) << fmt::format("index: {} rows, dimension {}\n", index.size(), index.dimension());
  artifacts.commit("index");
}

void cmd_retrieve(RunContext& ctx) {
  auto cfg = ctx.config.retrieval;
  if (cfg.k == 0) throw Error(ErrorCode::InvalidArgument, "k must be positive");
  if (cfg.k % 2 == 0) {
    throw Error(ErrorCode::EvenK, fmt::format("k must be odd for a strict majority, got {}", cfg.k));
  }
  const auto path = require_input(ctx.config.queries, "queries");
  const auto retriever = load_retriever(ctx);

  std::vector<RetrievedQuery> meta;
  std::vector<retrieval::BatchQuery> batch;
  std::set<std::string> seen;
  jsonl::for_each(path, [&](std::size_t, const json& j) {
    RetrievedQuery q;
    q.query_id = j.at("query_id").get<std::string>();
    if (!seen.insert(q.query_id).second) throw Error(ErrorCode::DuplicateId, "query listed twice");
    q.video_id = optional_string(j, "video_id");
    q.image_ref = j.contains("image_ref") ? optional_string(j, "image_ref") : q.query_id;
    q.dataset = j.contains("dataset") ? optional_string(j, "dataset") : ctx.config.dataset_name;
    q.ground_truth = optional_label(j, "ground_truth");
    q.s1_pred = optional_label(j, "s1_pred");

    retrieval::BatchQuery bq;
    bq.query_id = q.query_id;
    if (j.contains("vector")) {
      bq.vector = j.at("vector").get<std::vector<float>>();
    } else if (j.contains("vector_ref")) {
      const auto ref = j.at("vector_ref").get<std::string>();
      const auto row = retriever.index().find(ref);
      if (!row) throw Error(ErrorCode::DanglingEmbeddingRef, "vector_ref '" + ref + "' is not in the corpus");
      const auto r = retriever.index().row(*row);
      bq.vector.assign(r.begin(), r.end());
      bq.self_id = ref;
    } else {
      throw Error(ErrorCode::ParseError, "query needs a vector or a vector_ref");
    }
    if (j.contains("self_id")) bq.self_id = j.at("self_id").get<std::string>();
    if (cfg.exclude_self && !bq.self_id) {
      throw Error(ErrorCode::InvalidArgument, "exclude_self is set but the query has no self_id or vector_ref");
    }
    if (!cfg.exclude_self) bq.self_id.reset();
    meta.push_back(std::move(q));
    batch.push_back(std::move(bq));
  });

  const auto results =
      retrieval::retrieve_batch(retriever, batch, cfg, static_cast<unsigned>(ctx.config.parallel));
  std::vector<json> lines;
  std::string result_lines;
  std::size_t rag_correct = 0;
  std::size_t with_gt = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto& q = meta[i];
    q.bundle = retrieval::assemble_bundle(q.query_id, results[i], q.ground_truth);
    if (q.ground_truth) {
      ++with_gt;
      if (q.bundle.rag_correct.value_or(false)) ++rag_correct;
    }
    lines.push_back(to_json(q));
    result_lines += retrieval::format_result_line(q.query_id, results[i]) + "\n";
  }
  Artifacts artifacts(ctx);
  artifacts.write_lines(ctx.layout.datasets() / "retrieval.jsonl", lines);
  artifacts.write(ctx.layout.datasets() / "retrieval_results.jsonl", result_lines);
  out(ctx) << fmt::format("retrieve: {} queries, k={}, evidence majority correct on {}/{}\n", results.size(),
                          cfg.k, rag_correct, with_gt);
  artifacts.commit("retrieve");
}

void cmd_annotate_fkd(RunContext& ctx) {
  const auto path = require_input(ctx.config.annotate_source, "annotate");
  const auto lib = templates(ctx);

  struct Pending {
    fkd::KnowledgeEntry entry;
    std::string image_ref;
  };
  std::vector<Pending> pending;
  std::vector<gateway::ChatRequest> requests;
  std::vector<std::string> ids;
  auto teacher = make_gateway(ctx, kTeacherRole);
  jsonl::for_each(path, [&](std::size_t, const json& j) {
    fkd::KnowledgeEntry e;
    const auto& ref = j.at("media_ref");
    e.media_ref = {ref.at("dataset").get<std::string>(), ref.at("video_id").get<std::string>(),
                   ref.at("frame_id").get<std::string>()};
    const auto label = optional_label(j, "label");
    if (!label) throw Error(ErrorCode::ParseError, "label is required");
    e.label = *label;
    const auto method = parse_method(j.at("method").get<std::string>());
    if (!method) throw Error(ErrorCode::ParseError, "unknown manipulation method");
    e.method = *method;
    e.entry_id = j.contains("entry_id") ? j.at("entry_id").get<std::string>()
                                        : fkd::make_entry_id(e.media_ref, e.method);
    e.embedding_id = j.value("embedding_id", e.entry_id);
    const auto image = j.value("image_ref", e.entry_id);

    prompt::SlotMap slots;
    if (e.method == ManipulationMethod::Real) {
      slots.emplace(prompt::slots::kRealImage, image);
    } else {
      if (!j.contains("original_image_ref")) {
        throw Error(ErrorCode::InvalidArgument, "manipulated frames need original_image_ref");
      }
      slots.emplace(prompt::slots::kManipulatedImage, image);
      slots.emplace(prompt::slots::kOriginalImage, j.at("original_image_ref").get<std::string>());
    }
    const auto& tmpl = lib.get(prompt::annotation_template_id(e.method));
    requests.push_back(teacher->make_request(gateway::to_chat(prompt::render_prompt(tmpl, slots), image)));
    ids.push_back(e.entry_id);
    pending.push_back({std::move(e), image});
  });

  Artifacts artifacts(ctx);
  if (!artifacts.enabled()) {
    artifacts.commit("annotate-fkd");
    return;
  }
  const auto outcomes = teacher->complete_batch(requests);
  raise_batch_failures(outcomes, ids, "teacher");
  std::vector<json> lines;
  json failures = json::array();
  for (std::size_t i = 0; i < pending.size(); ++i) {
    auto e = pending[i].entry;
    e.raw_annotation = std::string(text::trim(outcomes[i].response->text));
    try {
      e.findings = fkd::parse_annotation(e.raw_annotation, ctx.flags.strict_format);
      fkd::validate_entry(e);
      lines.push_back(fkd::to_json(e));
    } catch (const Error& err) {
      failures.push_back({{"entry_id", e.entry_id}, {"error", err.what()}});
    }
  }
  artifacts.write_lines(ctx.layout.datasets() / "fkd_annotations.jsonl", lines);
  artifacts.write_json(ctx.layout.reports() / "annotate_fkd.json",
                       {{"requested", pending.size()}, {"annotated", lines.size()}, {"failures", failures}});
  out(ctx) << fmt::format("annotate-fkd: {} of {} frames annotated\n", lines.size(), pending.size());
  artifacts.commit("annotate-fkd");
  if (!failures.empty()) {
    throw Error(ErrorCode::TeacherFormatFailure,
                fmt::format("{} annotations unusable; first: {}", failures.size(),
                            failures.front().at("error").get<std::string>()));
  }
}

void cmd_classify(RunContext& ctx) {
  const auto queries = load_retrieved(require_artifact(ctx.layout.datasets() / "retrieval.jsonl", "retrieve"));
  std::vector<dataset::SampleRecord> samples;
  std::vector<std::size_t> need_s1;
  for (const auto& q : queries) {
    if (!q.ground_truth) {
      throw Error(ErrorCode::InvalidArgument, "retrieval.jsonl: query '" + q.query_id + "' has no ground_truth");
    }
    dataset::SampleRecord r;
    r.sample_id = q.query_id;
    r.video_id = q.video_id;
    r.image_ref = q.image_ref;
    r.ground_truth = *q.ground_truth;
    r.bundle = q.bundle;
    if (q.s1_pred) {
      r.s1_pred = q.s1_pred;
      r.s1_mode = "provided";
    } else {
      need_s1.push_back(samples.size());
    }
    samples.push_back(std::move(r));
  }

  Artifacts artifacts(ctx);
  if (!need_s1.empty() && artifacts.enabled()) {
    // Preliminary judgments come from the policy without evidence.
    auto policy = make_gateway(ctx, kPolicyRole);
    const auto lib = templates(ctx);
    const auto& question = lib.get(prompt::ids::kStage1Question);
    std::vector<gateway::ChatRequest> requests;
    std::vector<std::string> ids;
    for (auto i : need_s1) {
      requests.push_back(policy->make_request(
          gateway::to_chat(prompt::render_prompt(question, {}), samples[i].image_ref)));
      ids.push_back(samples[i].sample_id);
    }
    const auto outcomes = policy->complete_batch(requests);
    raise_batch_failures(outcomes, ids, "policy");
    for (std::size_t n = 0; n < need_s1.size(); ++n) {
      const auto& reply = outcomes[n].response->text;
      auto label = parse_label(reply);
      if (!label) label = fcot::extract_s1_pred(reply);
      samples[need_s1[n]].s1_pred = label;
    }
  }
  for (auto& s : samples) dataset::assign_kind(s);

  std::vector<json> lines;
  for (const auto& s : samples) lines.push_back(dataset::to_json(s));
  const auto report = dataset::kind_report(samples);
  artifacts.write_lines(ctx.layout.datasets() / "samples.jsonl", lines);
  artifacts.write_json(ctx.layout.reports() / "classify.json", dataset::to_json(report));
  for (const auto& [kind, n] : report.counts) out(ctx) << fmt::format("classify: {} {}\n", fcot::to_string(kind), n);
  artifacts.commit("classify");
}

void cmd_build_fcot(RunContext& ctx) {
  const auto samples = load_samples(require_artifact(ctx.layout.datasets() / "samples.jsonl", "classify"));
  const auto lib = templates(ctx);
  for (const auto& s : samples) lib.get(s.teacher_template_id);

  Artifacts artifacts(ctx);
  if (!artifacts.enabled()) {
    artifacts.commit("build-fcot");
    return;
  }
  auto teacher = make_gateway(ctx, kTeacherRole);
  const dataset::TeacherOptions options{ctx.config.teacher_attempts, ctx.config.parallel};
  const auto outcomes = dataset::build_fcot_batch(samples, *teacher, lib, options);

  std::vector<dataset::SampleRecord> built;
  std::vector<json> lines;
  json failures = json::array();
  std::map<int, std::uint64_t> attempts;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].record) {
      built.push_back(*outcomes[i].record);
      lines.push_back(dataset::to_json(built.back()));
      ++attempts[built.back().attempts];
    } else {
      failures.push_back({{"sample_id", samples[i].sample_id}, {"error", outcomes[i].error->what()}});
    }
  }
  json attempt_hist = json::object();
  for (const auto& [n, count] : attempts) attempt_hist[std::to_string(n)] = count;
  artifacts.write_lines(ctx.layout.datasets() / "fcot.jsonl", lines);
  artifacts.write_json(ctx.layout.reports() / "build_fcot.json",
                       {{"requested", samples.size()},
                        {"built", built.size()},
                        {"kinds", dataset::to_json(dataset::kind_report(built))},
                        {"attempts", attempt_hist},
                        {"failures", failures}});
  out(ctx) << fmt::format("build-fcot: {} of {} gold responses built\n", built.size(), samples.size());
  artifacts.commit("build-fcot");
  if (!failures.empty()) {
    throw Error(ErrorCode::TeacherFormatFailure,
                fmt::format("{} samples without gold; first: {}", failures.size(),
                            failures.front().at("error").get<std::string>()));
  }
}

void cmd_export_stage(RunContext& ctx, int stage) {
  const auto recipe = dataset::export_training_recipe(stage);
  const auto partition = load_partition(ctx.layout);
  const auto lib = templates(ctx);
  Artifacts artifacts(ctx);
  const auto datasets = ctx.layout.datasets();

  if (stage == 1) {
    const auto corpus = fkd::load_corpus(require_artifact(ctx.layout.corpus(), "ingest"));
    std::vector<dataset::Stage1Frame> frames;
    for (const auto& e : corpus.entries) {
      if (partition && !partition->stage1.contains(e.media_ref.video_id)) continue;
      frames.push_back({e.entry_id, e.entry_id, e.label});
    }
    const auto& question = lib.get(prompt::ids::kStage1Question);
    if (artifacts.enabled()) {
      dataset::export_stage1_vqa(frames, question, datasets / "stage1_vqa.jsonl");
      artifacts.wrote(datasets / "stage1_vqa.jsonl");
    }
    out(ctx) << fmt::format("export-stage 1: {} frames\n", frames.size());
  } else if (stage == 2) {
    auto samples = load_samples(require_artifact(datasets / "fcot.jsonl", "build-fcot"));
    if (partition) {
      std::erase_if(samples, [&](const auto& s) { return !partition->stage2.contains(s.video_id); });
    }
    for (const auto& s : samples) {
      if (!s.gold_fcot) throw Error(ErrorCode::MissingGold, "sample " + s.sample_id + " has no gold F-CoT");
      dataset::validate_sample(s);
    }
    const auto& inference = lib.get(prompt::ids::kInference);
    if (artifacts.enabled()) {
      const auto report = dataset::export_stage2_sft(samples, inference, datasets / "stage2_sft.jsonl");
      artifacts.wrote(datasets / "stage2_sft.jsonl");
      artifacts.write_json(ctx.layout.reports() / "export_stage2.json", dataset::to_json(report));
    }
    out(ctx) << fmt::format("export-stage 2: {} samples\n", samples.size());
  } else {
    auto samples = load_samples(require_artifact(datasets / "samples.jsonl", "classify"));
    std::set<std::string> earlier;
    if (partition) {
      std::erase_if(samples, [&](const auto& s) { return !partition->stage3.contains(s.video_id); });
      earlier = partition->stage1;
      earlier.insert(partition->stage2.begin(), partition->stage2.end());
    } else {
      const auto corpus = fkd::load_corpus(require_artifact(ctx.layout.corpus(), "ingest"));
      for (const auto& e : corpus.entries) earlier.insert(e.media_ref.video_id);
    }
    for (const auto& s : samples) {
      if (earlier.contains(s.video_id)) {
        throw Error(ErrorCode::StageOverlap,
                    "sample " + s.sample_id + " comes from video " + s.video_id + ", which an earlier stage used");
      }
    }
    const auto& inference = lib.get(prompt::ids::kInference);
    if (artifacts.enabled()) {
      dataset::export_stage3_prompts(samples, earlier, inference, datasets / "stage3_prompts.jsonl");
      artifacts.wrote(datasets / "stage3_prompts.jsonl");
    }
    out(ctx) << fmt::format("export-stage 3: {} prompts\n", samples.size());
  }
  artifacts.write_json(datasets / fmt::format("recipe_stage{}.json", stage), dataset::to_json(recipe));
  artifacts.commit(fmt::format("export-stage-{}", stage));
}

void cmd_infer(RunContext& ctx) {
  const auto queries = load_retrieved(require_artifact(ctx.layout.datasets() / "retrieval.jsonl", "retrieve"));
  const auto lib = templates(ctx);
  const auto& inference = lib.get(prompt::ids::kInference);
  auto policy = make_gateway(ctx, kPolicyRole);
  std::vector<gateway::ChatRequest> requests;
  std::vector<std::string> ids;
  for (const auto& q : queries) {
    const auto messages = dataset::inference_messages(inference, q.image_ref, q.bundle);
    for (int r = 0; r < ctx.config.rollouts_per_sample; ++r) {
      requests.push_back(policy->make_request(gateway::to_chat(messages, q.image_ref), true));
      ids.push_back(q.query_id);
    }
  }
  Artifacts artifacts(ctx);
  if (!artifacts.enabled()) {
    artifacts.commit("infer");
    return;
  }
  const auto outcomes = policy->complete_batch(requests);
  raise_batch_failures(outcomes, ids, "policy");

  std::vector<json> lines;
  std::size_t valid = 0;
  std::size_t correct = 0;
  std::size_t i = 0;
  for (const auto& q : queries) {
    for (int r = 0; r < ctx.config.rollouts_per_sample; ++r, ++i) {
      const auto& resp = *outcomes[i].response;
      const auto parsed = fcot::parse_fcot(resp.text, parse_mode(ctx));
      if (parsed.format_valid) ++valid;
      if (q.ground_truth && parsed.answer == q.ground_truth) ++correct;
      lines.push_back({{"sample_id", q.query_id},
                       {"rollout", r},
                       {"video_id", q.video_id},
                       {"image_ref", q.image_ref},
                       {"dataset", q.dataset},
                       {"ground_truth", label_json(q.ground_truth)},
                       {"rag_majority", to_string(q.bundle.majority_label)},
                       {"bundle", retrieval::to_json(q.bundle)},
                       {"response", resp.text},
                       {"parsed", fcot::to_json(parsed)},
                       {"logprobs", logprobs_json(resp.token_logprobs)}});
    }
  }
  artifacts.write_lines(ctx.layout.rollouts() / "inference.jsonl", lines);
  out(ctx) << fmt::format("infer: {} rollouts, {} well-formed, {} correct\n", lines.size(), valid, correct);
  artifacts.commit("infer");
}

void cmd_score_rewards(RunContext& ctx) {
  const auto path = require_artifact(ctx.layout.rollouts() / "inference.jsonl", "infer");
  struct Row {
    std::string sample_id;
    int rollout = 0;
    reward::RewardRecord record;
  };
  std::vector<Row> rows;
  jsonl::for_each(path, [&](std::size_t, const json& j) {
    const auto gt = optional_label(j, "ground_truth");
    if (!gt) throw Error(ErrorCode::InvalidArgument, "rollout has no ground_truth");
    const auto bundle = retrieval::bundle_from_json(j.at("bundle"));
    rows.push_back({j.at("sample_id").get<std::string>(), j.value("rollout", 0),
                    reward::score_rollout(j.at("response").get<std::string>(), *gt, bundle, ctx.config.reward)});
  });
  if (rows.empty()) throw Error(ErrorCode::EmptyBatch, path.string() + " holds no rollouts");

  // Groups are the rollouts of one sample; singletons have no advantage.
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < rows.size(); ++i) groups[rows[i].sample_id].push_back(i);
  std::vector<std::optional<double>> advantage(rows.size());
  for (const auto& [id, members] : groups) {
    if (members.size() < 2) continue;
    std::vector<double> rewards;
    for (auto m : members) rewards.push_back(rows[m].record.R_i);
    const auto adv = reward::group_advantages(rewards, ctx.config.reward.epsilon);
    for (std::size_t n = 0; n < members.size(); ++n) advantage[members[n]] = adv.advantages[n];
  }

  std::vector<json> lines;
  std::vector<reward::RewardRecord> records;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto j = reward::to_json(rows[i].record);
    j["sample_id"] = rows[i].sample_id;
    j["rollout"] = rows[i].rollout;
    j["advantage"] = advantage[i] ? json(*advantage[i]) : json(nullptr);
    lines.push_back(std::move(j));
    records.push_back(rows[i].record);
  }
  const auto mean = reward::batch_reward(records);
  Artifacts artifacts(ctx);
  artifacts.write_lines(ctx.layout.rollouts() / "rewards.jsonl", lines);
  artifacts.write_json(ctx.layout.reports() / "rewards.json",
                       {{"rollouts", rows.size()}, {"groups", groups.size()}, {"batch_reward", mean}});
  out(ctx) << fmt::format("score-rewards: {} rollouts, batch reward {:.4f}\n", rows.size(), mean);
  artifacts.commit("score-rewards");
}

namespace {

struct EvalRollout {
  std::string dataset;
  eval::FrameScore frame;
  eval::RobustnessRecord robustness;
  std::string explanation;
  std::string image_ref;
};

std::vector<EvalRollout> load_eval_rollouts(const RunContext& ctx, const fs::path& path) {
  std::vector<EvalRollout> out;
  jsonl::for_each(path, [&](std::size_t, const json& j) {
    const auto gt = optional_label(j, "ground_truth");
    if (!gt) throw Error(ErrorCode::InvalidArgument, "rollout has no ground_truth");
    const auto parsed = fcot::parse_fcot(j.at("response").get<std::string>(), parse_mode(ctx));
    const auto lp = logprobs_from_json(j.value("logprobs", json(nullptr)));
    const auto bundle = retrieval::bundle_from_json(j.at("bundle"));
    EvalRollout r;
    r.dataset = j.contains("dataset") ? optional_string(j, "dataset") : ctx.config.dataset_name;
    const auto sample_id = j.at("sample_id").get<std::string>();
    r.frame = {optional_string(j, "video_id"), sample_id,
               eval::answer_to_score(parsed, lp, ctx.config.score_rule).score, *gt};
    if (r.frame.video_id.empty()) r.frame.video_id = sample_id;
    r.robustness = {sample_id, parsed.s1_pred == gt, bundle.majority_label == *gt, parsed.answer == gt};
    r.explanation = parsed.fusion.empty() ? j.at("response").get<std::string>() : parsed.fusion;
    r.image_ref = optional_string(j, "image_ref");
    out.push_back(std::move(r));
  });
  return out;
}

eval::AucRow auc_row(const std::string& name, const std::vector<eval::FrameScore>& frames,
                     eval::Aggregation aggregation) {
  const auto videos = eval::aggregate_videos(frames, aggregation);
  eval::AucRow row{name, 0.0, 0, 0};
  for (const auto& v : videos) ++(v.label == Label::Fake ? row.fake_videos : row.real_videos);
  try {
    row.auc = eval::video_level_auc(frames, aggregation);
  } catch (const Error& e) {
    throw Error(e.code(), "dataset '" + name + "': " + e.detail());
  }
  return row;
}

}  // namespace

void cmd_eval(RunContext& ctx) {
  const auto& cfg = ctx.config;
  std::vector<EvalRollout> rollouts;
  std::map<std::string, std::vector<eval::FrameScore>> frames;
  if (cfg.eval_scores) {
    jsonl::for_each(require_input(cfg.eval_scores, "evaluation.scores"), [&](std::size_t, const json& j) {
      const auto name = j.contains("dataset") ? optional_string(j, "dataset") : cfg.dataset_name;
      frames[name].push_back(eval::frame_score_from_json(j));
    });
  } else {
    rollouts = load_eval_rollouts(ctx, require_artifact(ctx.layout.rollouts() / "inference.jsonl", "infer"));
    for (const auto& r : rollouts) frames[r.dataset].push_back(r.frame);
  }

  json summary = {{"score_rule", eval::to_string(cfg.score_rule)},
                  {"aggregation", eval::to_string(cfg.aggregation)},
                  {"robustness", nullptr},
                  {"cost", nullptr},
                  {"judges", nullptr}};
  json auc = json::array();
  for (const auto& [name, f] : frames) {
    const auto row = auc_row(name, f, cfg.aggregation);
    auc.push_back({{"dataset", row.dataset},
                   {"auc", row.auc},
                   {"real_videos", row.real_videos},
                   {"fake_videos", row.fake_videos}});
  }
  summary["auc"] = auc;

  // Robustness: explicit counts, then a record file, then the rollouts.
  std::vector<eval::RobustnessResult> sets = cfg.robustness_counts;
  std::vector<std::string> skipped;
  if (sets.empty()) {
    std::map<std::string, std::vector<eval::RobustnessRecord>> by_set;
    if (cfg.eval_robustness) {
      jsonl::for_each(require_input(cfg.eval_robustness, "evaluation.robustness"),
                      [&](std::size_t, const json& j) {
                        const auto name = j.contains("dataset") ? optional_string(j, "dataset") : cfg.dataset_name;
                        by_set[name].push_back(eval::robustness_record_from_json(j));
                      });
    } else {
      for (const auto& r : rollouts) by_set[r.dataset].push_back(r.robustness);
    }
    for (const auto& [name, records] : by_set) {
      if (std::none_of(records.begin(), records.end(), [](const auto& r) { return r.adversarial(); })) {
        skipped.push_back(name);
        continue;
      }
      sets.push_back(eval::robustness_rate(records, name));
    }
  }
  if (!sets.empty()) {
    json rows = json::array();
    for (const auto& s : sets) rows.push_back(eval::to_json(s));
    summary["robustness"] = {{"sets", rows},
                             {"weighted", eval::to_json(eval::weighted_robustness(sets))},
                             {"skipped", skipped}};
  } else if (!skipped.empty()) {
    summary["robustness"] = {{"sets", json::array()}, {"weighted", nullptr}, {"skipped", skipped}};
  }

  if (cfg.cost) {
    json shares = json::array();
    for (const auto& s : eval::cost_ratio(*cfg.cost)) shares.push_back(eval::to_json(s));
    summary["cost"] = shares;
  }

  Artifacts artifacts(ctx);
  if (!cfg.judges.empty()) {
    if (rollouts.empty()) {
      throw Error(ErrorCode::InvalidArgument, "judging needs rollouts from `infer`, not a score file");
    }
    std::vector<eval::JudgeSample> samples;
    for (const auto& r : rollouts) {
      samples.push_back({r.frame.frame_id, r.explanation, r.image_ref, r.frame.ground_truth});
    }
    const auto lib = templates(ctx);
    const auto& rubric = lib.get(prompt::ids::kJudgeRubric);
    json runs = json::array();
    std::vector<eval::ExactMean> means;
    if (artifacts.enabled()) {
      for (const auto& role : cfg.judges) {
        auto judge = make_gateway(ctx, role);
        const auto run = eval::judge_explanations(*judge, samples, rubric, role, cfg.judge_attempts);
        std::vector<json> lines;
        for (const auto& s : run.scores) lines.push_back(eval::to_json(s));
        artifacts.write_lines(ctx.layout.reports() / fmt::format("judge_{}.jsonl", role), lines);
        json missing = json::array();
        for (const auto& m : run.missing) missing.push_back({{"sample_id", m.sample_id}, {"reason", m.reason}});
        runs.push_back({{"judge", role},
                        {"scored", run.scores.size()},
                        {"missing", missing},
                        {"mean_total", eval::to_json(run.mean_total)}});
        if (!run.scores.empty()) means.push_back(run.mean_total);
      }
    }
    summary["judges"] = {{"runs", runs},
                         {"average", means.empty() ? json(nullptr) : eval::to_json(eval::cross_judge_average(means))}};
  }

  const auto report = render_report(summary);
  artifacts.write_json(ctx.layout.reports() / "eval.json", summary);
  artifacts.write(ctx.layout.reports() / "report.txt", report);
  out(ctx) << report;
  artifacts.commit("eval");
}

std::string render_report(const json& summary) {
  try {
    std::string outp;
    outp += fmt::format("Score rule: {}; video aggregation: {}\n\n", summary.value("score_rule", "?"),
                        summary.value("aggregation", "?"));
    std::vector<eval::AucRow> rows;
    for (const auto& a : summary.value("auc", json::array())) {
      rows.push_back({a.at("dataset").get<std::string>(), a.at("auc").get<double>(),
                      a.at("real_videos").get<std::size_t>(), a.at("fake_videos").get<std::size_t>()});
    }
    if (!rows.empty()) outp += "Detection\n" + eval::render_auc_table(rows) + "\n";

    const auto& rob = summary.value("robustness", json(nullptr));
    if (!rob.is_null() && !rob.at("weighted").is_null()) {
      std::vector<eval::RobustnessResult> sets;
      for (const auto& s : rob.at("sets")) {
        sets.push_back(eval::robustness_from_counts(s.at("adversarial").get<std::int64_t>(),
                                                    s.at("correct").get<std::int64_t>(),
                                                    s.at("name").get<std::string>()));
      }
      outp += "Robustness under misleading evidence\n" +
              eval::render_robustness_table(sets, eval::weighted_robustness(sets)) + "\n";
    }
    if (!rob.is_null() && rob.at("weighted").is_null()) outp += "Robustness under misleading evidence\n";
    if (!rob.is_null()) {
      for (const auto& name : rob.value("skipped", json::array())) {
        outp += fmt::format("(set '{}' has no adversarial samples)\n\n", name.get<std::string>());
      }
    }

    const auto& cost = summary.value("cost", json(nullptr));
    if (!cost.is_null()) {
      std::vector<eval::CostShare> shares;
      for (const auto& c : cost) {
        shares.push_back({c.at("name").get<std::string>(), c.at("gflops").get<double>(),
                          std::stod(c.at("percent").get<std::string>())});
      }
      outp += "Compute cost\n" + eval::render_cost_table(shares) + "\n";
    }

    const auto& judges = summary.value("judges", json(nullptr));
    if (!judges.is_null() && !judges.at("average").is_null()) {
      auto mean = [](const json& m) {
        return eval::ExactMean{m.at("name").get<std::string>(), m.at("numerator").get<std::int64_t>(),
                               m.at("denominator").get<std::int64_t>()};
      };
      std::vector<eval::ExactMean> means;
      for (const auto& r : judges.at("runs")) {
        if (r.at("scored").get<std::size_t>() > 0) means.push_back(mean(r.at("mean_total")));
      }
      outp += "Explanation quality\n" + eval::render_judge_table(means, mean(judges.at("average"))) + "\n";
    }
    return outp;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("evaluation summary: ") + e.what());
  }
}

void cmd_report(RunContext& ctx) {
  const auto path = require_artifact(ctx.layout.reports() / "eval.json", "eval");
  json summary;
  try {
    summary = json::parse(jsonl::read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  const auto report = render_report(summary);
  Artifacts artifacts(ctx);
  artifacts.write(ctx.layout.reports() / "report.txt", report);
  out(ctx) << report;
  artifacts.commit("report");
}

// --- argument parsing -------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& out_stream, std::ostream& err_stream,
        TransportFactory transport_factory) {
  CLI::App app{"Evidence-grounded forgery reasoning pipeline", std::string(kToolName)};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  app.fallthrough();

  Flags flags;
  std::string config_path;
  std::uint64_t seed = 0;
  std::size_t k = 0;
  std::string out_dir = "out";
  app.add_option("--config", config_path, "pipeline configuration (JSON)")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "seed for every randomized step");
  auto* k_opt = app.add_option("--k", k, "evidence items per query (odd)");
  app.add_option("--out", out_dir, "artifact directory");
  app.add_flag("--mock", flags.mock, "answer every gateway role with the rule-mode mock");
  app.add_flag("--dry-run", flags.dry_run, "validate config and inputs without writing");
  app.add_flag("--strict-format", flags.strict_format, "parse model output strictly");

  int stage = 0;
  std::map<std::string, std::function<void(RunContext&)>> commands{
      {"ingest", cmd_ingest},
      {"plan-sample", cmd_plan_sample},
      {"index", cmd_index},
      {"retrieve", cmd_retrieve},
      {"annotate-fkd", cmd_annotate_fkd},
      {"classify", cmd_classify},
      {"build-fcot", cmd_build_fcot},
      {"export-stage", [&stage](RunContext& ctx) { cmd_export_stage(ctx, stage); }},
      {"infer", cmd_infer},
      {"score-rewards", cmd_score_rewards},
      {"eval", cmd_eval},
      {"report", cmd_report}};
  const std::map<std::string, std::string> help{
      {"ingest", "validate and persist the knowledge corpus"},
      {"plan-sample", "frame sampling plan and stage partition"},
      {"index", "build and persist the vector index"},
      {"retrieve", "top-k evidence for every query"},
      {"annotate-fkd", "teacher annotations for corpus frames"},
      {"classify", "preliminary judgments and sample types"},
      {"build-fcot", "gold structured responses from the teacher"},
      {"export-stage", "training set and recipe for stage 1, 2 or 3"},
      {"infer", "evidence-grounded inference with the policy model"},
      {"score-rewards", "reward dump for inference rollouts"},
      {"eval", "AUC, robustness, cost and judge report"},
      {"report", "render the tables of the last evaluation"}};
  for (const auto& [name, fn] : commands) {
    auto* sub = app.add_subcommand(name, help.at(name));
    if (name == "export-stage") sub->add_option("stage", stage, "1, 2 or 3")->required()->check(CLI::Range(1, 3));
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out_stream, err_stream);
    return code == 0 ? 0 : 1;
  }

  const auto* sub = app.get_subcommands().front();
  const auto& name = sub->get_name();
  try {
    RunContext ctx;
    ctx.flags = flags;
    if (!config_path.empty()) ctx.flags.config = config_path;
    ctx.config = ctx.flags.config ? load_config(*ctx.flags.config) : config_from_json(json::object(), fs::current_path());
    if (seed_opt->count() > 0) ctx.config.seed = seed;
    if (k_opt->count() > 0) ctx.config.retrieval.k = k;
    ctx.layout.root = out_dir;
    ctx.out = &out_stream;
    ctx.err = &err_stream;
    ctx.transport_factory = std::move(transport_factory);
    if (ctx.flags.mock) require_seed(ctx, "--mock");
    commands.at(name)(ctx);
    return 0;
  } catch (const Error& e) {
    err_stream << name << ": " << e.what() << "\n";
    return is_validation_error(e.code()) ? 1 : 2;
  } catch (const std::exception& e) {
    err_stream << name << ": " << e.what() << "\n";
    return 2;
  }
}

}  // namespace vrag::pipeline
