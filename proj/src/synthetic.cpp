#include "vrag/synthetic.hpp"

#include "vrag/common.hpp"
#include "vrag/fkd_store.hpp"
#include "vrag/jsonl.hpp"
#include "vrag/random.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace vrag::synthetic {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array kFakeMethods{ManipulationMethod::DeepFakes, ManipulationMethod::Face2Face,
                                  ManipulationMethod::FaceSwap, ManipulationMethod::NeuralTextures};

constexpr std::array kFakeFindings{
    "[Mouth]: teeth merge into a single blurred band [Jawline]: boundary shimmers against the neck",
    "[Eyes]: mismatched specular highlights between the two irises [Nose]: bridge shading is flat",
    "[Facial Skin]: waxy texture with missing pores [Hairline]: strands dissolve into the forehead",
    "[Eyebrows]: asymmetric thickness with a pasted edge [Mouth]: lip contour jitters",
};

constexpr std::array kRealFindings{
    "[Facial Skin]: consistent pore detail under soft light [Eyes]: reflections agree with the light source",
    "[Hairline]: individual strands with natural falloff [Jawline]: shadow follows the head pose",
    "[Mouth]: separate teeth with coherent shading [Nose]: highlight matches the scene lighting",
};

std::vector<double> unit_random(std::mt19937_64& rng, std::uint32_t dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  for (auto& x : v) {
    x = 2.0 * uniform_unit(rng) - 1.0;
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

std::vector<float> sample_near(const std::vector<double>& center, double noise, std::mt19937_64& rng) {
  std::vector<double> v(center.size());
  double norm = 0.0;
  const double amp = noise / std::sqrt(static_cast<double>(center.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = center[i] + amp * (2.0 * uniform_unit(rng) - 1.0);
    norm += v[i] * v[i];
  }
  norm = std::sqrt(norm);
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

std::string lines(const std::vector<json>& records) {
  std::string buf;
  for (const auto& r : records) buf += jsonl::dump(r) + "\n";
  return buf;
}

}  // namespace

Workspace write_workspace(const fs::path& root, const Options& o) {
  if (o.dimension < 2 || o.frames_per_video == 0 || o.corpus_videos_per_class == 0 ||
      o.query_videos_per_class == 0) {
    throw Error(ErrorCode::InvalidArgument, "synthetic workspace needs dimension >= 2 and non-empty sets");
  }
  std::mt19937_64 rng(o.seed);
  const auto real_center = unit_random(rng, o.dimension);
  std::vector<double> fake_center = real_center;
  for (auto& x : fake_center) x = -x;  // antipodal clusters

  Workspace ws;
  ws.root = root;
  ws.corpus_dir = root / "corpus_src";
  ws.queries = root / "queries.jsonl";
  ws.inventory = root / "inventory.jsonl";
  ws.annotate = root / "annotate.jsonl";
  ws.scores = root / "scores.jsonl";
  ws.config = root / "config.json";
  fs::create_directories(ws.corpus_dir);

  std::vector<json> entries;
  std::vector<float> rows;
  std::vector<json> inventory;
  std::vector<json> annotate;
  for (auto label : {Label::Real, Label::Fake}) {
    const auto& center = label == Label::Real ? real_center : fake_center;
    for (std::size_t v = 0; v < o.corpus_videos_per_class; ++v) {
      const auto method = label == Label::Real ? ManipulationMethod::Real : kFakeMethods[v % kFakeMethods.size()];
      const auto video = fmt::format("fkd_{}_{:03}", label == Label::Real ? "real" : "fake", v);
      inventory.push_back({{"video_id", video}, {"label", to_string(label)}, {"available_frames", 32}});
      for (std::size_t f = 0; f < o.frames_per_video; ++f) {
        const fkd::MediaRef ref{"synthetic", video, fmt::format("{:04}", f * 10)};
        const auto idx = v * o.frames_per_video + f;
        std::string annotation = label == Label::Real ? kRealFindings[idx % kRealFindings.size()]
                                                      : kFakeFindings[idx % kFakeFindings.size()];
        if (method == ManipulationMethod::NeuralTextures) annotation = kFakeFindings[2];
        const auto id = fkd::make_entry_id(ref, method);
        entries.push_back({{"entry_id", id},
                           {"media_ref", {{"dataset", ref.dataset}, {"video_id", ref.video_id},
                                          {"frame_id", ref.frame_id}}},
                           {"label", to_string(label)},
                           {"method", to_string(method)},
                           {"raw_annotation", annotation},
                           {"embedding_id", id}});
        const auto vec = sample_near(center, o.noise, rng);
        rows.insert(rows.end(), vec.begin(), vec.end());
        if (f == 0) {
          json a = {{"media_ref", entries.back()["media_ref"]},
                    {"label", to_string(label)},
                    {"method", to_string(method)},
                    {"image_ref", "frames/" + id + ".png"}};
          if (label == Label::Fake) {
            a["original_image_ref"] = fmt::format("frames/synthetic/Real/fkd_real_{:03}/{}.png", v, ref.frame_id);
          }
          annotate.push_back(std::move(a));
        }
      }
    }
  }
  jsonl::write_file(ws.corpus_dir / fkd::kEntriesFile, lines(entries));
  jsonl::write_file(ws.corpus_dir / fkd::kVectorsFile, fkd::encode_vector_file(o.dimension, rows));
  ws.corpus_entries = entries.size();

  std::vector<json> queries;
  std::vector<json> scores;
  for (auto label : {Label::Real, Label::Fake}) {
    const auto& center = label == Label::Real ? real_center : fake_center;
    for (std::size_t v = 0; v < o.query_videos_per_class; ++v) {
      const auto video = fmt::format("query_{}_{:03}", label == Label::Real ? "real" : "fake", v);
      inventory.push_back({{"video_id", video}, {"label", to_string(label)}, {"available_frames", 32}});
      for (std::size_t f = 0; f < o.frames_per_video; ++f) {
        const auto id = fmt::format("{}/{:04}", video, f * 10);
        const auto vec = sample_near(center, o.noise, rng);
        queries.push_back({{"query_id", id},
                           {"video_id", video},
                           {"image_ref", "frames/" + id + ".png"},
                           {"dataset", "synthetic"},
                           {"ground_truth", to_string(label)},
                           {"vector", vec}});
        // Disjoint score ranges per class.
        const double base = label == Label::Fake ? 0.6 : 0.05;
        scores.push_back({{"video_id", video},
                          {"frame_id", id},
                          {"dataset", "synthetic"},
                          {"ground_truth", to_string(label)},
                          {"score", base + 0.3 * uniform_unit(rng)}});
      }
    }
  }
  jsonl::write_file(ws.queries, lines(queries));
  jsonl::write_file(ws.inventory, lines(inventory));
  jsonl::write_file(ws.annotate, lines(annotate));
  jsonl::write_file(ws.scores, lines(scores));
  ws.query_frames = queries.size();

  const std::size_t total_videos = 2 * (o.corpus_videos_per_class + o.query_videos_per_class);
  const json config = {
      {"seed", o.seed},
      {"inputs",
       {{"corpus", "corpus_src"},
        {"inventory", "inventory.jsonl"},
        {"queries", "queries.jsonl"},
        {"annotate", "annotate.jsonl"}}},
      {"sampling", {{"targets", {{"Real", 8 * o.corpus_videos_per_class}, {"Fake", 8 * o.corpus_videos_per_class}}}}},
      {"retrieval", {{"k", o.k}, {"exclude_self", false}}},
      {"dataset", {{"stage1_count", total_videos / 2}, {"stage2_fraction", 0.5}, {"teacher_attempts", 3}}},
      {"evaluation",
       {{"aggregation", "mean"},
        {"score_rule", "logprob-then-hard"},
        {"dataset_name", "synthetic"},
        {"cost", {{"components", json::array({{{"name", "retrieval"}, {"gflops", 81}},
                                               {{"name", "inference"}, {"gflops", 22760}}})}}},
        {"judges", json::array({"judge"})}}}};
  jsonl::write_file(ws.config, config.dump(2) + "\n");
  return ws;
}

}  // namespace vrag::synthetic
