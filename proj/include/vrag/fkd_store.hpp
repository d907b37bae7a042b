#pragma once

// Forensic knowledge database: entry model, annotation parsing, frame sampling
// plans and the on-disk corpus (entries.jsonl + vectors.bin + manifest.json).

#include "vrag/common.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vrag::fkd {

struct RegionFinding {
  std::string region;
  std::string description;

  bool operator==(const RegionFinding&) const = default;
};

struct MediaRef {
  std::string dataset;
  std::string video_id;
  std::string frame_id;

  bool operator==(const MediaRef&) const = default;
};

struct KnowledgeEntry {
  std::string entry_id;
  MediaRef media_ref;
  Label label = Label::Real;
  ManipulationMethod method = ManipulationMethod::Real;
  std::vector<RegionFinding> findings;
  std::string raw_annotation;
  std::string embedding_id;

  bool operator==(const KnowledgeEntry&) const = default;
};

struct EmbeddingRecord {
  std::string embedding_id;
  std::vector<float> vector;
  double l2_norm = 0.0;
};

struct CorpusManifest {
  std::uint32_t format_version = 1;
  std::uint32_t dimension = 0;
  std::uint64_t count = 0;
  std::map<Label, std::uint64_t> counts_by_label;
  std::string vector_digest;  // sha256 of vectors.bin

  bool operator==(const CorpusManifest&) const = default;
};

/// `<dataset>/<method>/<video>/<frame>`
std::string make_entry_id(const MediaRef& ref, ManipulationMethod method);

/// Lower case, internal whitespace collapsed. Used only for comparisons.
std::string normalize_region(std::string_view region);

/// Extracts `[region]: description` clauses in order of appearance.
/// Throws EmptyAnnotation for blank input; in strict mode an unclosed `[`
/// or a clause with an empty description throws MalformedClause.
std::vector<RegionFinding> parse_annotation(std::string_view text, bool strict = false);

/// Inverse of parse_annotation: `[r1]: d1 [r2]: d2`.
std::string render_findings(const std::vector<RegionFinding>& findings);

/// Enforces the per-entry invariants (label/method agreement, findings on
/// fake entries, bracket-free regions). Throws InvalidEntry.
void validate_entry(const KnowledgeEntry& entry);

double l2_norm(std::span<const float> v);

// --- sampling ---------------------------------------------------------------

struct VideoInventory {
  Label label = Label::Real;
  std::uint32_t available_frames = 0;
};

struct SamplingPlan {
  std::map<Label, std::uint64_t> targets;
  std::map<std::string, std::uint32_t> frames_per_video;
  std::map<Label, std::uint64_t> planned;
  std::map<Label, std::uint64_t> shortfall;  // target - planned, when capacity runs out
  std::uint64_t seed = 0;
};

/// Spreads each class target evenly over the class's videos (seeded choice
/// of which videos take the remainder), caps by capacity and re-spreads what
/// capped videos could not take. Shortfalls are reported, not thrown.
SamplingPlan build_sampling_plan(const std::map<std::string, VideoInventory>& inventory,
                                 const std::map<Label, std::uint64_t>& targets,
                                 std::uint64_t seed);

// --- persistence ------------------------------------------------------------

inline constexpr std::string_view kEntriesFile = "entries.jsonl";
inline constexpr std::string_view kVectorsFile = "vectors.bin";
inline constexpr std::string_view kManifestFile = "manifest.json";
inline constexpr std::uint32_t kFormatVersion = 1;

struct Corpus {
  std::vector<KnowledgeEntry> entries;
  std::uint32_t dimension = 0;
  std::vector<float> vectors;  // entries.size() x dimension, row-major
  CorpusManifest manifest;

  std::span<const float> row(std::size_t i) const {
    return {vectors.data() + i * dimension, dimension};
  }
};

/// Validates and persists a corpus into `dir`. Vectors are written in entry
/// order. Throws DimensionMismatch, DuplicateId, DanglingEmbeddingRef,
/// NonFiniteValue, NormMismatch, InvalidEntry.
CorpusManifest ingest(const std::vector<KnowledgeEntry>& entries,
                      const std::vector<EmbeddingRecord>& vectors,
                      const std::filesystem::path& dir);

/// Throws ChecksumMismatch, VersionUnsupported, Io, ParseError.
Corpus load_corpus(const std::filesystem::path& dir);

/// Raw vector-file codec (`VRAG` magic, u32 version, u32 dim, u64 count,
/// little-endian f32 rows).
std::string encode_vector_file(std::uint32_t dimension, std::span<const float> rows);
void decode_vector_file(std::string_view bytes, std::uint32_t& dimension,
                        std::vector<float>& rows);

nlohmann::json to_json(const KnowledgeEntry& entry);
/// Missing entry_id is derived from media_ref; missing findings are parsed
/// from raw_annotation (lenient).
KnowledgeEntry entry_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CorpusManifest& manifest);
CorpusManifest manifest_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SamplingPlan& plan);

}  // namespace vrag::fkd
