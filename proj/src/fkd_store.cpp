#include "vrag/fkd_store.hpp"

#include "vrag/digest.hpp"
#include "vrag/jsonl.hpp"
#include "vrag/random.hpp"
#include "vrag/text.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace vrag::fkd {

using nlohmann::json;

std::string make_entry_id(const MediaRef& ref, ManipulationMethod method) {
  return ref.dataset + "/" + std::string(to_string(method)) + "/" + ref.video_id + "/" +
         ref.frame_id;
}

std::string normalize_region(std::string_view region) {
  return text::to_lower(text::collapse_whitespace(region));
}

namespace {

// Strips whitespace and ASCII or typographic quotes from both ends.
std::string_view trim_quotes(std::string_view s) {
  static constexpr std::string_view kCurly[] = {"“", "”", "‘", "’"};
  bool changed = true;
  while (changed) {
    changed = false;
    s = text::trim(s);
    if (!s.empty() && (s.front() == '"' || s.front() == '\'' || s.front() == '`')) {
      s.remove_prefix(1);
      changed = true;
    }
    if (!s.empty() && (s.back() == '"' || s.back() == '\'' || s.back() == '`')) {
      s.remove_suffix(1);
      changed = true;
    }
    for (auto q : kCurly) {
      if (s.starts_with(q)) {
        s.remove_prefix(q.size());
        changed = true;
      }
      if (s.ends_with(q)) {
        s.remove_suffix(q.size());
        changed = true;
      }
    }
  }
  return s;
}

struct ClauseHeader {
  std::size_t start;       // position of '['
  std::size_t body_begin;  // first char after ':'
  std::string_view region;
};

}  // namespace

std::vector<RegionFinding> parse_annotation(std::string_view text, bool strict) {
  if (text::trim(text).empty()) throw Error(ErrorCode::EmptyAnnotation, "annotation is blank");

  std::vector<ClauseHeader> headers;
  std::size_t pos = 0;
  while ((pos = text.find('[', pos)) != std::string_view::npos) {
    const auto close = text.find(']', pos + 1);
    if (close == std::string_view::npos) {
      if (strict) {
        throw Error(ErrorCode::MalformedClause,
                    "bracket opened at offset " + std::to_string(pos) + " is never closed");
      }
      break;
    }
    const auto inner_open = text.find('[', pos + 1);
    if (inner_open != std::string_view::npos && inner_open < close) {
      pos = inner_open;
      continue;
    }
    std::size_t after = close + 1;
    while (after < text.size() && (text[after] == ' ' || text[after] == '\t')) ++after;
    if (after < text.size() && text[after] == ':') {
      headers.push_back({pos, after + 1, text.substr(pos + 1, close - pos - 1)});
      pos = after + 1;
    } else {
      pos = close + 1;
    }
  }

  std::vector<RegionFinding> findings;
  for (std::size_t i = 0; i < headers.size(); ++i) {
    const auto end = i + 1 < headers.size() ? headers[i + 1].start : text.size();
    const auto region = text::trim(headers[i].region);
    const auto body = trim_quotes(text.substr(headers[i].body_begin, end - headers[i].body_begin));
    if (region.empty() || body.empty()) {
      if (strict) {
        throw Error(ErrorCode::MalformedClause,
                    "clause at offset " + std::to_string(headers[i].start) +
                        " has an empty region or description");
      }
      continue;
    }
    findings.push_back({std::string(region), std::string(body)});
  }
  return findings;
}

std::string render_findings(const std::vector<RegionFinding>& findings) {
  std::string out;
  for (const auto& f : findings) {
    if (!out.empty()) out.push_back(' ');
    out += "[" + f.region + "]: " + f.description;
  }
  return out;
}

void validate_entry(const KnowledgeEntry& e) {
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::InvalidEntry, "entry '" + e.entry_id + "': " + why);
  };
  if (e.entry_id.empty()) fail("empty entry_id");
  if (e.embedding_id.empty()) fail("empty embedding_id");
  if (e.label == Label::Real && e.method != ManipulationMethod::Real) {
    fail("real entries must use method Real");
  }
  if (e.label == Label::Fake && e.method == ManipulationMethod::Real) {
    fail("fake entries need a manipulation method");
  }
  if (e.label == Label::Fake && e.findings.empty()) fail("fake entries need at least one finding");
  for (const auto& f : e.findings) {
    if (text::trim(f.region).empty() || text::trim(f.description).empty()) {
      fail("finding with empty region or description");
    }
    if (f.region.find_first_of("[]") != std::string::npos) fail("region contains brackets");
  }
}

double l2_norm(std::span<const float> v) {
  double sum = 0.0;
  for (float x : v) sum += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(sum);
}

// --- sampling ---------------------------------------------------------------

SamplingPlan build_sampling_plan(const std::map<std::string, VideoInventory>& inventory,
                                 const std::map<Label, std::uint64_t>& targets,
                                 std::uint64_t seed) {
  SamplingPlan plan;
  plan.targets = targets;
  plan.seed = seed;
  for (const auto& [vid, inv] : inventory) plan.frames_per_video[vid] = 0;

  for (const auto& [label, target] : targets) {
    if (target == 0) {
      throw Error(ErrorCode::InvalidArgument,
                  "target for " + std::string(to_string(label)) + " must be positive");
    }
    std::vector<std::string> videos;
    for (const auto& [vid, inv] : inventory) {
      if (inv.label == label) videos.push_back(vid);
    }
    if (videos.empty()) {
      throw Error(ErrorCode::InvalidArgument,
                  "no videos in inventory for class " + std::string(to_string(label)));
    }
    std::mt19937_64 rng(seed * 2 + static_cast<std::uint64_t>(label));
    seeded_shuffle(videos, rng);

    std::vector<std::string> active;
    for (const auto& v : videos) {
      if (inventory.at(v).available_frames > 0) active.push_back(v);
    }
    std::uint64_t remaining = target;
    while (remaining > 0 && !active.empty()) {
      // Least-allocated first so repeated rounds keep counts within one.
      std::stable_sort(active.begin(), active.end(), [&](const auto& a, const auto& b) {
        return plan.frames_per_video[a] < plan.frames_per_video[b];
      });
      const std::uint64_t n = active.size();
      const std::uint64_t share = remaining / n;
      const std::uint64_t extra = remaining % n;
      std::uint64_t given = 0;
      std::vector<std::string> still_open;
      for (std::uint64_t i = 0; i < n; ++i) {
        const auto& v = active[i];
        auto& have = plan.frames_per_video[v];
        const std::uint64_t cap = inventory.at(v).available_frames;
        const std::uint64_t want = share + (i < extra ? 1 : 0);
        const std::uint64_t take = std::min<std::uint64_t>(want, cap - have);
        have += static_cast<std::uint32_t>(take);
        given += take;
        if (have < cap) still_open.push_back(v);
      }
      remaining -= given;
      active = std::move(still_open);
    }
    plan.planned[label] = target - remaining;
    plan.shortfall[label] = remaining;
  }
  return plan;
}

// --- persistence ------------------------------------------------------------

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
std::uint32_t get_u32(std::string_view b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + i])) << (8 * i);
  return v;
}
std::uint64_t get_u64(std::string_view b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[at + i])) << (8 * i);
  return v;
}

constexpr std::size_t kHeaderSize = 4 + 4 + 4 + 8;

}  // namespace

std::string encode_vector_file(std::uint32_t dimension, std::span<const float> rows) {
  if (dimension == 0 || rows.size() % dimension != 0) {
    throw Error(ErrorCode::DimensionMismatch, "row buffer is not a multiple of the dimension");
  }
  std::string out = "VRAG";
  out.reserve(kHeaderSize + rows.size() * 4);
  put_u32(out, kFormatVersion);
  put_u32(out, dimension);
  put_u64(out, rows.size() / dimension);
  for (float f : rows) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

void decode_vector_file(std::string_view bytes, std::uint32_t& dimension,
                        std::vector<float>& rows) {
  if (bytes.size() < kHeaderSize || bytes.substr(0, 4) != "VRAG") {
    throw Error(ErrorCode::ParseError, "vector file lacks the VRAG header");
  }
  const auto version = get_u32(bytes, 4);
  if (version != kFormatVersion) {
    throw Error(ErrorCode::VersionUnsupported,
                "vector file version " + std::to_string(version) + " is not supported");
  }
  dimension = get_u32(bytes, 8);
  const auto count = get_u64(bytes, 12);
  if (dimension == 0) throw Error(ErrorCode::ParseError, "vector file has dimension 0");
  const auto expected = kHeaderSize + count * dimension * 4;
  if (bytes.size() != expected) {
    throw Error(ErrorCode::ParseError, "vector file size " + std::to_string(bytes.size()) +
                                           " does not match header (" + std::to_string(expected) +
                                           ")");
  }
  rows.resize(count * dimension);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i] = std::bit_cast<float>(get_u32(bytes, kHeaderSize + i * 4));
  }
}

CorpusManifest ingest(const std::vector<KnowledgeEntry>& entries,
                      const std::vector<EmbeddingRecord>& vectors,
                      const std::filesystem::path& dir) {
  if (entries.empty()) throw Error(ErrorCode::InvalidArgument, "no entries to ingest");

  std::unordered_map<std::string, std::size_t> by_embedding;
  std::uint32_t dimension = 0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const auto& rec = vectors[i];
    if (!by_embedding.emplace(rec.embedding_id, i).second) {
      throw Error(ErrorCode::DuplicateId, "embedding '" + rec.embedding_id + "' appears twice");
    }
    if (rec.vector.empty()) {
      throw Error(ErrorCode::DimensionMismatch, "embedding '" + rec.embedding_id + "' is empty");
    }
    if (i == 0) dimension = static_cast<std::uint32_t>(rec.vector.size());
    if (rec.vector.size() != dimension) {
      throw Error(ErrorCode::DimensionMismatch,
                  "embedding '" + rec.embedding_id + "' has dimension " +
                      std::to_string(rec.vector.size()) + ", expected " +
                      std::to_string(dimension));
    }
    for (float x : rec.vector) {
      if (!std::isfinite(x)) {
        throw Error(ErrorCode::NonFiniteValue,
                    "embedding '" + rec.embedding_id + "' has a non-finite component");
      }
    }
    const double norm = l2_norm(rec.vector);
    if (std::abs(rec.l2_norm - norm) > 1e-6 * std::max(norm, 1e-30)) {
      throw Error(ErrorCode::NormMismatch, "embedding '" + rec.embedding_id +
                                               "' stored norm " + std::to_string(rec.l2_norm) +
                                               " != recomputed " + std::to_string(norm));
    }
  }

  std::set<std::string> entry_ids;
  std::set<std::string> used_embeddings;
  CorpusManifest manifest;
  manifest.counts_by_label = {{Label::Real, 0}, {Label::Fake, 0}};
  std::vector<float> rows;
  rows.reserve(entries.size() * dimension);
  std::string entries_text;
  for (const auto& e : entries) {
    validate_entry(e);
    if (!entry_ids.insert(e.entry_id).second) {
      throw Error(ErrorCode::DuplicateId, "entry '" + e.entry_id + "' appears twice");
    }
    const auto it = by_embedding.find(e.embedding_id);
    if (it == by_embedding.end()) {
      throw Error(ErrorCode::DanglingEmbeddingRef,
                  "entry '" + e.entry_id + "' references missing embedding '" + e.embedding_id +
                      "'");
    }
    if (!used_embeddings.insert(e.embedding_id).second) {
      throw Error(ErrorCode::DuplicateId,
                  "embedding '" + e.embedding_id + "' is referenced by more than one entry");
    }
    const auto& v = vectors[it->second].vector;
    rows.insert(rows.end(), v.begin(), v.end());
    manifest.counts_by_label[e.label] += 1;
    entries_text += jsonl::dump(to_json(e));
    entries_text.push_back('\n');
  }
  if (used_embeddings.size() != vectors.size()) {
    for (const auto& rec : vectors) {
      if (!used_embeddings.contains(rec.embedding_id)) {
        throw Error(ErrorCode::DanglingEmbeddingRef,
                    "embedding '" + rec.embedding_id + "' is not referenced by any entry");
      }
    }
  }

  const auto vector_bytes = encode_vector_file(dimension, rows);
  manifest.format_version = kFormatVersion;
  manifest.dimension = dimension;
  manifest.count = entries.size();
  manifest.vector_digest = sha256_hex(vector_bytes);

  std::filesystem::create_directories(dir);
  jsonl::write_file(dir / kVectorsFile, vector_bytes);
  jsonl::write_file(dir / kEntriesFile, entries_text);
  jsonl::write_file(dir / kManifestFile, to_json(manifest).dump(2) + "\n");
  return manifest;
}

Corpus load_corpus(const std::filesystem::path& dir) {
  Corpus corpus;
  json manifest_json;
  try {
    manifest_json = json::parse(jsonl::read_file(dir / kManifestFile));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, "manifest: " + std::string(e.what()));
  }
  corpus.manifest = manifest_from_json(manifest_json);
  if (corpus.manifest.format_version != kFormatVersion) {
    throw Error(ErrorCode::VersionUnsupported,
                "corpus format version " + std::to_string(corpus.manifest.format_version));
  }

  const auto bytes = jsonl::read_file(dir / kVectorsFile);
  if (bytes.size() >= 8 && bytes.compare(0, 4, "VRAG") == 0 &&
      get_u32(bytes, 4) != kFormatVersion) {
    throw Error(ErrorCode::VersionUnsupported,
                "vector file version " + std::to_string(get_u32(bytes, 4)));
  }
  const auto digest = sha256_hex(bytes);
  if (digest != corpus.manifest.vector_digest) {
    throw Error(ErrorCode::ChecksumMismatch, "vector file digest " + digest +
                                                 " does not match manifest " +
                                                 corpus.manifest.vector_digest);
  }
  decode_vector_file(bytes, corpus.dimension, corpus.vectors);

  jsonl::for_each(dir / kEntriesFile, [&](std::size_t, const json& j) {
    corpus.entries.push_back(entry_from_json(j));
  });

  std::map<Label, std::uint64_t> counts{{Label::Real, 0}, {Label::Fake, 0}};
  for (const auto& e : corpus.entries) counts[e.label] += 1;
  const auto rows = corpus.vectors.size() / corpus.dimension;
  if (corpus.dimension != corpus.manifest.dimension || rows != corpus.manifest.count ||
      corpus.entries.size() != corpus.manifest.count || counts != corpus.manifest.counts_by_label) {
    throw Error(ErrorCode::ParseError, "manifest disagrees with corpus contents in " + dir.string());
  }
  return corpus;
}

// --- json -------------------------------------------------------------------

json to_json(const KnowledgeEntry& e) {
  json findings = json::array();
  for (const auto& f : e.findings) {
    findings.push_back({{"region", f.region}, {"description", f.description}});
  }
  return {
      {"entry_id", e.entry_id},
      {"media_ref",
       {{"dataset", e.media_ref.dataset},
        {"video_id", e.media_ref.video_id},
        {"frame_id", e.media_ref.frame_id}}},
      {"label", to_string(e.label)},
      {"method", to_string(e.method)},
      {"findings", std::move(findings)},
      {"raw_annotation", e.raw_annotation},
      {"embedding_id", e.embedding_id},
  };
}

KnowledgeEntry entry_from_json(const json& j) {
  KnowledgeEntry e;
  const auto& ref = j.at("media_ref");
  e.media_ref = {ref.at("dataset").get<std::string>(), ref.at("video_id").get<std::string>(),
                 ref.at("frame_id").get<std::string>()};
  const auto label = parse_label(j.at("label").get<std::string>());
  if (!label) throw Error(ErrorCode::InvalidEntry, "bad label " + j.at("label").dump());
  e.label = *label;
  if (j.contains("method")) {
    const auto method = parse_method(j.at("method").get<std::string>());
    if (!method) throw Error(ErrorCode::InvalidEntry, "bad method " + j.at("method").dump());
    e.method = *method;
  } else {
    e.method = e.label == Label::Real ? ManipulationMethod::Real : ManipulationMethod::Other;
  }
  e.raw_annotation = j.value("raw_annotation", std::string{});
  e.entry_id = j.contains("entry_id") ? j.at("entry_id").get<std::string>()
                                      : make_entry_id(e.media_ref, e.method);
  e.embedding_id = j.value("embedding_id", e.entry_id);
  if (j.contains("findings")) {
    for (const auto& f : j.at("findings")) {
      e.findings.push_back({f.at("region").get<std::string>(), f.at("description").get<std::string>()});
    }
  } else if (!text::trim(e.raw_annotation).empty()) {
    e.findings = parse_annotation(e.raw_annotation, false);
  }
  return e;
}

json to_json(const CorpusManifest& m) {
  json counts = json::object();
  for (const auto& [label, n] : m.counts_by_label) counts[std::string(to_string(label))] = n;
  return {
      {"format_version", m.format_version},
      {"dimension", m.dimension},
      {"count", m.count},
      {"counts_by_label", std::move(counts)},
      {"vector_digest", m.vector_digest},
  };
}

CorpusManifest manifest_from_json(const json& j) {
  CorpusManifest m;
  try {
    m.format_version = j.at("format_version").get<std::uint32_t>();
    m.dimension = j.at("dimension").get<std::uint32_t>();
    m.count = j.at("count").get<std::uint64_t>();
    for (const auto& [name, n] : j.at("counts_by_label").items()) {
      const auto label = parse_label(name);
      if (!label) throw Error(ErrorCode::ParseError, "manifest label " + name);
      m.counts_by_label[*label] = n.get<std::uint64_t>();
    }
    m.vector_digest = j.at("vector_digest").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, "manifest: " + std::string(e.what()));
  }
  return m;
}

json to_json(const SamplingPlan& plan) {
  json targets = json::object();
  json planned = json::object();
  json shortfall = json::object();
  for (const auto& [l, n] : plan.targets) targets[std::string(to_string(l))] = n;
  for (const auto& [l, n] : plan.planned) planned[std::string(to_string(l))] = n;
  for (const auto& [l, n] : plan.shortfall) shortfall[std::string(to_string(l))] = n;
  return {
      {"seed", plan.seed},
      {"targets", std::move(targets)},
      {"planned", std::move(planned)},
      {"shortfall", std::move(shortfall)},
      {"frames_per_video", plan.frames_per_video},
  };
}

}  // namespace vrag::fkd
