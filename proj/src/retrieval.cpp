#include "vrag/retrieval.hpp"

#include "vrag/digest.hpp"
#include "vrag/jsonl.hpp"
#include "vrag/text.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <thread>
#include <unordered_map>

namespace vrag::retrieval {

using nlohmann::json;

VectorIndex VectorIndex::build(std::vector<std::string> ids, std::uint32_t dimension,
                               std::span<const float> rows) {
  if (dimension == 0) throw Error(ErrorCode::DimensionMismatch, "dimension must be >= 1");
  if (ids.empty()) throw Error(ErrorCode::InvalidArgument, "cannot index an empty corpus");
  if (rows.size() != ids.size() * dimension) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(rows.size()) + " values for " + std::to_string(ids.size()) +
                    " rows of dimension " + std::to_string(dimension));
  }
  {
    std::vector<std::string> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    const auto dup = std::adjacent_find(sorted.begin(), sorted.end());
    if (dup != sorted.end()) throw Error(ErrorCode::DuplicateId, "index id '" + *dup + "'");
  }
  VectorIndex index;
  index.dimension_ = dimension;
  index.ids_ = std::move(ids);
  for (std::size_t i = 0; i < index.ids_.size(); ++i) index.positions_.emplace(index.ids_[i], i);
  index.rows_.resize(rows.size());
  for (std::size_t r = 0; r < index.ids_.size(); ++r) {
    double sum = 0.0;
    for (std::size_t d = 0; d < dimension; ++d) {
      const double x = rows[r * dimension + d];
      if (!std::isfinite(x)) {
        throw Error(ErrorCode::NonFiniteValue, "row '" + index.ids_[r] + "' is not finite");
      }
      sum += x * x;
    }
    const double norm = std::sqrt(sum);
    if (norm == 0.0) throw Error(ErrorCode::ZeroVector, "row '" + index.ids_[r] + "' is zero");
    for (std::size_t d = 0; d < dimension; ++d) {
      index.rows_[r * dimension + d] = rows[r * dimension + d] / norm;
    }
  }
  return index;
}

VectorIndex VectorIndex::build(const fkd::Corpus& corpus) {
  std::vector<std::string> ids;
  ids.reserve(corpus.entries.size());
  for (const auto& e : corpus.entries) ids.push_back(e.entry_id);
  return build(std::move(ids), corpus.dimension, corpus.vectors);
}

std::optional<std::size_t> VectorIndex::find(const std::string& id) const {
  const auto it = positions_.find(id);
  if (it == positions_.end()) return std::nullopt;
  return it->second;
}

std::vector<Hit> VectorIndex::top_k(std::span<const float> query, std::size_t k,
                                    std::optional<std::size_t> excluded_row) const {
  if (query.size() != dimension_) {
    throw Error(ErrorCode::DimensionMismatch, "query dimension " + std::to_string(query.size()) +
                                                  " != index dimension " +
                                                  std::to_string(dimension_));
  }
  const std::size_t eligible = size() - (excluded_row && *excluded_row < size() ? 1 : 0);
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (k > eligible) {
    throw Error(ErrorCode::KTooLarge,
                "k=" + std::to_string(k) + " exceeds " + std::to_string(eligible) + " eligible rows");
  }
  double qnorm = 0.0;
  for (float x : query) qnorm += static_cast<double>(x) * x;
  qnorm = std::sqrt(qnorm);
  if (qnorm == 0.0 || !std::isfinite(qnorm)) {
    throw Error(ErrorCode::ZeroVector, "query vector has zero or non-finite norm");
  }

  std::vector<Hit> hits;
  hits.reserve(eligible);
  for (std::size_t r = 0; r < size(); ++r) {
    if (excluded_row && r == *excluded_row) continue;
    const double* row_ptr = rows_.data() + r * dimension_;
    double dot = 0.0;
    for (std::size_t d = 0; d < dimension_; ++d) dot += row_ptr[d] * query[d];
    hits.push_back({r, dot / qnorm});
  }
  const auto better = [this](const Hit& a, const Hit& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return ids_[a.row] < ids_[b.row];
  };
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), better);
  hits.resize(k);
  return hits;
}

void VectorIndex::save(const std::filesystem::path& dir) const {
  // VIDX, u32 version, u32 dim, u64 count, count*dim f64 LE, then ids as
  // (u32 length, bytes).
  std::string out = "VIDX";
  auto put = [&out](std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  put(1, 4);
  put(dimension_, 4);
  put(ids_.size(), 8);
  for (double x : rows_) put(std::bit_cast<std::uint64_t>(x), 8);
  for (const auto& id : ids_) {
    put(id.size(), 4);
    out += id;
  }
  jsonl::write_file(dir / "index.bin", out);
  const json meta = {{"format_version", 1},
                     {"dimension", dimension_},
                     {"count", ids_.size()},
                     {"metric", "cosine"},
                     {"index_digest", sha256_hex(out)}};
  jsonl::write_file(dir / "index.json", meta.dump(2) + "\n");
}

VectorIndex VectorIndex::load(const std::filesystem::path& dir) {
  const auto bytes = jsonl::read_file(dir / "index.bin");
  const auto meta = json::parse(jsonl::read_file(dir / "index.json"));
  if (meta.value("format_version", 0) != 1) {
    throw Error(ErrorCode::VersionUnsupported, "index format version");
  }
  if (sha256_hex(bytes) != meta.at("index_digest").get<std::string>()) {
    throw Error(ErrorCode::ChecksumMismatch, "index.bin digest does not match index.json");
  }
  std::size_t at = 0;
  auto get = [&](int nbytes) {
    if (at + static_cast<std::size_t>(nbytes) > bytes.size()) {
      throw Error(ErrorCode::ParseError, "truncated index.bin");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < nbytes; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
    }
    at += static_cast<std::size_t>(nbytes);
    return v;
  };
  if (bytes.compare(0, 4, "VIDX") != 0) throw Error(ErrorCode::ParseError, "bad index magic");
  at = 4;
  if (get(4) != 1) throw Error(ErrorCode::VersionUnsupported, "index.bin version");
  VectorIndex index;
  index.dimension_ = static_cast<std::uint32_t>(get(4));
  const auto count = get(8);
  index.rows_.resize(count * index.dimension_);
  for (auto& x : index.rows_) x = std::bit_cast<double>(get(8));
  index.ids_.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = get(4);
    if (at + len > bytes.size()) throw Error(ErrorCode::ParseError, "truncated index ids");
    index.ids_.emplace_back(bytes.substr(at, len));
    index.positions_.emplace(index.ids_.back(), i);
    at += len;
  }
  return index;
}

// --- retriever --------------------------------------------------------------

Retriever::Retriever(const fkd::Corpus& corpus)
    : index_(VectorIndex::build(corpus)), entries_(corpus.entries) {}

Retriever::Retriever(VectorIndex index, const fkd::Corpus& corpus)
    : index_(std::move(index)), entries_(corpus.entries) {
  if (index_.size() != entries_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "index and corpus row counts differ");
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (index_.ids()[i] != entries_[i].entry_id) {
      throw Error(ErrorCode::InvalidArgument,
                  "index row " + std::to_string(i) + " does not match corpus entry order");
    }
  }
}

std::vector<EvidenceItem> Retriever::retrieve(std::span<const float> query,
                                              const RetrievalConfig& config,
                                              const std::optional<std::string>& self_id) const {
  std::optional<std::size_t> excluded;
  if (config.exclude_self) {
    if (!self_id) throw Error(ErrorCode::InvalidArgument, "exclude_self requires a self id");
    excluded = index_.find(*self_id);
  }
  const auto hits = index_.top_k(query, config.k, excluded);
  std::vector<EvidenceItem> items;
  items.reserve(hits.size());
  for (const auto& h : hits) {
    const auto& e = entries_[h.row];
    items.push_back({e.entry_id, e.label, h.similarity, evidence_text(e)});
  }
  return items;
}

std::string evidence_text(const fkd::KnowledgeEntry& entry) {
  auto t = text::collapse_whitespace(entry.raw_annotation);
  if (t.empty()) t = fkd::render_findings(entry.findings);
  return t;
}

EvidenceBundle assemble_bundle(std::string query_id, std::vector<EvidenceItem> items,
                               MaybeLabel ground_truth) {
  if (items.empty() || items.size() % 2 == 0) {
    throw Error(ErrorCode::EvenK, "evidence count " + std::to_string(items.size()) +
                                      " must be odd for a strict majority");
  }
  std::size_t fake = 0;
  for (const auto& it : items) fake += it.label == Label::Fake ? 1 : 0;
  EvidenceBundle bundle;
  bundle.query_id = std::move(query_id);
  bundle.majority_label = 2 * fake > items.size() ? Label::Fake : Label::Real;
  if (ground_truth) bundle.rag_correct = bundle.majority_label == *ground_truth;
  bundle.items = std::move(items);
  return bundle;
}

std::vector<std::vector<EvidenceItem>> retrieve_batch(const Retriever& retriever,
                                                      const std::vector<BatchQuery>& queries,
                                                      const RetrievalConfig& config,
                                                      unsigned threads) {
  std::vector<std::vector<EvidenceItem>> out(queries.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, queries.size())));

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(queries.size());
  auto work = [&] {
    for (std::size_t i = next++; i < queries.size(); i = next++) {
      try {
        out[i] = retriever.retrieve(queries[i].vector, config, queries[i].self_id);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
    work();
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw Error(e.code(), "query '" + queries[i].query_id + "': " + e.detail());
    }
  }
  return out;
}

std::string format_result_line(const std::string& query_id,
                               const std::vector<EvidenceItem>& items) {
  json ids = json::array();
  std::string sims = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    ids.push_back(items[i].entry_id);
    if (i) sims += ",";
    sims += text::fixed(items[i].similarity, 6);
  }
  sims += "]";
  return "{\"entry_ids\":" + ids.dump() + ",\"query_id\":" + json(query_id).dump() +
         ",\"similarities\":" + sims + "}";
}

json to_json(const EvidenceItem& item) {
  return {{"entry_id", item.entry_id},
          {"label", to_string(item.label)},
          {"similarity", item.similarity},
          {"annotation", item.annotation}};
}

EvidenceItem evidence_item_from_json(const json& j) {
  EvidenceItem item;
  item.entry_id = j.value("entry_id", std::string{});
  const auto label = parse_label(j.at("label").get<std::string>());
  if (!label) throw Error(ErrorCode::ParseError, "evidence label " + j.at("label").dump());
  item.label = *label;
  item.similarity = j.value("similarity", 0.0);
  item.annotation = j.value("annotation", std::string{});
  return item;
}

json to_json(const EvidenceBundle& b) {
  json items = json::array();
  for (const auto& it : b.items) items.push_back(to_json(it));
  json out = {{"query_id", b.query_id},
              {"items", std::move(items)},
              {"majority_label", to_string(b.majority_label)}};
  out["rag_correct"] = b.rag_correct ? json(*b.rag_correct) : json(nullptr);
  return out;
}

EvidenceBundle bundle_from_json(const json& j) {
  std::vector<EvidenceItem> items;
  for (const auto& it : j.at("items")) items.push_back(evidence_item_from_json(it));
  auto bundle = assemble_bundle(j.value("query_id", std::string{}), std::move(items));
  if (j.contains("rag_correct") && j.at("rag_correct").is_boolean()) {
    bundle.rag_correct = j.at("rag_correct").get<bool>();
  }
  return bundle;
}

}  // namespace vrag::retrieval
