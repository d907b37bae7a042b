#pragma once

// Exact top-k cosine retrieval over the knowledge corpus and evidence bundles.

#include "vrag/common.hpp"
#include "vrag/fkd_store.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace vrag::retrieval {

enum class Metric : std::uint8_t { Cosine };

struct RetrievalConfig {
  std::size_t k = 5;
  bool exclude_self = false;
  Metric metric = Metric::Cosine;
};

struct Hit {
  std::size_t row = 0;
  double similarity = 0.0;
};

/// Immutable matrix of unit-normalized rows. Rows are kept in double so the
/// ranking matches a full-precision cosine computed from the raw vectors.
class VectorIndex {
 public:
  /// Throws ZeroVector, DimensionMismatch, NonFiniteValue, DuplicateId.
  static VectorIndex build(std::vector<std::string> ids, std::uint32_t dimension,
                           std::span<const float> rows);
  static VectorIndex build(const fkd::Corpus& corpus);

  std::uint32_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::span<const double> row(std::size_t i) const {
    return {rows_.data() + i * dimension_, dimension_};
  }
  std::optional<std::size_t> find(const std::string& id) const;

  /// The k most similar rows, similarity descending, ties by id ascending.
  /// Throws DimensionMismatch, ZeroVector (query), KTooLarge.
  std::vector<Hit> top_k(std::span<const float> query, std::size_t k,
                         std::optional<std::size_t> excluded_row = std::nullopt) const;

  void save(const std::filesystem::path& dir) const;
  static VectorIndex load(const std::filesystem::path& dir);

 private:
  std::uint32_t dimension_ = 0;
  std::vector<std::string> ids_;
  std::vector<double> rows_;
  std::unordered_map<std::string, std::size_t> positions_;
};

struct EvidenceItem {
  std::string entry_id;
  Label label = Label::Real;
  double similarity = 0.0;
  std::string annotation;

  bool operator==(const EvidenceItem&) const = default;
};

struct EvidenceBundle {
  std::string query_id;
  std::vector<EvidenceItem> items;
  Label majority_label = Label::Real;
  std::optional<bool> rag_correct;
};

/// Index plus the per-row labels and evidence text needed to build items.
class Retriever {
 public:
  explicit Retriever(const fkd::Corpus& corpus);
  Retriever(VectorIndex index, const fkd::Corpus& corpus);

  const VectorIndex& index() const noexcept { return index_; }
  const fkd::KnowledgeEntry& entry(std::size_t row) const { return entries_.at(row); }

  /// Throws InvalidArgument when exclude_self is set without a self_id.
  std::vector<EvidenceItem> retrieve(std::span<const float> query, const RetrievalConfig& config,
                                     const std::optional<std::string>& self_id = std::nullopt) const;

 private:
  VectorIndex index_;
  std::vector<fkd::KnowledgeEntry> entries_;
};

/// Text used when an entry is presented as evidence: the raw annotation with
/// whitespace collapsed, or the rendered findings when the raw text is empty.
std::string evidence_text(const fkd::KnowledgeEntry& entry);

/// Strict majority label of an odd-length item list. Throws EvenK.
EvidenceBundle assemble_bundle(std::string query_id, std::vector<EvidenceItem> items,
                               MaybeLabel ground_truth = std::nullopt);

struct BatchQuery {
  std::string query_id;
  std::vector<float> vector;
  std::optional<std::string> self_id;
};

/// Retrieves every query on up to `threads` workers; output order matches
/// input order.
std::vector<std::vector<EvidenceItem>> retrieve_batch(const Retriever& retriever,
                                                      const std::vector<BatchQuery>& queries,
                                                      const RetrievalConfig& config,
                                                      unsigned threads = 0);

/// One results-file line: query_id, ranked entry_ids, similarities with six
/// decimals.
std::string format_result_line(const std::string& query_id, const std::vector<EvidenceItem>& items);

nlohmann::json to_json(const EvidenceItem& item);
EvidenceItem evidence_item_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvidenceBundle& bundle);
EvidenceBundle bundle_from_json(const nlohmann::json& j);

}  // namespace vrag::retrieval
