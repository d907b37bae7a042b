#include "vrag/fcot.hpp"

#include "vrag/text.hpp"

#include <algorithm>

namespace vrag::fcot {

std::string_view tag_name(SectionTag tag) {
  switch (tag) {
    case SectionTag::PreliminaryVisualAnalysis: return "Preliminary Visual Analysis";
    case SectionTag::RagReferenceInformationAnalysis: return "RAG Reference Information Analysis";
    case SectionTag::FusionReasoningAndDecision: return "Fusion, Reasoning, and Decision";
    case SectionTag::Answer: return "Answer";
  }
  return "";
}

std::string_view to_string(SampleKind kind) {
  switch (kind) {
    case SampleKind::CrossVerification: return "CrossVerification";
    case SampleKind::EvidenceGuidedCorrection: return "EvidenceGuidedCorrection";
    case SampleKind::ResilientRejection: return "ResilientRejection";
  }
  return "";
}

std::optional<SampleKind> parse_sample_kind(std::string_view s) {
  for (auto k : {SampleKind::CrossVerification, SampleKind::EvidenceGuidedCorrection,
                 SampleKind::ResilientRejection}) {
    if (text::iequals(text::trim(s), to_string(k))) return k;
  }
  return std::nullopt;
}

std::string_view to_string(ViolationCode code) {
  switch (code) {
    case ViolationCode::MissingSection: return "MissingSection";
    case ViolationCode::DuplicateSection: return "DuplicateSection";
    case ViolationCode::OutOfOrder: return "OutOfOrder";
    case ViolationCode::UnmatchedTag: return "UnmatchedTag";
    case ViolationCode::BadAnswerToken: return "BadAnswerToken";
  }
  return "";
}

std::string to_string(const Violation& v) {
  std::string out(to_string(v.code));
  if (v.section) {
    out += "(";
    out += tag_name(*v.section);
    out += ")";
  }
  return out;
}

namespace {

struct TagToken {
  SectionTag tag;
  bool closing;
  std::size_t begin;  // '<'
  std::size_t end;    // one past '>'
};

std::optional<SectionTag> match_tag_name(std::string_view name, ParseMode mode) {
  const std::string normalized =
      mode == ParseMode::Strict ? std::string(name) : text::collapse_whitespace(name);
  for (auto tag : kSectionOrder) {
    const bool hit = mode == ParseMode::Strict ? normalized == tag_name(tag)
                                               : text::iequals(normalized, tag_name(tag));
    if (hit) return tag;
  }
  return std::nullopt;
}

std::vector<TagToken> scan_tags(std::string_view s, ParseMode mode) {
  std::vector<TagToken> tokens;
  std::size_t pos = 0;
  while ((pos = s.find('<', pos)) != std::string_view::npos) {
    const auto gt = s.find('>', pos + 1);
    if (gt == std::string_view::npos) break;
    const auto inner_lt = s.find('<', pos + 1);
    if (inner_lt != std::string_view::npos && inner_lt < gt) {
      pos = inner_lt;
      continue;
    }
    auto content = s.substr(pos + 1, gt - pos - 1);
    bool closing = false;
    if (!content.empty() && content.front() == '/') {
      closing = true;
      content.remove_prefix(1);
    }
    if (const auto tag = match_tag_name(content, mode)) {
      tokens.push_back({*tag, closing, pos, gt + 1});
    }
    pos = gt + 1;
  }
  return tokens;
}

std::size_t index_of(SectionTag tag) { return static_cast<std::size_t>(tag); }

void add_unique(std::vector<Violation>& out, Violation v) {
  if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
}

}  // namespace

FCotResponse parse_fcot(std::string_view text, ParseMode mode) {
  FCotResponse r;
  const auto tokens = scan_tags(text, mode);

  struct Occurrence {
    SectionTag tag;
    std::string body;
  };
  std::vector<Occurrence> occurrences;
  std::array<bool, 4> unmatched{};
  std::optional<TagToken> open;

  for (const auto& tok : tokens) {
    if (!tok.closing) {
      if (open) unmatched[index_of(open->tag)] = true;
      open = tok;
      continue;
    }
    if (open && open->tag == tok.tag) {
      std::size_t body_begin = open->end;
      if (mode == ParseMode::Lenient) {
        std::size_t p = body_begin;
        while (p < tok.begin && (text[p] == ' ' || text[p] == '\t')) ++p;
        if (p < tok.begin && text[p] == ':') body_begin = p + 1;
      }
      occurrences.push_back(
          {tok.tag, std::string(text::trim(text.substr(body_begin, tok.begin - body_begin)))});
      open.reset();
    } else {
      unmatched[index_of(tok.tag)] = true;
    }
  }
  if (open) unmatched[index_of(open->tag)] = true;

  std::array<int, 4> counts{};
  std::array<const std::string*, 4> first{};
  std::vector<SectionTag> order;
  for (const auto& occ : occurrences) {
    const auto i = index_of(occ.tag);
    if (counts[i]++ == 0) {
      first[i] = &occ.body;
      order.push_back(occ.tag);
    }
  }

  for (auto tag : kSectionOrder) {
    const auto i = index_of(tag);
    if (unmatched[i]) add_unique(r.violations, {ViolationCode::UnmatchedTag, tag});
    if (counts[i] == 0 && !unmatched[i]) {
      add_unique(r.violations, {ViolationCode::MissingSection, tag});
    }
    if (counts[i] > 1) add_unique(r.violations, {ViolationCode::DuplicateSection, tag});
  }
  if (!std::is_sorted(order.begin(), order.end())) {
    add_unique(r.violations, {ViolationCode::OutOfOrder, std::nullopt});
  }

  if (first[0]) r.preliminary = *first[0];
  if (first[1]) r.rag_analysis = *first[1];
  if (first[2]) r.fusion = *first[2];
  if (const auto* answer = first[index_of(SectionTag::Answer)]) {
    r.answer = parse_label(*answer);
    const bool canonical = *answer == "Real" || *answer == "Fake";
    if (!r.answer || (mode == ParseMode::Strict && !canonical)) {
      add_unique(r.violations, {ViolationCode::BadAnswerToken, SectionTag::Answer});
    }
  }
  if (first[0]) r.s1_pred = extract_s1_pred(r.preliminary);
  r.format_valid = r.violations.empty();
  return r;
}

std::string serialize_fcot(const FCotResponse& r) {
  if (!r.format_valid || !r.violations.empty() || !r.answer) {
    throw Error(ErrorCode::InvalidResponse, "cannot serialize a format-invalid response");
  }
  const std::array<std::string_view, 3> bodies{text::trim(r.preliminary),
                                               text::trim(r.rag_analysis), text::trim(r.fusion)};
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    if (!scan_tags(bodies[i], ParseMode::Lenient).empty()) {
      throw Error(ErrorCode::InvalidResponse,
                  "section " + std::string(tag_name(kSectionOrder[i])) + " contains a section tag");
    }
  }
  if (extract_s1_pred(bodies[0]) != r.s1_pred) {
    throw Error(ErrorCode::InvalidResponse,
                "s1_pred " + to_string(r.s1_pred) + " is not what the preliminary section states");
  }
  std::string out;
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    const auto name = tag_name(kSectionOrder[i]);
    out += "<" + std::string(name) + ">\n";
    out += bodies[i];
    out += "\n</" + std::string(name) + ">\n";
  }
  out += "<Answer> " + std::string(to_string(*r.answer)) + " </Answer>\n";
  return out;
}

namespace {

// Finds the label following each `Initial Judgment` marker; last one wins.
MaybeLabel marker_label(std::string_view s) {
  static constexpr std::string_view kMarker = "initial judgment";
  const auto lower = text::to_lower(s);
  MaybeLabel found;
  std::size_t pos = 0;
  while ((pos = lower.find(kMarker, pos)) != std::string::npos) {
    std::size_t p = pos + kMarker.size();
    while (p < lower.size() && (lower[p] == ' ' || lower[p] == '\t')) ++p;
    if (p < lower.size() && lower[p] == ':') ++p;
    while (p < lower.size() && (lower[p] == ' ' || lower[p] == '\t' || lower[p] == '*')) ++p;
    std::size_t q = p;
    while (q < lower.size() && text::is_word_char(lower[q])) ++q;
    if (const auto label = parse_label(std::string_view(lower).substr(p, q - p))) found = label;
    pos += kMarker.size();
  }
  return found;
}

}  // namespace

bool has_initial_judgment_marker(std::string_view preliminary) {
  return marker_label(preliminary).has_value();
}

MaybeLabel extract_s1_pred(std::string_view s) {
  if (const auto marked = marker_label(s)) return marked;
  MaybeLabel last;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!text::is_word_char(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && text::is_word_char(s[j])) ++j;
    const auto word = s.substr(i, j - i);
    if (text::iequals(word, "real")) last = Label::Real;
    if (text::iequals(word, "fake")) last = Label::Fake;
    i = j;
  }
  return last;
}

std::string with_initial_judgment(std::string_view preliminary, Label label) {
  std::string out(text::trim(preliminary));
  if (has_initial_judgment_marker(out)) return out;
  if (!out.empty()) out += "\n";
  out += "Initial Judgment: " + std::string(to_string(label));
  return out;
}

EvidenceBlock format_evidence_block(const retrieval::EvidenceBundle& bundle) {
  EvidenceBlock block;
  for (std::size_t i = 0; i < bundle.items.size(); ++i) {
    const auto& item = bundle.items[i];
    if (i) block.text += "\n";
    block.text += std::to_string(i + 1) + ". (\"" + std::string(to_string(item.label)) + ": " +
                  item.annotation + "\", " + text::fixed(item.similarity, 2) + ")";
    if (text::trim(item.annotation).empty()) {
      block.warnings.push_back("evidence item " + std::to_string(i + 1) + " (" + item.entry_id +
                               ") has an empty annotation");
    }
  }
  return block;
}

nlohmann::json to_json(const FCotResponse& r) {
  nlohmann::json violations = nlohmann::json::array();
  for (const auto& v : r.violations) violations.push_back(to_string(v));
  return {{"format_valid", r.format_valid},
          {"violations", std::move(violations)},
          {"s1_pred", to_string(r.s1_pred)},
          {"answer", r.answer ? nlohmann::json(to_string(*r.answer)) : nlohmann::json(nullptr)}};
}

}  // namespace vrag::fcot
