#include "vrag/prompt.hpp"

#include "vrag/text.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "embedded_templates.hpp"

namespace vrag::prompt {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "";
}

Role parse_role(std::string_view s) {
  for (auto r : {Role::System, Role::User, Role::Assistant}) {
    if (text::iequals(text::trim(s), to_string(r))) return r;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown role '" + std::string(s) + "'");
}

namespace {

struct SlotRef {
  std::size_t begin;
  std::size_t end;
  std::string_view name;
};

bool is_slot_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Every `{{name}}` occurrence with a well-formed name, left to right.
std::vector<SlotRef> find_slots(std::string_view s) {
  std::vector<SlotRef> out;
  std::size_t pos = 0;
  while ((pos = s.find("{{", pos)) != std::string_view::npos) {
    std::size_t p = pos + 2;
    while (p < s.size() && is_slot_char(s[p])) ++p;
    if (p > pos + 2 && s.substr(p, 2) == "}}") {
      out.push_back({pos, p + 2, s.substr(pos + 2, p - pos - 2)});
      pos = p + 2;
    } else {
      pos += 1;
    }
  }
  return out;
}

std::optional<Role> marker_role(std::string_view line) {
  const auto t = text::trim(line);
  if (t.size() < 8 || t.substr(0, 4) != "--- " || t.substr(t.size() - 4) != " ---") {
    return std::nullopt;
  }
  const auto name = text::trim(t.substr(4, t.size() - 8));
  for (auto r : {Role::System, Role::User, Role::Assistant}) {
    if (name == to_string(r)) return r;
  }
  return std::nullopt;
}

std::string strip_blank_edges(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  std::size_t lead = 0;
  while (lead < s.size() && s[lead] == '\n') ++lead;
  return s.substr(lead);
}

}  // namespace

PromptTemplate parse_template(std::string template_id, std::string_view body) {
  PromptTemplate t;
  t.template_id = std::move(template_id);
  std::optional<Segment> current;
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(body)) {
    ++line_no;
    if (const auto role = marker_role(line)) {
      if (current) t.segments.push_back(std::move(*current));
      current = Segment{*role, {}};
      continue;
    }
    if (!current) {
      if (!text::trim(line).empty()) {
        throw Error(ErrorCode::ParseError, "template " + t.template_id + " line " +
                                               std::to_string(line_no) +
                                               ": text before the first role marker");
      }
      continue;
    }
    current->text += line;
    current->text += '\n';
  }
  if (current) t.segments.push_back(std::move(*current));
  if (t.segments.empty()) {
    throw Error(ErrorCode::ParseError, "template " + t.template_id + " has no segments");
  }
  for (auto& seg : t.segments) {
    seg.text = strip_blank_edges(std::move(seg.text));
    for (const auto& ref : find_slots(seg.text)) t.required_slots.emplace(ref.name);
  }
  return t;
}

std::vector<Message> render_prompt(const PromptTemplate& tmpl, const SlotMap& slots, bool strict) {
  for (const auto& name : tmpl.required_slots) {
    if (!slots.contains(name)) {
      throw Error(ErrorCode::MissingSlot,
                  "template " + tmpl.template_id + " needs slot '" + name + "'");
    }
  }
  if (strict) {
    for (const auto& [name, value] : slots) {
      if (!tmpl.required_slots.contains(name)) {
        throw Error(ErrorCode::UnknownSlot,
                    "template " + tmpl.template_id + " has no slot '" + name + "'");
      }
    }
  }
  std::vector<Message> out;
  out.reserve(tmpl.segments.size());
  for (const auto& seg : tmpl.segments) {
    std::string rendered;
    std::size_t last = 0;
    for (const auto& ref : find_slots(seg.text)) {
      rendered.append(seg.text, last, ref.begin - last);
      rendered += slots.find(ref.name)->second;
      last = ref.end;
    }
    rendered.append(seg.text, last);
    out.push_back({seg.role, std::move(rendered)});
  }
  return out;
}

std::string flatten(const std::vector<Message>& messages) {
  std::string out;
  for (const auto& m : messages) {
    if (!out.empty()) out += "\n\n";
    out += to_string(m.role);
    out += ": ";
    out += m.text;
  }
  return out;
}

std::string annotation_template_id(ManipulationMethod method) {
  switch (method) {
    case ManipulationMethod::Real: return "annotation_real";
    case ManipulationMethod::DeepFakes: return "annotation_deepfakes";
    case ManipulationMethod::Face2Face: return "annotation_face2face";
    case ManipulationMethod::FaceSwap: return "annotation_faceswap";
    case ManipulationMethod::NeuralTextures: return "annotation_neuraltextures";
    case ManipulationMethod::Other: break;
  }
  throw Error(ErrorCode::InvalidArgument,
              "no annotation template for method " + std::string(to_string(method)));
}

std::string teacher_template_id(fcot::SampleKind kind) {
  switch (kind) {
    case fcot::SampleKind::CrossVerification: return "cot_cross_verification";
    case fcot::SampleKind::EvidenceGuidedCorrection: return "cot_evidence_guided_correction";
    case fcot::SampleKind::ResilientRejection: return "cot_resilient_rejection";
  }
  return "";
}

TemplateLibrary TemplateLibrary::builtin() {
  TemplateLibrary lib;
  for (const auto& asset : detail::embedded_templates()) {
    lib.add(parse_template(std::string(asset.id), asset.text));
  }
  return lib;
}

void TemplateLibrary::load_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw Error(ErrorCode::Io, "template directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".tmpl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + f.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    add(parse_template(f.stem().string(), ss.str()));
  }
}

void TemplateLibrary::add(PromptTemplate tmpl) {
  auto id = tmpl.template_id;
  templates_.insert_or_assign(std::move(id), std::move(tmpl));
}

bool TemplateLibrary::contains(std::string_view id) const {
  return templates_.find(id) != templates_.end();
}

const PromptTemplate& TemplateLibrary::get(std::string_view id) const {
  const auto it = templates_.find(id);
  if (it == templates_.end()) {
    throw Error(ErrorCode::InvalidArgument, "unknown template '" + std::string(id) + "'");
  }
  return it->second;
}

std::vector<std::string> TemplateLibrary::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, t] : templates_) out.push_back(id);
  return out;
}

}  // namespace vrag::prompt
