#include "vrag/jsonl.hpp"

#include "vrag/common.hpp"
#include "vrag/text.hpp"

#include <fstream>
#include <sstream>

namespace vrag::jsonl {

namespace {

std::string record_id(const Json& record) {
  if (!record.is_object()) return {};
  for (const char* key : {"sample_id", "entry_id", "query_id", "video_id", "embedding_id"}) {
    const auto it = record.find(key);
    if (it != record.end() && it->is_string()) return it->get<std::string>();
  }
  return {};
}

std::string where(const std::string& source, std::size_t line, const std::string& id) {
  std::string w = source + ":" + std::to_string(line);
  if (!id.empty()) w += " (record " + id + ")";
  return w;
}

}  // namespace

void for_each(std::istream& in, const std::string& source_name,
              const std::function<void(std::size_t, const Json&)>& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    Json record;
    try {
      record = Json::parse(line);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::ParseError, where(source_name, line_no, {}) + ": " + e.what());
    }
    try {
      fn(line_no, record);
    } catch (const Error& e) {
      throw Error(e.code(), where(source_name, line_no, record_id(record)) + ": " + e.detail());
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::ParseError,
                  where(source_name, line_no, record_id(record)) + ": " + e.what());
    }
  }
}

void for_each(const std::filesystem::path& path,
              const std::function<void(std::size_t, const Json&)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  for_each(in, path.string(), fn);
}

std::vector<Json> read_all(const std::filesystem::path& path) {
  std::vector<Json> out;
  for_each(path, [&](std::size_t, const Json& j) { out.push_back(j); });
  return out;
}

std::string dump(const Json& record) {
  return record.dump(-1, ' ', false, Json::error_handler_t::replace);
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << contents;
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace vrag::jsonl
