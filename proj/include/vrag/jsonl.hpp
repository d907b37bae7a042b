#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace vrag::jsonl {

using Json = nlohmann::json;

/// Calls `fn(line_number, record)` for every non-blank line. Errors thrown
/// from `fn` are re-thrown with the file name, line number and, when present,
/// the record's id field attached to the message.
void for_each(std::istream& in, const std::string& source_name,
              const std::function<void(std::size_t, const Json&)>& fn);
void for_each(const std::filesystem::path& path,
              const std::function<void(std::size_t, const Json&)>& fn);

std::vector<Json> read_all(const std::filesystem::path& path);

/// Compact single-line dump, keys in sorted order.
std::string dump(const Json& record);

void write_file(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace vrag::jsonl
