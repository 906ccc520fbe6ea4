#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace kbound::util {

using Json = nlohmann::json;

/// Parses every non-blank line of a JSONL file. Throws IoError on a missing
/// file and InvalidArgument (with the line number) on malformed JSON.
std::vector<Json> read_jsonl(const std::filesystem::path& path);

/// Writes records one per line, replacing the file through a temporary.
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& value);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Canonical serialization used for hashing: sorted keys, no whitespace.
std::string canonical_dump(const Json& value);

}  // namespace kbound::util
