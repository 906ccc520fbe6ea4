#include "kbound/util/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "kbound/errors.hpp"

namespace kbound::util {
namespace fs = std::filesystem;

std::vector<Json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_jsonl(const fs::path& path, const std::vector<Json>& records) {
  std::string text;
  for (const auto& r : records) {
    text += r.dump();
    text.push_back('\n');
  }
  write_text(path, text);
}

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const Json& value) {
  write_text(path, value.dump(2) + "\n");
}

std::string canonical_dump(const Json& value) {
  // nlohmann::json objects are std::map-backed, so keys already serialize sorted.
  return value.dump();
}

}  // namespace kbound::util
