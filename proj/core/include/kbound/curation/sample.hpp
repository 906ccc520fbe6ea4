#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kbound/gateway/types.hpp"

namespace kbound {

/// One image-question-ground-truth record.
struct Sample {
  std::string id;
  std::string image_ref;
  std::string question;
  std::string ground_truth;
  std::string source;
  std::map<std::string, std::string> meta;

  bool operator==(const Sample&) const = default;
};

nlohmann::json to_json(const Sample& s);
/// Throws InvalidArgument when id, question or ground_truth is empty.
Sample sample_from_json(const nlohmann::json& j);

/// Reads a JSONL corpus; rejects duplicate ids.
std::vector<Sample> load_samples(const std::filesystem::path& path);
void save_samples(const std::filesystem::path& path, const std::vector<Sample>& samples);

/// Query carrying the sample's id and image with the given prompt.
gateway::Query query_for(const Sample& s, std::string prompt);

}  // namespace kbound
