#include "kbound/curation/sample.hpp"

#include <set>

#include "kbound/errors.hpp"
#include "kbound/util/jsonl.hpp"

namespace kbound {

nlohmann::json to_json(const Sample& s) {
  return {{"id", s.id},
          {"image_ref", s.image_ref},
          {"question", s.question},
          {"ground_truth", s.ground_truth},
          {"source", s.source},
          {"meta", s.meta}};
}

Sample sample_from_json(const nlohmann::json& j) {
  Sample s;
  s.id = j.value("id", "");
  s.image_ref = j.value("image_ref", "");
  s.question = j.value("question", "");
  s.ground_truth = j.value("ground_truth", "");
  s.source = j.value("source", "");
  if (j.contains("meta")) s.meta = j["meta"].get<std::map<std::string, std::string>>();
  if (s.id.empty()) throw InvalidArgument("sample without id");
  if (s.question.empty()) throw InvalidArgument("sample " + s.id + ": empty question");
  if (s.ground_truth.empty()) throw InvalidArgument("sample " + s.id + ": empty ground_truth");
  return s;
}

std::vector<Sample> load_samples(const std::filesystem::path& path) {
  std::vector<Sample> out;
  std::set<std::string> seen;
  for (const auto& j : util::read_jsonl(path)) {
    out.push_back(sample_from_json(j));
    if (!seen.insert(out.back().id).second) {
      throw InvalidArgument(path.string() + ": duplicate sample id " + out.back().id);
    }
  }
  return out;
}

void save_samples(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  std::vector<nlohmann::json> rows;
  rows.reserve(samples.size());
  for (const auto& s : samples) rows.push_back(to_json(s));
  util::write_jsonl(path, rows);
}

gateway::Query query_for(const Sample& s, std::string prompt) {
  return {s.id, std::move(prompt), s.image_ref};
}

}  // namespace kbound
