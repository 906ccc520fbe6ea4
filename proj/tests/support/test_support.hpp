#pragma once

#include <cstdlib>
#include <filesystem>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "kbound/curation/sample.hpp"
#include "kbound/gateway/mock_model.hpp"
#include "kbound/gateway/scripted_judge.hpp"

namespace kbound::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

gateway::ModelEndpoint mock_endpoint(const std::string& name = "mock", int max_parallel = 1);

std::shared_ptr<gateway::MockModel> mock_model(gateway::MockKnowledgeMap map, const std::string& name = "mock",
                                               int max_parallel = 1);

/// Judge that answers YES to equivalence prompts whose reference and
/// predicted answers normalize equal, NO otherwise (including abstention
/// prompts). Curation prompts get an all-YES reply.
std::shared_ptr<gateway::ScriptedJudge> lenient_judge();

Sample make_sample(const std::string& id, const std::string& question, const std::string& answer);

/// Corpus of `size` samples whose mock correct_prob is drawn so that exactly
/// round(size * known_fraction) samples have correct_prob >= 0.7.
struct EngineeredCorpus {
  std::vector<Sample> samples;
  gateway::MockKnowledgeMap map;
  std::set<std::string> planted_known;
};

struct EngineeredOptions {
  std::size_t size = 200;
  double known_fraction = 0.6;
  double known_low = 0.9;
  double known_high = 1.0;
  double unknown_low = 0.0;
  double unknown_high = 0.35;
  std::uint64_t seed = 7;
  /// Fraction of samples that the curation judge script rejects.
  double reject_fraction = 0.0;
};

EngineeredCorpus engineered_corpus(const EngineeredOptions& options = {});

/// Files for a config-driven mock run: corpus.jsonl, map.json, judge.json
/// (curation script rejecting `reject_fraction` of samples) and config.json.
struct MockWorkspace {
  std::filesystem::path root;
  std::filesystem::path config;
  std::set<std::string> rejected;
};

MockWorkspace write_mock_workspace(const std::filesystem::path& root, const EngineeredOptions& options = {},
                                   std::size_t train = 100, std::size_t test = 50);

}  // namespace kbound::testing
