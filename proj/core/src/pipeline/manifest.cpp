#include "kbound/pipeline/manifest.hpp"

#include <chrono>
#include <ctime>

#include "kbound/errors.hpp"
#include "kbound/util/hash.hpp"
#include "kbound/util/jsonl.hpp"
#include "kbound/version.hpp"

namespace kbound::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path link_path_for(const fs::path& artifact) {
  auto p = artifact;
  p += ".manifest-link";
  return p;
}

json ref_json(const ArtifactRef& r) {
  json j = {{"path", r.path.string()}, {"sha256", r.sha256}};
  if (!r.manifest.empty()) j["manifest"] = r.manifest.string();
  return j;
}

ArtifactRef ref_from_json(const json& j) {
  return {j.at("path").get<std::string>(), j.at("sha256").get<std::string>(), j.value("manifest", "")};
}

}  // namespace

ArtifactRef describe_artifact(const fs::path& path) {
  ArtifactRef r;
  r.path = path;
  r.sha256 = util::sha256_hex(util::read_text(path));
  r.manifest = find_manifest(path);
  return r;
}

json RunManifest::to_json() const {
  json in = json::array();
  json out = json::array();
  for (const auto& r : inputs) in.push_back(ref_json(r));
  for (const auto& r : outputs) out.push_back(ref_json(r));
  return {{"command", command},       {"config_hash", config_hash}, {"inputs", in},
          {"outputs", out},           {"started_at", started_at},   {"finished_at", finished_at},
          {"tool_version", tool_version}};
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.config_hash = j.at("config_hash").get<std::string>();
  for (const auto& r : j.at("inputs")) m.inputs.push_back(ref_from_json(r));
  for (const auto& r : j.at("outputs")) m.outputs.push_back(ref_from_json(r));
  m.started_at = j.value("started_at", "");
  m.finished_at = j.value("finished_at", "");
  m.tool_version = j.value("tool_version", "");
  return m;
}

fs::path manifest_path_for(const fs::path& artifact) {
  auto p = artifact;
  p += ".manifest.json";
  return p;
}

void write_manifest(const fs::path& primary, const RunManifest& manifest) {
  const auto mpath = manifest_path_for(primary);
  util::write_json(mpath, manifest.to_json());
  for (const auto& out : manifest.outputs) {
    if (out.path == primary) continue;
    util::write_text(link_path_for(out.path), mpath.filename().string() + "\n");
  }
}

fs::path find_manifest(const fs::path& artifact) {
  const auto direct = manifest_path_for(artifact);
  if (fs::exists(direct)) return direct;
  const auto link = link_path_for(artifact);
  if (fs::exists(link)) {
    std::string name = util::read_text(link);
    while (!name.empty() && (name.back() == '\n' || name.back() == '\r')) name.pop_back();
    return artifact.parent_path() / name;
  }
  return {};
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string tool_version() { return std::string(kVersion); }

}  // namespace kbound::pipeline
