/// @file manifest.hpp
/// @brief Per-invocation provenance records written next to artifacts.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace kbound::pipeline {

struct ArtifactRef {
  std::filesystem::path path;
  std::string sha256;
  /// Manifest that produced this input, when one exists next to it.
  std::filesystem::path manifest;
};

/// Hashes the file and looks for `<path>.manifest.json` or the manifest of
/// the stage that wrote it.
ArtifactRef describe_artifact(const std::filesystem::path& path);

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::vector<ArtifactRef> inputs;
  std::vector<ArtifactRef> outputs;
  std::string started_at;
  std::string finished_at;
  std::string tool_version;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

/// `<artifact>.manifest.json`.
std::filesystem::path manifest_path_for(const std::filesystem::path& artifact);

/// Writes the manifest next to `primary` and a `.manifest-link` pointer for
/// every other output so that any artifact resolves to its manifest.
void write_manifest(const std::filesystem::path& primary, const RunManifest& manifest);

/// Manifest responsible for `artifact`, following link files. Empty if none.
std::filesystem::path find_manifest(const std::filesystem::path& artifact);

/// UTC ISO-8601 timestamp with second resolution.
std::string utc_now();

std::string tool_version();

}  // namespace kbound::pipeline
