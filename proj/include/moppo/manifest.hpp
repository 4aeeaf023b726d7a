#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "moppo/hash.hpp"

namespace moppo {

/// Provenance record written next to every CLI artifact.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::string> inputs;     // path -> sha256
  std::map<std::string, std::string> artifacts;  // path -> sha256
  std::uint64_t seed = 0;
  double elapsed_seconds = 0.0;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

std::string sha256_file(const std::string& path);

/// `<artifact>.manifest.json`, or `<dir>/manifest.json` for directory outputs.
std::string manifest_path_for(const std::string& out);

void write_manifest(const std::string& path, const RunManifest& manifest);
RunManifest read_manifest(const std::string& path);

}  // namespace moppo
