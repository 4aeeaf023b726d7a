#include "moppo/manifest.hpp"

#include <filesystem>

#include <openssl/evp.h>

#include "moppo/netlist.hpp"

namespace moppo {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_text_file(path)); }

std::string manifest_path_for(const std::string& out) {
  namespace fs = std::filesystem;
  if (fs::is_directory(out)) return (fs::path(out) / "manifest.json").string();
  return out + ".manifest.json";
}

nlohmann::json RunManifest::to_json() const {
  return {{"command", command},   {"argv", argv},           {"config", config},
          {"inputs", inputs},     {"artifacts", artifacts}, {"seed", seed},
          {"elapsed_seconds", elapsed_seconds}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.argv = j.at("argv").get<std::vector<std::string>>();
  m.config = j.value("config", nlohmann::json::object());
  m.inputs = j.value("inputs", std::map<std::string, std::string>{});
  m.artifacts = j.value("artifacts", std::map<std::string, std::string>{});
  m.seed = j.value("seed", std::uint64_t{0});
  m.elapsed_seconds = j.value("elapsed_seconds", 0.0);
  return m;
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
  write_text_file_atomic(path, manifest.to_json().dump(2) + "\n");
}

RunManifest read_manifest(const std::string& path) {
  try {
    return RunManifest::from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed manifest '" + path + "': " + e.what());
  }
}

}  // namespace moppo
