#pragma once

// Run manifests: the resolved configuration of a run plus digests of what it wrote.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "json.hpp"

namespace otd {

/// `git describe` of the source tree at build time.
std::string tool_version();

std::string sha256_hex(std::string_view data);
/// Throws std::runtime_error if the file cannot be read.
std::string sha256_file_hex(const std::filesystem::path& path);

struct RunManifest {
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::string version = tool_version();
  std::map<std::string, std::string> digests;  ///< file name -> sha256

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

}  // namespace otd
