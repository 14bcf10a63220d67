#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace foley {

// SHA-1 of "blob <size>\0" + content, as printed by `git hash-object`.
std::string git_blob_hash(const std::vector<unsigned char>& content);
std::string git_blob_hash_file(const std::filesystem::path& path);

struct InputRecord {
  std::string path;
  std::string hash;
};

// Provenance written beside every artifact a CLI run produces.
struct RunManifest {
  std::string command;
  std::vector<std::string> config_paths;
  std::uint64_t seed = 0;
  std::vector<InputRecord> inputs;
  std::vector<std::string> outputs;

  void add_input(const std::filesystem::path& path);
};

// "<artifact>.manifest.json"
std::filesystem::path manifest_path_for(const std::filesystem::path& artifact);
void write_run_manifest(const RunManifest& manifest, const std::filesystem::path& artifact);
RunManifest read_run_manifest(const std::filesystem::path& manifest_file);

}  // namespace foley
