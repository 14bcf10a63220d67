#include "foley/manifest.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <iterator>

#include "foley/errors.hpp"
#include "json_fields.hpp"

namespace foley {

std::string git_blob_hash(const std::vector<unsigned char>& content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw Error("manifest: cannot allocate a digest context");
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &length) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error("manifest: SHA-1 computation failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < length; ++i) {
    const unsigned char b = digest[i];
    std::snprintf(buf, sizeof buf, "%02x", b);
    hex += buf;
  }
  return hex;
}

std::string git_blob_hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("manifest: cannot read input " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return git_blob_hash(bytes);
}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs.push_back({path.string(), git_blob_hash_file(path)});
}

std::filesystem::path manifest_path_for(const std::filesystem::path& artifact) {
  return std::filesystem::path(artifact.string() + ".manifest.json");
}

void write_run_manifest(const RunManifest& m, const std::filesystem::path& artifact) {
  nlohmann::json j;
  j["command"] = m.command;
  j["config_paths"] = m.config_paths;
  j["seed"] = m.seed;
  j["inputs"] = nlohmann::json::array();
  for (const auto& in : m.inputs) j["inputs"].push_back({{"path", in.path}, {"hash", in.hash}});
  j["outputs"] = m.outputs;
  detail::write_json_file(j, manifest_path_for(artifact), "run manifest");
}

RunManifest read_run_manifest(const std::filesystem::path& manifest_file) {
  const char* what = "run manifest";
  const auto j = detail::read_json_file(manifest_file, what);
  RunManifest m;
  m.command = detail::field<std::string>(j, "command", what);
  m.config_paths = detail::field<std::vector<std::string>>(j, "config_paths", what);
  m.seed = detail::field<std::uint64_t>(j, "seed", what);
  const auto inputs = detail::field<nlohmann::json>(j, "inputs", what);
  if (!inputs.is_array()) throw FormatError("run manifest: field 'inputs' must be an array");
  for (const auto& in : inputs) {
    m.inputs.push_back({detail::field<std::string>(in, "path", what), detail::field<std::string>(in, "hash", what)});
  }
  m.outputs = detail::field<std::vector<std::string>>(j, "outputs", what);
  return m;
}

}  // namespace foley
