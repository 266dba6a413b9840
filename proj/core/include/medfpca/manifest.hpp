#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace medfpca {

/// Reproducibility record written next to every CLI command's outputs.
/// Every input and output file is listed with a content hash; re-running the
/// recorded command with the recorded seed reproduces the outputs
/// bit-identically.
struct RunManifest {
  struct FileHash {
    std::string path;
    std::string hash_hex;  // 16-hex-digit FNV-1a of the file bytes
  };

  std::string command;            // subcommand name
  std::vector<std::string> argv;  // full invocation echo
  std::string version;
  std::uint64_t seed = 0;
  std::string config_json;       // effective configuration (JSON text)
  std::vector<FileHash> inputs;
  std::vector<FileHash> outputs;
  double elapsed_seconds = 0.0;
  std::string diagnostics_json;  // sampler diagnostics (JSON text), optional
  std::vector<std::string> notes;

  /// Hashes the file now and appends it. Throws DataError if unreadable.
  void add_input(const std::string& path);
  void add_output(const std::string& path);

  std::string to_json_string() const;
  void write(const std::string& path) const;
};

/// 16-hex-digit FNV-1a content hash of a file.
std::string file_hash_hex(const std::string& path);

}  // namespace medfpca
