#pragma once

#include <string>
#include <vector>

namespace calderon {

/// SHA-256 of a byte string, lowercase hex.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

/// Collects every artifact a run writes and emits a JSON manifest with
/// one entry per file: relative path, byte size, content hash.
class Manifest {
 public:
  explicit Manifest(std::string rootDir) : root_(std::move(rootDir)) {}
  void add(const std::string& relativePath);
  /// Writes <root>/manifest.json (itself not listed).
  void write() const;
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::string root_;
  std::vector<std::string> files_;
};

}  // namespace calderon
