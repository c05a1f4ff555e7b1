#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace valstab {

/// SHA-256 (hex) of the canonical JSON dump; used as a content address.
std::string content_key(const nlohmann::json& value);

/// Durable store for simulated transcripts and administered answers.
///
/// Each kind is an append-only JSONL log ({"key": ..., "value": ...} per
/// line) under the cache directory; the key index is rebuilt in memory on
/// open. A torn final line left by a crash is ignored. The first value stored
/// for a key wins, so retried cells never duplicate entries.
class Cache {
 public:
  enum class Kind { kTranscript, kAnswer };

  Cache() = default;  // memory only
  explicit Cache(std::filesystem::path dir);

  std::optional<nlohmann::json> find(Kind kind, const std::string& key) const;
  void put(Kind kind, const std::string& key, const nlohmann::json& value);
  std::size_t size(Kind kind) const;
  const std::filesystem::path& directory() const { return dir_; }

 private:
  struct Log {
    std::map<std::string, nlohmann::json> index;
    std::ofstream out;
  };
  Log& log(Kind kind) { return kind == Kind::kTranscript ? transcripts_ : answers_; }
  const Log& log(Kind kind) const { return kind == Kind::kTranscript ? transcripts_ : answers_; }
  void load(Kind kind, const std::filesystem::path& file);

  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  Log transcripts_;
  Log answers_;
};

}  // namespace valstab
