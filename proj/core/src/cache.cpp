#include "valstab/cache.hpp"

#include <openssl/evp.h>

#include <array>
#include <sstream>

#include "valstab/data_files.hpp"
#include "valstab/error.hpp"

namespace valstab {

std::string content_key(const nlohmann::json& value) {
  const std::string bytes = value.dump();
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::kIo, "SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0xF]);
  }
  return hex;
}

Cache::Cache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  load(Kind::kTranscript, dir_ / "transcripts.jsonl");
  load(Kind::kAnswer, dir_ / "answers.jsonl");
}

void Cache::load(Kind kind, const std::filesystem::path& file) {
  auto& l = log(kind);
  if (std::filesystem::exists(file)) {
    std::string text = read_file(file);
    // Drop a torn trailing record (no terminating newline).
    if (!text.empty() && text.back() != '\n') {
      const auto last = text.rfind('\n');
      text.resize(last == std::string::npos ? 0 : last + 1);
      write_file(file, text);
    }
    for (auto& record : parse_jsonl(text, file.string())) {
      auto key = record.at("key").get<std::string>();
      l.index.emplace(std::move(key), std::move(record.at("value")));
    }
  }
  l.out.open(file, std::ios::app | std::ios::binary);
  if (!l.out) fail(ErrorCode::kIo, "cannot open cache log " + file.string());
}

std::optional<nlohmann::json> Cache::find(Kind kind, const std::string& key) const {
  std::lock_guard lock(mutex_);
  const auto& idx = log(kind).index;
  if (auto it = idx.find(key); it != idx.end()) return std::optional<nlohmann::json>(std::in_place, it->second);
  return std::nullopt;
}

void Cache::put(Kind kind, const std::string& key, const nlohmann::json& value) {
  std::lock_guard lock(mutex_);
  auto& l = log(kind);
  if (!l.index.emplace(key, value).second) return;
  if (l.out.is_open()) {
    l.out << nlohmann::json{{"key", key}, {"value", value}}.dump() << '\n';
    l.out.flush();
    if (!l.out) fail(ErrorCode::kIo, "cache append failed");
  }
}

std::size_t Cache::size(Kind kind) const {
  std::lock_guard lock(mutex_);
  return log(kind).index.size();
}

}  // namespace valstab
