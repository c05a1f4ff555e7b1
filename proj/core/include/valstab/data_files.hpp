#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace valstab {

/// Parses a line-oriented JSON file: one object per line, blank lines and
/// lines starting with '#' ignored. Errors name the offending line.
std::vector<nlohmann::json> parse_jsonl(std::string_view text, std::string_view source = "<memory>");

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace valstab
