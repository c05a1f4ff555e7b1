#pragma once

#include <string_view>

// Bundled copies of core/data/*.jsonl, generated at build time.
namespace valstab::embedded {

std::string_view personas();
std::string_view pvq40();
std::string_view topics();
std::string_view names();
std::string_view religion();

}  // namespace valstab::embedded
