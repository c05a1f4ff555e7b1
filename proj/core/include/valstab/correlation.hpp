#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace valstab {

enum class Estimator { kSpearman, kPearson };
std::string_view to_string(Estimator estimator);
Estimator estimator_from_string(std::string_view text);

/// 1-based ranks; tied entries share the mean of the ranks they span.
std::vector<double> midranks(std::span<const double> x);

/// Pearson correlation; nullopt when either input is constant or the sizes
/// differ or fall below two.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);
/// Pearson correlation of midranks.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);
std::optional<double> correlate(std::span<const double> x, std::span<const double> y, Estimator estimator);

}  // namespace valstab
