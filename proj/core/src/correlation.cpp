#include "valstab/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "valstab/error.hpp"

namespace valstab {

std::string_view to_string(Estimator estimator) {
  return estimator == Estimator::kSpearman ? "spearman" : "pearson";
}

Estimator estimator_from_string(std::string_view text) {
  if (text == "spearman") return Estimator::kSpearman;
  if (text == "pearson") return Estimator::kPearson;
  fail(ErrorCode::kInvalidArgument, "unknown estimator '" + std::string(text) + "'");
}

std::vector<double> midranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i + 1;
    while (j < idx.size() && x[idx[j]] == x[idx[i]]) ++j;
    // Positions i..j-1 hold ranks i+1..j.
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = rank;
    i = j;
  }
  return ranks;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) return std::nullopt;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) return std::nullopt;
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  return pearson(rx, ry);
}

std::optional<double> correlate(std::span<const double> x, std::span<const double> y, Estimator estimator) {
  return estimator == Estimator::kSpearman ? spearman(x, y) : pearson(x, y);
}

}  // namespace valstab
