#pragma once

#include <string>
#include <vector>

namespace valstab {

enum class TTestVariant { kStudent, kWelch };

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

/// Two-sample t-test for a difference in means. Student pools the
/// variances; Welch uses the Satterthwaite degrees of freedom. Throws
/// TooFewSamples when either sample has fewer than two values.
TTestResult t_test(const std::vector<double>& a, const std::vector<double>& b,
                   TTestVariant variant = TTestVariant::kStudent);

/// Benjamini-Hochberg adjusted p-values, in input order.
std::vector<double> fdr_adjust(const std::vector<double>& pvalues);

struct ModelSample {
  std::string model;
  std::vector<double> values;  // per-seed stability
};

struct ComparisonMatrix {
  std::vector<std::string> models;
  // Square tables, mirrored; the diagonal holds NaN (raw/adjusted) and false.
  std::vector<std::vector<double>> raw_p;
  std::vector<std::vector<double>> adjusted_p;
  std::vector<std::vector<bool>> significant;
  double alpha = 0.05;

  /// Number of compared model pairs.
  std::size_t cells() const;
};

/// All pairwise t-tests, adjusted jointly with Benjamini-Hochberg.
ComparisonMatrix compare_models(const std::vector<ModelSample>& samples, double alpha = 0.05,
                                TTestVariant variant = TTestVariant::kStudent);

}  // namespace valstab
