#include "valstab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "valstab/error.hpp"

namespace valstab {

namespace {

struct Moments {
  double mean;
  double var;  // unbiased
  double n;
};

Moments moments(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, ss / (n - 1.0), n};
}

}  // namespace

TTestResult t_test(const std::vector<double>& a, const std::vector<double>& b, TTestVariant variant) {
  if (a.size() < 2 || b.size() < 2) fail(ErrorCode::kTooFewSamples, "t-test needs at least two values per sample");
  for (const auto* s : {&a, &b}) {
    for (double v : *s) {
      if (!std::isfinite(v)) fail(ErrorCode::kInvalidArgument, "t-test samples must be finite");
    }
  }
  const auto ma = moments(a);
  const auto mb = moments(b);
  TTestResult r;
  double se2 = 0.0;
  if (variant == TTestVariant::kStudent) {
    r.df = ma.n + mb.n - 2.0;
    const double pooled = ((ma.n - 1.0) * ma.var + (mb.n - 1.0) * mb.var) / r.df;
    se2 = pooled * (1.0 / ma.n + 1.0 / mb.n);
  } else {
    const double va = ma.var / ma.n;
    const double vb = mb.var / mb.n;
    se2 = va + vb;
    r.df = se2 == 0.0 ? ma.n + mb.n - 2.0
                      : se2 * se2 / (va * va / (ma.n - 1.0) + vb * vb / (mb.n - 1.0));
  }
  const double diff = ma.mean - mb.mean;
  if (se2 == 0.0) {
    // Both samples constant: either identical (no evidence) or separated
    // without any spread.
    r.t = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
    r.p = diff == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t = diff / std::sqrt(se2);
  const boost::math::students_t dist(r.df);
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t))));
  return r;
}

std::vector<double> fdr_adjust(const std::vector<double>& pvalues) {
  const std::size_t m = pvalues.size();
  for (double p : pvalues) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::kOutOfRange, "p-values must lie in [0, 1]");
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });
  std::vector<double> adjusted(m);
  double running = 1.0;
  for (std::size_t k = m; k-- > 0;) {
    const auto i = order[k];
    // m / rank >= 1 exactly in floating point, so no adjusted value drops below its raw p.
    running = std::min(running, pvalues[i] * (static_cast<double>(m) / static_cast<double>(k + 1)));
    adjusted[i] = running;
  }
  return adjusted;
}

std::size_t ComparisonMatrix::cells() const { return models.size() * (models.size() - 1) / 2; }

ComparisonMatrix compare_models(const std::vector<ModelSample>& samples, double alpha, TTestVariant variant) {
  if (samples.size() < 2) fail(ErrorCode::kInvalidArgument, "model comparison needs at least two models");
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::kOutOfRange, "alpha must lie in (0, 1)");
  const std::size_t m = samples.size();
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  ComparisonMatrix out;
  out.alpha = alpha;
  for (const auto& s : samples) out.models.push_back(s.model);
  out.raw_p.assign(m, std::vector<double>(m, kNaN));
  out.adjusted_p = out.raw_p;
  out.significant.assign(m, std::vector<bool>(m, false));

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<double> raw;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      pairs.emplace_back(i, j);
      raw.push_back(t_test(samples[i].values, samples[j].values, variant).p);
    }
  }
  const auto adjusted = fdr_adjust(raw);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    out.raw_p[i][j] = out.raw_p[j][i] = raw[k];
    out.adjusted_p[i][j] = out.adjusted_p[j][i] = adjusted[k];
    out.significant[i][j] = out.significant[j][i] = adjusted[k] < alpha;
  }
  return out;
}

}  // namespace valstab
