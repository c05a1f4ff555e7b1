#pragma once

// Definition-level reference implementations. They are written for
// clarity, not speed, and share no code with the library.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

namespace oracle {

// Rank of x[i] = 1 + (#smaller) + (#equal others) / 2.
inline std::vector<long double> ranks(const std::vector<double>& x) {
  std::vector<long double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    long double smaller = 0, equal = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (j == i) continue;
      if (x[j] < x[i]) smaller += 1;
      if (x[j] == x[i]) equal += 1;
    }
    r[i] = 1 + smaller + equal / 2;
  }
  return r;
}

inline std::optional<double> pearson_ld(const std::vector<long double>& x, const std::vector<long double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) return std::nullopt;
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson_ld({x.begin(), x.end()}, {y.begin(), y.end()});
}

inline std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson_ld(ranks(x), ranks(y));
}

// Tie-free shortcut: 1 - 6 sum d^2 / (n (n^2 - 1)).
inline double spearman_no_ties(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = ranks(x), ry = ranks(y);
  long double d2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  const long double n = x.size();
  return static_cast<double>(1 - 6 * d2 / (n * (n * n - 1)));
}

inline std::optional<double> corr(const std::vector<double>& x, const std::vector<double>& y, bool use_ranks) {
  return use_ranks ? spearman(x, y) : pearson(x, y);
}

inline std::optional<double> mean(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  long double s = 0;
  for (double x : xs) s += x;
  return static_cast<double>(s / xs.size());
}

// m[context][participant][dimension]
using Cube = std::vector<std::vector<std::vector<double>>>;

inline std::vector<double> column(const Cube& m, std::size_t c, std::size_t d) {
  std::vector<double> out;
  for (const auto& row : m[c]) out.push_back(row[d]);
  return out;
}

// Per dimension: mean over context pairs; then mean over dimensions.
inline std::optional<double> rank_order(const Cube& m, bool use_ranks) {
  std::vector<double> dim_means;
  const std::size_t dims = m[0][0].size();
  for (std::size_t d = 0; d < dims; ++d) {
    std::vector<double> rs;
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t j = i + 1; j < m.size(); ++j) {
        if (auto r = corr(column(m, i, d), column(m, j, d), use_ranks)) rs.push_back(*r);
      }
    }
    if (auto mu = mean(rs)) dim_means.push_back(*mu);
  }
  return mean(dim_means);
}

// One participant's profiles over contexts: mean over context pairs.
inline std::optional<double> ipsative(const std::vector<std::vector<double>>& profiles, bool use_ranks) {
  std::vector<double> rs;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    for (std::size_t j = i + 1; j < profiles.size(); ++j) {
      if (auto r = corr(profiles[i], profiles[j], use_ranks)) rs.push_back(*r);
    }
  }
  return mean(rs);
}

// Between-context agreement of participant orders.
inline std::optional<double> ro_contexts(const std::vector<std::vector<double>>& orders, bool use_ranks) {
  return ipsative(orders, use_ranks);
}

// Agreement of each context order with the neutral order, averaged.
inline std::optional<double> ro_neutral(const std::vector<std::vector<double>>& orders,
                                        const std::vector<double>& neutral, bool use_ranks) {
  std::vector<double> rs;
  for (const auto& o : orders) {
    if (auto r = corr(o, neutral, use_ranks)) rs.push_back(*r);
  }
  return mean(rs);
}

// Benjamini-Hochberg: sort, scale by m/k, running minimum from the top, unsort.
inline std::vector<double> bh(const std::vector<double>& p) {
  const std::size_t m = p.size();
  std::vector<std::pair<double, std::size_t>> sorted;
  for (std::size_t i = 0; i < m; ++i) sorted.emplace_back(p[i], i);
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> adj(m);
  for (std::size_t k = 0; k < m; ++k) {
    double best = 1.0;
    for (std::size_t l = k; l < m; ++l) {
      best = std::min(best, sorted[l].first * static_cast<double>(m) / static_cast<double>(l + 1));
    }
    adj[sorted[k].second] = best;
  }
  return adj;
}

// Two-sided p of Student's t with an even number of degrees of freedom,
// from the finite trigonometric series of the t distribution function.
inline double t_two_sided_even_df(double t, int df) {
  const long double theta = std::atan(std::fabs(t) / std::sqrt(static_cast<long double>(df)));
  const long double c2 = std::cos(theta) * std::cos(theta);
  long double term = 1, sum = 1;
  for (int k = 2; k <= df - 2; k += 2) {
    term *= c2 * (k - 1) / k;
    sum += term;
  }
  return static_cast<double>(1 - std::sin(theta) * sum);
}

// Two-sided p of Student's t for any df by integrating the density with
// composite Simpson's rule.
inline double t_two_sided_numeric(double t, double df, int steps = 200000) {
  const long double nu = df;
  const long double norm =
      std::exp(std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2)) / std::sqrt(nu * std::numbers::pi_v<long double>);
  auto pdf = [&](long double x) { return norm * std::pow(1 + x * x / nu, -(nu + 1) / 2); };
  const long double a = std::fabs(t);
  const long double h = a / steps;
  long double s = pdf(0) + pdf(a);
  for (int i = 1; i < steps; ++i) s += (i % 2 ? 4 : 2) * pdf(i * h);
  const long double half = s * h / 3;  // P(0 < T < |t|)
  return static_cast<double>(1 - 2 * half);
}

struct Moments {
  double mean, var;  // sample variance
};

inline Moments moments(const std::vector<double>& xs) {
  long double m = 0;
  for (double x : xs) m += x;
  m /= xs.size();
  long double ss = 0;
  for (double x : xs) ss += (x - m) * (x - m);
  return {static_cast<double>(m), static_cast<double>(ss / (xs.size() - 1))};
}

}  // namespace oracle
