#include "valstab/stability.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "valstab/error.hpp"

namespace valstab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::optional<double> mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

void check_aligned_any(const std::vector<ScoreMatrix>& matrices) {
  for (const auto& m : matrices) {
    m.validate();
    if (m.participants != matrices.front().participants || m.dimensions != matrices.front().dimensions) {
      fail(ErrorCode::kInvalidArgument, "contexts must share participants and dimensions");
    }
  }
}

void check_aligned(const std::vector<ScoreMatrix>& matrices) {
  if (matrices.size() < 2) fail(ErrorCode::kInvalidArgument, "stability needs at least two contexts");
  check_aligned_any(matrices);
}

bool is_diagnostic_group(const std::string& group) { return group.rfind("item:", 0) == 0; }

}  // namespace

std::vector<double> ScoreMatrix::column(std::size_t d) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row.at(d));
  return out;
}

void ScoreMatrix::validate() const {
  if (rows.size() != participants.size()) fail(ErrorCode::kInvalidArgument, "matrix rows do not match participants");
  for (const auto& row : rows) {
    if (row.size() != dimensions.size()) fail(ErrorCode::kInvalidArgument, "matrix row width mismatch");
    for (double x : row) {
      if (!std::isfinite(x)) fail(ErrorCode::kInvalidArgument, "non-finite score in matrix " + context);
    }
  }
}

std::vector<ScoreMatrix> score_matrices(const ScoredDataset& scored, std::optional<std::uint64_t> seed) {
  // context -> participant -> dimension -> score
  std::map<std::string, std::map<std::string, std::map<std::string, double>>> cells;
  std::vector<std::string> dimensions;
  std::vector<std::string> participant_order;
  std::set<std::string> seen_participants;
  auto note_participant = [&](const std::string& p) {
    if (seen_participants.insert(p).second) participant_order.push_back(p);
  };

  if (scored.instrument == Instrument::kPvq) {
    for (auto v : all_values()) dimensions.emplace_back(short_code(v));
    for (const auto& p : scored.profiles) {
      if (seed && p.seed != *seed) continue;
      note_participant(p.participant);
      auto& row = cells[p.context][p.participant];
      for (std::size_t v = 0; v < kValueCount; ++v) row[dimensions[v]] = p.scores[v];
    }
  } else {
    std::set<std::string> seen_dims;
    for (const auto& b : scored.behaviors) {
      if ((seed && b.seed != *seed) || is_diagnostic_group(b.group)) continue;
      if (seen_dims.insert(b.group).second) dimensions.push_back(b.group);
      note_participant(b.participant);
      cells[b.context][b.participant][b.group] = b.value;
    }
  }

  std::vector<std::string> kept;
  for (const auto& p : participant_order) {
    bool everywhere = true;
    for (const auto& topic : scored.topics) {
      const auto c = cells.find(topic);
      if (c == cells.end()) { everywhere = false; break; }
      const auto row = c->second.find(p);
      if (row == c->second.end() || row->second.size() != dimensions.size()) { everywhere = false; break; }
    }
    if (everywhere) kept.push_back(p);
  }

  std::vector<ScoreMatrix> out;
  for (const auto& topic : scored.topics) {
    ScoreMatrix m;
    m.context = topic;
    m.seed = seed.value_or(0);
    m.participants = kept;
    m.dimensions = dimensions;
    for (const auto& p : kept) {
      std::vector<double> row;
      for (const auto& d : dimensions) row.push_back(cells.at(topic).at(p).at(d));
      m.rows.push_back(std::move(row));
    }
    out.push_back(std::move(m));
  }
  return out;
}

MeanSe summarize(const std::vector<double>& values) {
  MeanSe out;
  out.n = values.size();
  if (values.empty()) {
    out.mean = kNaN;
    out.se = kNaN;
    return out;
  }
  out.mean = *mean_of(values);
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double x : values) ss += (x - out.mean) * (x - out.mean);
  const double n = static_cast<double>(values.size());
  out.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return out;
}

StabilityReport rank_order(const std::vector<ScoreMatrix>& matrices, Estimator estimator) {
  check_aligned(matrices);
  StabilityReport rep;
  rep.estimator = estimator;
  for (const auto& m : matrices) rep.contexts.push_back(m.context);
  rep.dimensions = matrices.front().dimensions;
  const std::size_t dims = rep.dimensions.size();
  const std::size_t k = matrices.size();

  std::vector<std::vector<double>> by_dim(dims);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      std::vector<double> pair_rs;
      for (std::size_t d = 0; d < dims; ++d) {
        const auto r = correlate(matrices[i].column(d), matrices[j].column(d), estimator);
        if (r) {
          pair_rs.push_back(*r);
          by_dim[d].push_back(*r);
        } else {
          ++rep.undefined;
        }
      }
      rep.pairs.push_back({i, j, mean_of(pair_rs)});
    }
  }
  std::vector<double> dim_means;
  for (const auto& rs : by_dim) {
    rep.per_dimension.push_back(mean_of(rs));
    if (rep.per_dimension.back()) dim_means.push_back(*rep.per_dimension.back());
  }
  if (dim_means.empty()) fail(ErrorCode::kDegenerateColumn, "every column is constant in some context");
  const auto s = summarize(dim_means);
  rep.mean = s.mean;
  rep.se = s.se;
  return rep;
}

StabilityReport ipsative(const std::vector<std::vector<double>>& profiles, Estimator estimator) {
  if (profiles.size() < 2) fail(ErrorCode::kInvalidArgument, "ipsative stability needs at least two contexts");
  StabilityReport rep;
  rep.estimator = estimator;
  std::vector<double> rs;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    for (std::size_t j = i + 1; j < profiles.size(); ++j) {
      if (profiles[i].size() != profiles[j].size()) fail(ErrorCode::kInvalidArgument, "profile length mismatch");
      const auto r = correlate(profiles[i], profiles[j], estimator);
      if (r) {
        rs.push_back(*r);
      } else {
        ++rep.undefined;
      }
      rep.pairs.push_back({i, j, r});
    }
  }
  if (rs.empty()) fail(ErrorCode::kDegenerateProfile, "every context pair has a tied profile");
  const auto s = summarize(rs);
  rep.mean = s.mean;
  rep.se = s.se;
  return rep;
}

PopulationIpsative ipsative_population(const std::vector<ScoreMatrix>& matrices, Estimator estimator) {
  check_aligned(matrices);
  PopulationIpsative out;
  out.participants = matrices.front().participants;
  std::vector<double> valid;
  for (std::size_t p = 0; p < out.participants.size(); ++p) {
    std::vector<std::vector<double>> profiles;
    for (const auto& m : matrices) profiles.push_back(m.rows[p]);
    try {
      const auto rep = ipsative(profiles, estimator);
      out.per_participant.emplace_back(rep.mean);
      valid.push_back(rep.mean);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateProfile) throw;
      out.per_participant.emplace_back(std::nullopt);
      ++out.undefined;
    }
  }
  if (valid.empty()) fail(ErrorCode::kDegenerateProfile, "no participant has a usable profile");
  const auto s = summarize(valid);
  out.mean = s.mean;
  out.se = s.se;
  return out;
}

std::vector<std::vector<double>> pairwise_matrix(const std::vector<ScoreMatrix>& matrices, Estimator estimator) {
  check_aligned(matrices);
  const std::size_t k = matrices.size();
  std::vector<std::vector<double>> table(k, std::vector<double>(k, 1.0));
  const std::size_t dims = matrices.front().dimensions.size();
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      std::vector<double> rs;
      for (std::size_t d = 0; d < dims; ++d) {
        if (auto r = correlate(matrices[i].column(d), matrices[j].column(d), estimator)) rs.push_back(*r);
      }
      table[i][j] = table[j][i] = mean_of(rs).value_or(kNaN);
    }
  }
  return table;
}

std::array<double, kValueCount> neutral_profile(const std::vector<std::array<double, kValueCount>>& profiles) {
  if (profiles.empty()) fail(ErrorCode::kInsufficientData, "neutral profile needs at least one permutation");
  std::array<double, kValueCount> sum{};
  for (const auto& p : profiles) {
    const auto ranks = midranks(p);
    for (std::size_t v = 0; v < kValueCount; ++v) sum[v] += ranks[v];
  }
  for (auto& s : sum) s /= static_cast<double>(profiles.size());
  return sum;
}

MeanSe ipsative_to_neutral(const std::vector<ScoreMatrix>& matrices, const std::array<double, kValueCount>& neutral,
                           Estimator estimator) {
  if (matrices.empty()) fail(ErrorCode::kInvalidArgument, "need at least one context");
  check_aligned_any(matrices);
  if (matrices.front().dimensions.size() != kValueCount) {
    fail(ErrorCode::kInvalidArgument, "value profiles need ten dimensions");
  }
  std::vector<double> per_participant;
  for (std::size_t p = 0; p < matrices.front().participants.size(); ++p) {
    std::vector<double> rs;
    for (const auto& m : matrices) {
      if (auto r = correlate(m.rows[p], neutral, estimator)) rs.push_back(*r);
    }
    if (auto mean = mean_of(rs)) per_participant.push_back(*mean);
  }
  if (per_participant.empty()) fail(ErrorCode::kDegenerateProfile, "no usable profile to compare with neutral");
  return summarize(per_participant);
}

double ro_contexts(const std::vector<std::vector<double>>& orders, Estimator estimator) {
  if (orders.size() < 2) fail(ErrorCode::kInvalidArgument, "need at least two context orders");
  std::vector<double> rs;
  for (std::size_t i = 0; i < orders.size(); ++i) {
    for (std::size_t j = i + 1; j < orders.size(); ++j) {
      if (auto r = correlate(orders[i], orders[j], estimator)) rs.push_back(*r);
    }
  }
  if (rs.empty()) fail(ErrorCode::kDegenerateColumn, "every context order is fully tied");
  return *mean_of(rs);
}

double ro_neutral(const std::vector<std::vector<double>>& orders, const std::vector<double>& neutral,
                  Estimator estimator) {
  if (orders.empty()) fail(ErrorCode::kInvalidArgument, "need at least one context order");
  std::vector<double> rs;
  for (const auto& o : orders) {
    if (auto r = correlate(o, neutral, estimator)) rs.push_back(*r);
  }
  if (rs.empty()) fail(ErrorCode::kDegenerateColumn, "neutral or context orders are fully tied");
  return *mean_of(rs);
}

NeutralOrderReport neutral_order_stability(const std::vector<ScoreMatrix>& matrices, const ScoreMatrix& neutral,
                                           Estimator estimator) {
  check_aligned(matrices);
  neutral.validate();
  const auto& first = matrices.front();
  if (neutral.dimensions != first.dimensions) fail(ErrorCode::kInvalidArgument, "neutral matrix dimensions differ");
  // Align the neutral rows to the context participants.
  std::map<std::string, std::size_t> nrow;
  for (std::size_t i = 0; i < neutral.participants.size(); ++i) nrow[neutral.participants[i]] = i;
  std::vector<std::size_t> rows;
  for (const auto& p : first.participants) {
    const auto it = nrow.find(p);
    if (it == nrow.end()) fail(ErrorCode::kInvalidArgument, "participant '" + p + "' missing from neutral run");
    rows.push_back(it->second);
  }
  NeutralOrderReport rep;
  std::vector<double> cont, neut;
  for (std::size_t d = 0; d < first.dimensions.size(); ++d) {
    std::vector<std::vector<double>> orders;
    for (const auto& m : matrices) orders.push_back(m.column(d));
    std::vector<double> n;
    for (auto r : rows) n.push_back(neutral.rows[r][d]);
    try {
      const double c = ro_contexts(orders, estimator);
      const double t = ro_neutral(orders, n, estimator);
      cont.push_back(c);
      neut.push_back(t);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateColumn) throw;
      ++rep.undefined;
    }
  }
  if (cont.empty()) fail(ErrorCode::kDegenerateColumn, "every dimension is degenerate");
  rep.ro_contexts = *mean_of(cont);
  rep.ro_neutral = *mean_of(neut);
  return rep;
}

ValueBehaviorReport value_behavior_correlation(const std::vector<ScoreMatrix>& values,
                                               const std::vector<ScoreMatrix>& behavior, Estimator estimator) {
  ValueBehaviorReport rep;
  std::array<std::vector<double>, kValueCount> acc;
  std::set<std::string> groups;
  for (const auto& vm : values) {
    vm.validate();
    if (vm.dimensions.size() != kValueCount) fail(ErrorCode::kInvalidArgument, "value matrix needs ten dimensions");
    const ScoreMatrix* bm = nullptr;
    for (const auto& b : behavior) {
      if (b.context == vm.context) bm = &b;
    }
    if (bm == nullptr) continue;
    bm->validate();
    ++rep.contexts;

    std::map<std::string, std::size_t> brow;
    for (std::size_t i = 0; i < bm->participants.size(); ++i) brow[bm->participants[i]] = i;
    std::vector<std::size_t> vi, bi;
    for (std::size_t i = 0; i < vm.participants.size(); ++i) {
      if (auto it = brow.find(vm.participants[i]); it != brow.end()) {
        vi.push_back(i);
        bi.push_back(it->second);
      }
    }
    for (std::size_t g = 0; g < bm->dimensions.size(); ++g) {
      groups.insert(bm->dimensions[g]);
      std::vector<double> y;
      for (auto i : bi) y.push_back(bm->rows[i][g]);
      for (std::size_t v = 0; v < kValueCount; ++v) {
        std::vector<double> x;
        for (auto i : vi) x.push_back(vm.rows[i][v]);
        if (auto r = correlate(x, y, estimator)) {
          acc[v].push_back(*r);
        } else {
          ++rep.undefined;
        }
      }
    }
  }
  if (rep.contexts == 0) fail(ErrorCode::kInvalidArgument, "no context is shared by values and behaviour");
  rep.groups = groups.size();
  for (std::size_t v = 0; v < kValueCount; ++v) rep.per_value[v] = mean_of(acc[v]);
  return rep;
}

}  // namespace valstab
