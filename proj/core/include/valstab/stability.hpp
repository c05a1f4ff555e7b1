#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "valstab/correlation.hpp"
#include "valstab/domain.hpp"
#include "valstab/scoring.hpp"

namespace valstab {

/// Participants x dimensions scores for one context and seed.
struct ScoreMatrix {
  std::string context;
  std::uint64_t seed = 0;
  std::vector<std::string> participants;
  std::vector<std::string> dimensions;
  std::vector<std::vector<double>> rows;  // rows[participant][dimension]

  std::vector<double> column(std::size_t d) const;
  void validate() const;
};

/// Matrices of one seed (nullopt: every seed, as in no-persona runs where
/// each permutation carries its own), one per context, restricted to the
/// participants scored in every context (listwise deletion). Dimensions are
/// the ten value codes for PVQ data, otherwise the behaviour groups without
/// the per-item religion diagnostics.
std::vector<ScoreMatrix> score_matrices(const ScoredDataset& scored, std::optional<std::uint64_t> seed);

struct PairCorrelation {
  std::size_t i = 0;  // context indices, i < j
  std::size_t j = 0;
  std::optional<double> r;  // nullopt: undefined for every dimension
};

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

/// Mean with the standard error of the mean (sample SD / sqrt(n)).
MeanSe summarize(const std::vector<double>& values);

struct StabilityReport {
  Estimator estimator = Estimator::kSpearman;
  std::vector<std::string> contexts;
  std::vector<PairCorrelation> pairs;
  std::vector<std::string> dimensions;           // rank-order only
  std::vector<std::optional<double>> per_dimension;  // mean over pairs, rank-order only
  double mean = 0.0;
  double se = 0.0;
  std::size_t undefined = 0;  // correlations skipped as degenerate
};

/// Rank-order stability: for each dimension, correlation of the
/// participants' scores between every pair of contexts, averaged over pairs
/// and then over dimensions. `se` is taken over the per-dimension means.
StabilityReport rank_order(const std::vector<ScoreMatrix>& matrices, Estimator estimator = Estimator::kSpearman);

/// Ipsative stability of one participant: correlation of the profile
/// between every pair of contexts, averaged over pairs.
StabilityReport ipsative(const std::vector<std::vector<double>>& profiles, Estimator estimator = Estimator::kSpearman);

struct PopulationIpsative {
  std::vector<std::string> participants;
  std::vector<std::optional<double>> per_participant;
  double mean = 0.0;
  double se = 0.0;  // over participants
  std::size_t undefined = 0;
};

PopulationIpsative ipsative_population(const std::vector<ScoreMatrix>& matrices,
                                       Estimator estimator = Estimator::kSpearman);

/// Full context x context table of rank-order stability (dimension means),
/// symmetric with a unit diagonal. Undefined entries are NaN.
std::vector<std::vector<double>> pairwise_matrix(const std::vector<ScoreMatrix>& matrices,
                                                 Estimator estimator = Estimator::kSpearman);

/// Mean value ranks over a set of profiles.
std::array<double, kValueCount> neutral_profile(const std::vector<std::array<double, kValueCount>>& profiles);

/// Mean correlation of a participant's value profile (each row of every
/// context matrix) with the neutral profile, averaged over participants and
/// contexts. `se` is taken over participants.
MeanSe ipsative_to_neutral(const std::vector<ScoreMatrix>& matrices, const std::array<double, kValueCount>& neutral,
                           Estimator estimator = Estimator::kSpearman);

/// Mean correlation between every pair of participant orders (one score
/// vector per context).
double ro_contexts(const std::vector<std::vector<double>>& orders, Estimator estimator = Estimator::kSpearman);
/// Mean correlation between each context's participant order and the
/// neutral order.
double ro_neutral(const std::vector<std::vector<double>>& orders, const std::vector<double>& neutral,
                  Estimator estimator = Estimator::kSpearman);

struct NeutralOrderReport {
  double ro_contexts = 0.0;  // averaged over dimensions
  double ro_neutral = 0.0;
  std::size_t undefined = 0;  // dimensions skipped as degenerate
};

/// Both participant-order stabilities for every dimension, averaged over
/// dimensions. `neutral` holds the same participants scored without any
/// conversation.
NeutralOrderReport neutral_order_stability(const std::vector<ScoreMatrix>& matrices, const ScoreMatrix& neutral,
                                           Estimator estimator = Estimator::kSpearman);

struct ValueBehaviorReport {
  std::array<std::optional<double>, kValueCount> per_value{};
  std::size_t groups = 0;    // behaviour groups (races) entering the average
  std::size_t contexts = 0;  // paired contexts
  std::size_t undefined = 0;
};

/// For each value: correlation between the participants' value scores and
/// their behaviour score for every group in the same context, averaged over
/// groups and contexts. Contexts are paired by name.
ValueBehaviorReport value_behavior_correlation(const std::vector<ScoreMatrix>& values,
                                               const std::vector<ScoreMatrix>& behavior,
                                               Estimator estimator = Estimator::kSpearman);

struct HumanReference {
  std::string_view study;
  double rank_order_r;
  double ipsative_r;
};

/// Longitudinal human value-stability estimates used as reference lines.
inline constexpr std::array<HumanReference, 2> kHumanReferences{{
    {"ages 10-12", 0.57, 0.66},
    {"ages 20-28", 0.66, 0.59},
}};

}  // namespace valstab
