#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "valstab/domain.hpp"
#include "valstab/simulation.hpp"

namespace valstab {

/// Ten mean-centred value scores of one participant in one context.
struct ValueProfile {
  std::string participant;
  std::string context;
  std::uint64_t seed = 0;
  std::array<double, kValueCount> scores{};
  std::array<int, kValueCount> answered{};  // items that entered each value mean
  double completeness = 1.0;                // answered items / administered items
};

/// Mean behavioural score of one participant for one group of queries.
struct BehaviorScore {
  Task task = Task::kDonation;
  std::string participant;
  std::string context;
  std::uint64_t seed = 0;
  std::string group;  // race, "religiosity", or "item:<name>" for religion diagnostics
  double value = 0.0;
  int answered = 0;
};

/// Group name of the aggregate religiosity score.
inline constexpr std::string_view kReligiosity = "religiosity";

/// Scores one cell's PVQ answers. Unanswered items are dropped from both the
/// participant mean and the value means. Throws InsufficientData when a value
/// has no answered item.
ValueProfile score_pvq(const std::vector<AnswerRecord>& records);

/// Per-group means of the chosen options' scores. Throws InsufficientData
/// when a group present in the records has no answered query.
std::vector<BehaviorScore> score_downstream(const std::vector<AnswerRecord>& records, Task task);

struct ScoreRow {
  std::string participant;
  std::uint64_t seed = 0;
  std::string topic;
  std::string dimension;
  double score = 0.0;
};

/// Scores for a whole dataset. Cells that cannot be scored are listed in
/// `skipped` rather than aborting the whole analysis.
struct ScoredDataset {
  std::string model_id;
  Instrument instrument = Instrument::kPvq;
  bool persona_mode = true;
  std::vector<std::string> topics;
  std::vector<std::uint64_t> seeds;
  std::vector<ValueProfile> profiles;
  std::vector<BehaviorScore> behaviors;
  std::vector<std::string> skipped;

  std::vector<ScoreRow> rows() const;
};

ScoredDataset score_dataset(const ScoreDataset& dataset);

/// Tab-separated table with a header line: participant, seed, topic,
/// dimension, score.
std::string format_score_table(const std::vector<ScoreRow>& rows);

}  // namespace valstab
