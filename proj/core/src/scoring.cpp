#include "valstab/scoring.hpp"

#include <cstdio>
#include <map>

#include "valstab/error.hpp"

namespace valstab {

ValueProfile score_pvq(const std::vector<AnswerRecord>& records) {
  if (records.empty()) fail(ErrorCode::kInsufficientData, "no PVQ records to score");
  ValueProfile p;
  p.participant = records.front().cell.participant;
  p.context = records.front().cell.topic;
  p.seed = records.front().cell.seed;

  std::array<double, kValueCount> sums{};
  double total = 0.0;
  int answered = 0;
  for (const auto& r : records) {
    if (r.instrument != Instrument::kPvq) fail(ErrorCode::kInvalidArgument, "non-PVQ record in PVQ scoring");
    if (!r.answered()) continue;
    const auto v = static_cast<std::size_t>(value_from_code(r.group));
    sums[v] += r.chosen_code;
    ++p.answered[v];
    total += r.chosen_code;
    ++answered;
  }
  for (std::size_t v = 0; v < kValueCount; ++v) {
    if (p.answered[v] == 0) {
      fail(ErrorCode::kInsufficientData,
           "no answered item for " + std::string(to_string(all_values()[v])) + " in " + p.participant);
    }
  }
  const double mean = total / answered;
  for (std::size_t v = 0; v < kValueCount; ++v) p.scores[v] = sums[v] / p.answered[v] - mean;
  p.completeness = static_cast<double>(answered) / static_cast<double>(records.size());
  return p;
}

std::vector<BehaviorScore> score_downstream(const std::vector<AnswerRecord>& records, Task task) {
  if (records.empty()) fail(ErrorCode::kInsufficientData, "no downstream records to score");
  struct Acc {
    double sum = 0.0;
    int n = 0;
  };
  std::vector<std::string> order;  // groups in first-seen order
  std::map<std::string, Acc> groups;
  auto add = [&](const std::string& group, const AnswerRecord& r) {
    auto [it, inserted] = groups.try_emplace(group);
    if (inserted) order.push_back(group);
    if (r.answered()) {
      it->second.sum += r.chosen_score;
      ++it->second.n;
    }
  };
  for (const auto& r : records) {
    if (task_of(r.instrument) != task) fail(ErrorCode::kInvalidArgument, "record of another task in scoring");
    if (task == Task::kReligion) {
      add(std::string(kReligiosity), r);
      add("item:" + r.group, r);
    } else {
      add(r.group, r);
    }
  }
  std::vector<BehaviorScore> out;
  const auto& cell = records.front().cell;
  for (const auto& g : order) {
    const auto& acc = groups.at(g);
    if (acc.n == 0) fail(ErrorCode::kInsufficientData, "group '" + g + "' has no answered query");
    out.push_back({task, cell.participant, cell.topic, cell.seed, g, acc.sum / acc.n, acc.n});
  }
  return out;
}

std::vector<ScoreRow> ScoredDataset::rows() const {
  std::vector<ScoreRow> out;
  for (const auto& p : profiles) {
    for (std::size_t v = 0; v < kValueCount; ++v) {
      out.push_back({p.participant, p.seed, p.context, std::string(short_code(all_values()[v])), p.scores[v]});
    }
  }
  for (const auto& b : behaviors) out.push_back({b.participant, b.seed, b.context, b.group, b.value});
  return out;
}

ScoredDataset score_dataset(const ScoreDataset& dataset) {
  ScoredDataset s;
  s.model_id = dataset.model_id;
  s.instrument = dataset.instrument;
  s.persona_mode = dataset.persona_mode;
  s.topics = dataset.topics;
  s.seeds = dataset.seeds;
  for (const auto& m : dataset.missing) s.skipped.push_back(m.cell.label() + ": missing cell");
  const auto task = task_of(dataset.instrument);
  for (const auto& cell : dataset.cells) {
    try {
      if (task) {
        auto scores = score_downstream(cell.answers, *task);
        s.behaviors.insert(s.behaviors.end(), scores.begin(), scores.end());
      } else {
        s.profiles.push_back(score_pvq(cell.answers));
      }
    } catch (const Error& e) {
      s.skipped.push_back(cell.cell.label() + ": " + e.what());
    }
  }
  return s;
}

std::string format_score_table(const std::vector<ScoreRow>& rows) {
  std::string out = "participant\tseed\ttopic\tdimension\tscore\n";
  char number[64];
  for (const auto& r : rows) {
    std::snprintf(number, sizeof number, "%.17g", r.score);
    out += r.participant + "\t" + std::to_string(r.seed) + "\t" + r.topic + "\t" + r.dimension + "\t" + number + "\n";
  }
  return out;
}

}  // namespace valstab
