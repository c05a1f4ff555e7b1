#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "valstab/backend.hpp"
#include "valstab/cache.hpp"
#include "valstab/domain.hpp"

namespace valstab {

/// Whether answer options are reshuffled for every item or once per
/// questionnaire administration.
enum class OrderMode { kPerItem, kPerAdministration };

struct RunSpec {
  BackendConfig model;
  std::optional<Population> population;  // nullopt: no-persona mode
  std::vector<Topic> topics;
  int n_messages = 3;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  int permutations = 50;  // no-persona mode only
  Instrument instrument = Instrument::kPvq;
  std::size_t max_personas = 0;  // 0: the whole population
  ScaleKind scale = ScaleKind::kLikert6;
  OrderMode order_mode = OrderMode::kPerItem;
  DownstreamScoring scoring;

  bool persona_mode() const { return population.has_value(); }
  void validate() const;
};

void to_json(nlohmann::json& j, const RunSpec& spec);
void from_json(const nlohmann::json& j, RunSpec& spec);

/// A simulated participant: a persona, or one answer-order permutation in
/// no-persona mode.
struct Participant {
  std::string id;
  std::optional<Persona> persona;
  Gender gender = Gender::kMale;
};

std::vector<Participant> participants(const RunSpec& spec, const DomainData& data = DomainData::embedded());

struct CellId {
  std::string model_id;
  std::uint64_t seed = 0;  // run seed, or the permutation index in no-persona mode
  std::string topic;
  std::string participant;

  std::string label() const;
  auto operator<=>(const CellId&) const = default;
};

struct AnswerRecord {
  CellId cell;
  Instrument instrument = Instrument::kPvq;
  int item = 0;
  std::string group;
  std::string presented_order;  // canonical letter shown at each position
  std::optional<char> chosen_letter;
  int chosen_code = 0;  // PVQ scale code, or canonical option number for tasks
  double chosen_score = 0.0;
  std::optional<TokenDistribution> raw_distribution;
  std::string reply;  // text fallback output, when used
  std::string error;  // non-empty when the answer could not be extracted

  bool answered() const { return chosen_letter.has_value(); }
  /// Canonical letter of the chosen option.
  char canonical_letter() const;
  bool operator==(const AnswerRecord&) const = default;
};

void to_json(nlohmann::json& j, const AnswerRecord& r);
void from_json(const nlohmann::json& j, AnswerRecord& r);
void to_json(nlohmann::json& j, const Transcript& t);
void from_json(const nlohmann::json& j, Transcript& t);

struct CellResult {
  CellId cell;
  Gender gender = Gender::kMale;
  std::vector<AnswerRecord> answers;
};

struct MissingCell {
  CellId cell;
  std::string error;
};

/// All answer records of one run, in canonical (seed, topic, participant,
/// item) order regardless of execution order.
struct ScoreDataset {
  std::string model_id;
  Instrument instrument = Instrument::kPvq;
  bool persona_mode = true;
  int n_messages = 0;
  std::vector<std::string> topics;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> participants;
  std::vector<CellResult> cells;
  std::vector<MissingCell> missing;

  std::size_t record_count() const;
  bool complete() const { return missing.empty(); }
};

std::string serialize_dataset(const ScoreDataset& dataset);
ScoreDataset parse_dataset(std::string_view text);

struct RunOptions {
  int workers = 1;
};

/// Number of answer records a run produces, computed without any backend call.
std::size_t count_answer_slots(const RunSpec& spec, const DomainData& data = DomainData::embedded());

/// Drives the administration procedure for one RunSpec against one backend.
/// Every cell is content-addressed in the cache; cached cells cost no calls.
class Simulator {
 public:
  Simulator(RunSpec spec, std::shared_ptr<Backend> backend, Cache& cache,
            const DomainData& data = DomainData::embedded());

  Transcript simulate_conversation(const Participant& participant, const Topic& topic,
                                   std::uint64_t seed);
  std::vector<AnswerRecord> administer(const CellId& cell, const Participant& participant,
                                       const Transcript& transcript,
                                       const std::vector<Question>& questions);
  ScoreDataset run(const RunOptions& options = {});

  std::vector<Question> questions_for(const Participant& participant) const;
  /// Presented order for one item; topic-independent so that a participant
  /// sees the same option order in every context.
  std::string presented_order(const Participant& participant, std::uint64_t seed, const Question& q) const;

  const RunSpec& spec() const { return spec_; }

 private:
  std::string transcript_key(const Participant& participant, const Topic& topic, std::uint64_t seed) const;

  RunSpec spec_;
  std::shared_ptr<Backend> backend_;
  Cache& cache_;
  const DomainData& data_;
};

}  // namespace valstab
