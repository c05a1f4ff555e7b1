#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace valstab {

enum class Population { kFictionalCharacters, kRealWorldPersonas };
enum class Gender { kMale, kFemale };

/// Schwartz's ten basic personal values, in the circumplex order used for
/// reporting.
enum class Value {
  kSelfDirection,
  kStimulation,
  kHedonism,
  kAchievement,
  kPower,
  kSecurity,
  kConformity,
  kTradition,
  kBenevolence,
  kUniversalism,
};
inline constexpr std::size_t kValueCount = 10;

const std::array<Value, kValueCount>& all_values();
std::string_view to_string(Value value);   // "Self-Direction"
std::string_view short_code(Value value);  // "SD"
Value value_from_code(std::string_view code);

std::string_view to_string(Population population);  // "fictional" / "real_world"
Population population_from_string(std::string_view text);
std::string_view to_string(Gender gender);
Gender gender_from_string(std::string_view text);

struct Persona {
  std::string name;
  Population population = Population::kFictionalCharacters;
  Gender gender = Gender::kMale;
  std::string instruction;

  bool operator==(const Persona&) const = default;
};

enum class ScaleKind { kLikert6, kLikert5 };

struct AnswerScale {
  std::vector<std::string> labels;  // canonical order, lowest code first
  std::vector<int> codes;

  static AnswerScale pvq(ScaleKind kind = ScaleKind::kLikert6);
  std::size_t size() const { return labels.size(); }
  void validate() const;
};

struct QuestionnaireItem {
  int index = 0;  // 1..40
  std::string text_male;
  std::string text_female;
  Value value = Value::kSelfDirection;

  const std::string& text(Gender gender) const {
    return gender == Gender::kMale ? text_male : text_female;
  }
};

struct Topic {
  std::string id;
  std::string opener;
  bool canonical = false;  // one of the five default contexts

  bool operator==(const Topic&) const = default;
};

/// Pseudo-topic with no opener: the questionnaire is given straight away.
inline Topic no_context_topic() { return Topic{"none", "", false}; }

enum class Role { kTestedModel, kInterlocutor, kSystem };
std::string_view to_string(Role role);

struct Message {
  Role role = Role::kInterlocutor;
  std::string text;

  bool operator==(const Message&) const = default;
};

/// One simulated conversation. messages[0] is the interlocutor's opener and
/// the remaining n_exchanged messages alternate tested/interlocutor.
struct Transcript {
  std::optional<Persona> persona;
  Topic topic;
  std::uint64_t seed = 0;
  std::vector<Message> messages;
  int n_exchanged = 0;

  void validate() const;
  bool operator==(const Transcript&) const = default;
};

enum class Task { kDonation, kStealing, kReligion };
std::string_view to_string(Task task);
Task task_from_string(std::string_view text);

struct DownstreamQuery {
  Task task = Task::kDonation;
  int index = 0;  // 1-based within the bank
  std::string text;
  std::vector<std::pair<char, std::string>> option_labels;
  std::map<char, double> option_scores;
  std::string group;  // race for Donation/Stealing, item name for Religion
};

/// Numeric meaning of the Stealing and Religion answers. Both tasks use
/// ordinal scales; these can be overridden from the run configuration.
struct DownstreamScoring {
  // take all, bartender minus some, bartender intact, <1 month, <1 week, <1 day
  std::array<double, 6> stealing{0, 1, 2, 3, 4, 5};
  // none, per year, per month, per week, per day
  std::array<double, 5> religion{0, 1, 2, 3, 4};
};

enum class Instrument { kPvq, kDonation, kStealing, kReligion };
std::string_view to_string(Instrument instrument);
Instrument instrument_from_string(std::string_view text);
std::optional<Task> task_of(Instrument instrument);

/// A multiple-choice query ready for administration. Options are held in
/// canonical order: canonical letter 'A' is options[0].
struct Question {
  Instrument instrument = Instrument::kPvq;
  int index = 0;
  std::string stem;
  std::vector<std::string> options;
  std::vector<double> scores;  // PVQ code or task score per canonical option
  std::string group;           // value short code, race, or religion item
};

Question to_question(const DownstreamQuery& query);

/// The bundled data: personas, PVQ-40 items, topics, and downstream name
/// lists. Loaded from the embedded copies by default or from a directory
/// holding files with the same names and schema (see docs/data_format.md).
class DomainData {
 public:
  static const DomainData& embedded();
  static DomainData load_directory(const std::filesystem::path& dir);

  std::vector<Persona> population(Population kind) const;
  const std::vector<QuestionnaireItem>& pvq_bank() const { return items_; }
  std::vector<Question> pvq_items(Gender gender, ScaleKind scale = ScaleKind::kLikert6) const;
  const std::vector<Topic>& topics() const { return topics_; }
  std::vector<Topic> canonical_topics() const;
  const Topic& topic(std::string_view id) const;
  std::vector<DownstreamQuery> downstream_bank(Task task,
                                               const DownstreamScoring& scoring = {}) const;

  struct NameEntry {
    std::string race;
    Gender gender;
    std::string name;
  };
  const std::vector<NameEntry>& names() const { return names_; }
  const std::vector<std::string>& religion_items() const { return religion_items_; }

 private:
  std::vector<Persona> personas_;
  std::vector<QuestionnaireItem> items_;
  std::vector<Topic> topics_;
  std::vector<NameEntry> names_;
  std::vector<std::string> religion_items_;

  friend DomainData parse_domain_data(std::string_view, std::string_view, std::string_view,
                                      std::string_view, std::string_view);
};

DomainData parse_domain_data(std::string_view personas_jsonl, std::string_view pvq_jsonl,
                             std::string_view topics_jsonl, std::string_view names_jsonl,
                             std::string_view religion_jsonl);

// Convenience wrappers over DomainData::embedded().
std::vector<Persona> population(Population kind);
std::vector<Question> pvq_items(Gender gender, ScaleKind scale = ScaleKind::kLikert6);
std::vector<DownstreamQuery> downstream_bank(Task task, const DownstreamScoring& scoring = {});

/// Races in the order the downstream name file lists them.
std::vector<std::string> downstream_races();

}  // namespace valstab
