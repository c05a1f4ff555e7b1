#include <algorithm>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "valstab/domain.hpp"
#include "valstab/error.hpp"
#include "valstab/rng.hpp"

using namespace valstab;

TEST(Population, RosterSizes) {
  const auto fictional = population(Population::kFictionalCharacters);
  const auto real = population(Population::kRealWorldPersonas);
  ASSERT_EQ(fictional.size(), 60u);
  ASSERT_EQ(real.size(), 50u);
  EXPECT_EQ(fictional.front().name, "Gandalf");
  EXPECT_TRUE(std::any_of(real.begin(), real.end(), [](const Persona& p) { return p.name == "Marilyn Monroe"; }));
  EXPECT_EQ(population(Population::kFictionalCharacters), fictional);
}

TEST(Population, InstructionsNameThePersona) {
  std::set<std::string> names;
  for (auto kind : {Population::kFictionalCharacters, Population::kRealWorldPersonas}) {
    for (const auto& p : population(kind)) {
      EXPECT_FALSE(p.instruction.empty());
      EXPECT_NE(p.instruction.find(p.name), std::string::npos) << p.name;
      EXPECT_TRUE(names.insert(p.name).second) << "duplicate " << p.name;
    }
  }
}

TEST(Pvq, FortyItemsPartitionedByValue) {
  const auto male = pvq_items(Gender::kMale);
  const auto female = pvq_items(Gender::kFemale);
  ASSERT_EQ(male.size(), 40u);
  ASSERT_EQ(female.size(), 40u);
  std::map<std::string, int> per_value;
  std::set<int> indices;
  for (std::size_t i = 0; i < male.size(); ++i) {
    EXPECT_EQ(male[i].index, female[i].index);
    EXPECT_EQ(male[i].group, female[i].group);
    EXPECT_NE(male[i].stem, female[i].stem);
    ++per_value[male[i].group];
    indices.insert(male[i].index);
  }
  EXPECT_EQ(per_value.size(), kValueCount);
  for (const auto& [v, n] : per_value) EXPECT_GE(n, 3) << v;
  EXPECT_EQ(*indices.begin(), 1);
  EXPECT_EQ(*indices.rbegin(), 40);
  EXPECT_EQ(indices.size(), 40u);
}

TEST(Pvq, ScaleCodes) {
  for (auto kind : {ScaleKind::kLikert6, ScaleKind::kLikert5}) {
    const auto s = AnswerScale::pvq(kind);
    EXPECT_EQ(s.labels.size(), s.codes.size());
    EXPECT_EQ(s.size(), kind == ScaleKind::kLikert6 ? 6u : 5u);
    EXPECT_EQ(s.codes.front(), 1);
    EXPECT_TRUE(std::is_sorted(s.codes.begin(), s.codes.end()));
    EXPECT_NO_THROW(s.validate());
  }
  const auto items = pvq_items(Gender::kMale, ScaleKind::kLikert5);
  EXPECT_EQ(items.front().options.size(), 5u);
}

TEST(Topics, CanonicalOpeners) {
  const auto canon = DomainData::embedded().canonical_topics();
  ASSERT_EQ(canon.size(), 5u);
  EXPECT_EQ(DomainData::embedded().topic("joke").opener, "Tell me a joke.");
  EXPECT_EQ(DomainData::embedded().topics().size(), 14u);
  EXPECT_THROW(DomainData::embedded().topic("nope"), Error);
}

TEST(Downstream, BankSizesAndScores) {
  const auto donation = downstream_bank(Task::kDonation);
  const auto stealing = downstream_bank(Task::kStealing);
  const auto religion = downstream_bank(Task::kReligion);
  EXPECT_EQ(donation.size(), 100u);
  EXPECT_EQ(stealing.size(), 100u);
  EXPECT_EQ(religion.size(), 5u);
  const std::map<char, double> coins{{'A', 2}, {'B', 4}, {'C', 8}, {'D', 6}, {'E', 0}, {'F', 10}};
  EXPECT_EQ(donation.front().option_scores, coins);
  for (const auto& q : religion) {
    for (const auto& [letter, label] : q.option_labels) {
      if (label == "None") EXPECT_EQ(q.option_scores.at(letter), 0.0);
    }
  }
  std::map<std::string, int> per_race;
  for (const auto& q : donation) ++per_race[q.group];
  EXPECT_EQ(per_race.size(), 5u);
  for (const auto& [race, n] : per_race) EXPECT_EQ(n, 20) << race;
  EXPECT_EQ(downstream_races().size(), 5u);
}

TEST(Downstream, StealingScaleIsConfigurable) {
  DownstreamScoring s;
  s.stealing = {0, 10, 20, 30, 40, 50};
  const auto bank = downstream_bank(Task::kStealing, s);
  std::set<double> seen;
  for (const auto& [l, v] : bank.front().option_scores) seen.insert(v);
  EXPECT_EQ(seen, (std::set<double>{0, 10, 20, 30, 40, 50}));
}

TEST(Transcript, ValidatesOpenerAndAlternation) {
  Transcript t;
  t.topic = DomainData::embedded().topic("joke");
  t.messages = {{Role::kInterlocutor, "Tell me a joke."}, {Role::kTestedModel, "Why?"},
                {Role::kInterlocutor, "Because."}};
  t.n_exchanged = 2;
  EXPECT_NO_THROW(t.validate());
  t.messages[2].role = Role::kTestedModel;
  EXPECT_THROW(t.validate(), Error);
  t.messages[0].text = "Hello";
  EXPECT_THROW(t.validate(), Error);

  Transcript empty;
  empty.topic = no_context_topic();
  EXPECT_NO_THROW(empty.validate());
}

TEST(Rng, DerivedSeedsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(1, "a"), derive_seed(1, "a"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(2, "a"));
  Rng r(derive_seed(5, "x"));
  std::vector<int> v{1, 2, 3, 4, 5, 6};
  r.shuffle(v);
  std::sort(v.begin(), v.end());
  EXPECT_EQ(v, (std::vector<int>{1, 2, 3, 4, 5, 6}));
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(r.below(7), 7u);
  }
}
