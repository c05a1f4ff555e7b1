#include <filesystem>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "valstab/data_files.hpp"
#include "valstab/error.hpp"
#include "valstab/experiments.hpp"
#include "valstab/report_io.hpp"

using namespace valstab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

BackendConfig fixed(std::uint64_t seed = 7) {
  auto c = scripted_config(ScriptedPolicy::kFixedPerPersona, seed);
  c.name = "fixed-" + std::to_string(seed);
  c.model_id = c.name;
  return c;
}

Overrides small() {
  Overrides o;
  o.scale = Scale::kSmall;
  return o;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::path(::testing::TempDir()) / name;
  fs::remove_all(dir);
  return dir;
}

const json& first_entry(const json& report) { return report.at("models").at(0).at("entries").at(0); }

}  // namespace

TEST(Plan, Fig2aDefaults) {
  const auto p = plan("fig2a", {fixed()});
  ASSERT_EQ(p.runs.size(), 1u);
  const auto& s = p.runs[0].spec;
  EXPECT_EQ(s.population, Population::kFictionalCharacters);
  EXPECT_EQ(s.seeds.size(), 5u);
  EXPECT_EQ(s.topics.size(), 5u);
  EXPECT_EQ(s.n_messages, 3);
  EXPECT_EQ(p.answer_slots(), 60000u);
}

TEST(Plan, Fig7AndOverrides) {
  const auto p = plan("fig7", {fixed()});
  EXPECT_EQ(p.runs[0].spec.topics.size(), 14u);
  EXPECT_EQ(p.runs[0].spec.seeds.size(), 1u);
  Overrides o;
  o.seeds = std::vector<std::uint64_t>{1};
  EXPECT_EQ(plan("fig2b", {fixed()}, o).runs[0].spec.seeds, (std::vector<std::uint64_t>{1}));
  try {
    plan("fig99", {fixed()});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownRecipe);
  }
}

TEST(Plan, LengthSweepGrid) {
  const auto p = plan("fig4", {fixed()});
  EXPECT_TRUE(p.length_grid_approximate);
  EXPECT_EQ(p.length_grid, kDefaultLengthGrid);
  ASSERT_EQ(p.runs.size(), kDefaultLengthGrid.size());
  for (std::size_t i = 0; i < p.runs.size(); ++i) EXPECT_EQ(p.runs[i].spec.n_messages, kDefaultLengthGrid[i]);
  const auto fig5 = plan("fig5", {fixed()});
  EXPECT_EQ(fig5.runs.size(), 2 * kDefaultLengthGrid.size());
}

TEST(Plan, AblationArmsDifferOnlyInTemplateKind) {
  const auto p = plan("ablation", {fixed()});
  ASSERT_EQ(p.runs.size(), 2u);
  auto a = json(p.runs[0].spec), b = json(p.runs[1].spec);
  EXPECT_EQ(p.runs[0].spec.model.prompt_template.kind, TemplateKind::kTunedWithSystem);
  EXPECT_EQ(p.runs[1].spec.model.prompt_template.kind, TemplateKind::kTunedWithoutSystem);
  a["model"]["template"].erase("kind");
  b["model"]["template"].erase("kind");
  EXPECT_EQ(a, b);
}

TEST(Plan, JsonRoundTripAndOverrideKeys) {
  const auto p = plan("neutral_order", {fixed(), fixed(8)}, small());
  const json j = p;
  EXPECT_EQ(json(j.get<ExperimentPlan>()), j);
  EXPECT_THROW(json({{"bogus", 1}}).get<Overrides>(), std::exception);
}

TEST(Execute, FixedProfilesAreFullyStable) {
  const auto r = execute(plan("fig2a", {fixed()}, small()));
  const auto& e = first_entry(r.report);
  EXPECT_EQ(e.at("rank_order").at("mean").get<double>(), 1.0);
  EXPECT_EQ(e.at("ipsative").at("mean").get<double>(), 1.0);
  EXPECT_EQ(r.report.at("human_reference").size(), 2u);
  EXPECT_TRUE(r.missing.empty());
}

TEST(Execute, WarmCacheReproducesBundleWithoutCalls) {
  const auto dir = fresh_dir("valstab_exec_warm");
  const auto p = plan("fig2a", {fixed()}, small());
  const auto cold = execute(p, {dir, 2, false});
  EXPECT_GT(cold.backend_calls, 0u);
  const auto report = read_file(dir / "report.json");
  const auto dataset = read_file(dir / "runs" / (p.runs[0].label + ".jsonl"));
  EXPECT_THROW(execute(p, {dir, 1, false}), Error);  // refuses to overwrite
  const auto warm = execute(p, {dir, 1, true});
  EXPECT_EQ(warm.backend_calls, 0u);
  EXPECT_EQ(read_file(dir / "report.json"), report);
  EXPECT_EQ(read_file(dir / "runs" / (p.runs[0].label + ".jsonl")), dataset);
  const auto manifest = json::parse(read_file(dir / "manifest.json"));
  EXPECT_EQ(manifest.at("status"), "complete");
  EXPECT_EQ(manifest.at("answer_slots"), p.answer_slots());

  auto other = p;
  other.runs[0].spec.seeds = {1};
  EXPECT_THROW(execute(other, {dir, 1, true}), Error);  // resume needs the same plan
}

TEST(Execute, ReanalysisIsPure) {
  const auto dir = fresh_dir("valstab_exec_pure");
  const auto r = execute(plan("fig5", {scripted_config(ScriptedPolicy::kDriftAfterK)}, [] {
                           auto o = small();
                           o.length_grid = std::vector<int>{3, 13};
                           return o;
                         }()),
                         {dir, 1, false});
  const auto again = analyze_directory(dir);
  EXPECT_EQ(again.report, r.report);
  EXPECT_EQ(again.backend_calls, 0u);
}

TEST(Execute, ComparesModels) {
  auto o = small();
  o.seeds = std::vector<std::uint64_t>{1, 2, 3};
  const auto r = execute(plan("fig2a", {scripted_config(ScriptedPolicy::kUniformRandom, 1), fixed()}, o));
  const auto& comps = r.report.at("comparisons");
  ASSERT_FALSE(comps.empty());
  bool found = false;
  for (const auto& c : comps) {
    if (c.at("measure") == "rank_order") {
      found = true;
      EXPECT_EQ(c.at("cells"), 1);
      EXPECT_TRUE(c.at("significant")[0][1].get<bool>());
    }
  }
  EXPECT_TRUE(found);
}

TEST(Execute, AblationWithScriptedBackendGivesEqualArms) {
  const auto a = persona_induction_ablation(fixed(), small());
  EXPECT_EQ(a.at("system").at("mean"), a.at("user").at("mean"));
  EXPECT_TRUE(a.at("system").contains("se"));
  EXPECT_TRUE(a.at("user").contains("se"));
}

TEST(Execute, BehaviourAndNeutralRecipes) {
  const auto model = scripted_config(ScriptedPolicy::kDriftAfterK);
  auto o = small();
  o.length_grid = std::vector<int>{3, 23};
  for (const char* recipe : {"fig6", "donation", "stealing", "religion", "fig3", "neutral", "neutral_order"}) {
    SCOPED_TRACE(recipe);
    const auto r = execute(plan(recipe, {model}, o));
    const auto& e = first_entry(r.report);
    EXPECT_TRUE(e.at("errors").empty()) << e.at("errors").dump();
    const std::string rec = recipe;
    if (rec == "fig6") EXPECT_TRUE(e.contains("value_behavior"));
    if (rec == "neutral") {
      EXPECT_TRUE(e.contains("similarity_to_neutral"));
      EXPECT_EQ(e.at("neutral_profile").size(), kValueCount);
    }
    if (rec == "neutral_order") {
      EXPECT_TRUE(e.contains("ro_contexts"));
      EXPECT_TRUE(e.contains("ro_neutral"));
    }
    if (rec == "fig3") {
      EXPECT_FALSE(e.contains("rank_order"));
      EXPECT_TRUE(e.contains("ipsative"));
    }
    if (rec == "donation" || rec == "stealing" || rec == "religion") EXPECT_TRUE(e.contains("rank_order"));
  }
}

TEST(Export, TablesIncludeHumanReferenceAndScores) {
  const auto dir = fresh_dir("valstab_export");
  const auto r = execute(plan("fig2a", {fixed()}, small()), {dir, 1, false});
  const auto files = export_tables(r);
  bool stability = false, scores = false;
  for (const auto& f : files) {
    if (f.name == "stability.tsv") {
      stability = true;
      EXPECT_NE(f.content.find("ages 10-12"), std::string::npos);
      EXPECT_NE(f.content.find("0.57"), std::string::npos);
    }
    if (f.name == "scores.tsv") {
      scores = true;
      EXPECT_EQ(f.content.rfind("model\t", 0) == 0 || f.content.rfind("run\t", 0) == 0 ||
                    f.content.find("participant\tseed\ttopic\tdimension\tscore") != std::string::npos,
                true);
    }
  }
  EXPECT_TRUE(stability);
  EXPECT_TRUE(scores);
  const auto summary = format_summary(r.report);
  EXPECT_NE(summary.find("ages 20-28"), std::string::npos);
}
