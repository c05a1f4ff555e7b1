#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "valstab/backend.hpp"
#include "valstab/correlation.hpp"
#include "valstab/simulation.hpp"
#include "valstab/stats.hpp"

namespace valstab {

enum class Scale { kFull, kSmall };

/// Names of the built-in recipes, in display order.
const std::vector<std::string>& recipe_names();
std::string recipe_description(std::string_view recipe);

/// Conversation lengths of the length sweeps. The exact points behind the
/// published curves are not listed anywhere, so this grid is approximate.
inline const std::vector<int> kDefaultLengthGrid{3, 8, 13, 18, 23, 28, 33, 38, 43};

/// Recipe parameters that can be changed from the command line. Unset
/// fields keep the recipe's own choice.
struct Overrides {
  Scale scale = Scale::kFull;
  std::optional<Population> population;
  std::optional<std::vector<std::string>> topics;  // topic ids
  std::optional<int> n_messages;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<int> permutations;
  std::optional<Instrument> instrument;
  std::optional<std::vector<int>> length_grid;
  std::optional<std::size_t> max_personas;
  std::optional<ScaleKind> answer_scale;
  std::optional<OrderMode> order_mode;
  std::optional<Estimator> estimator;
  std::optional<TTestVariant> t_test;
  std::optional<double> alpha;
};

void to_json(nlohmann::json& j, const Overrides& o);
void from_json(const nlohmann::json& j, Overrides& o);

/// One simulation run of a plan. `arm` separates the conditions a recipe
/// compares (e.g. "persona" and "no_persona"); `length` is the sweep point.
struct PlannedRun {
  std::string label;  // unique within the plan; also the dataset file stem
  std::string model;  // BackendConfig::name
  std::string role;   // "main", "behavior", "neutral"
  std::string arm;
  int length = 0;
  RunSpec spec;
};

struct ExperimentPlan {
  std::string recipe;
  std::string description;
  Scale scale = Scale::kFull;
  Estimator estimator = Estimator::kSpearman;
  TTestVariant t_test = TTestVariant::kStudent;
  double alpha = 0.05;
  std::vector<int> length_grid;  // empty for recipes without a sweep
  bool length_grid_approximate = false;
  std::vector<std::string> models;
  std::vector<PlannedRun> runs;

  std::size_t answer_slots() const;
};

void to_json(nlohmann::json& j, const ExperimentPlan& plan);
void from_json(const nlohmann::json& j, ExperimentPlan& plan);

/// Resolves a recipe for one or more models. Throws UnknownRecipe.
ExperimentPlan plan(std::string_view recipe, const std::vector<BackendConfig>& models,
                    const Overrides& overrides = {}, const DomainData& data = DomainData::embedded());

struct ExecuteOptions {
  std::filesystem::path out_dir;  // empty: nothing is written, the cache lives in memory
  int workers = 1;
  bool resume = false;
};

struct ExperimentResult {
  ExperimentPlan plan;
  std::vector<ScoreDataset> datasets;  // parallel to plan.runs
  nlohmann::json report;
  std::uint64_t backend_calls = 0;
  std::vector<std::string> missing;  // labels of cells that failed
};

/// Runs every spec of the plan (cache-aware), analyses the datasets and,
/// when an output directory is given, writes the manifest, datasets, score
/// tables, report and summary.
ExperimentResult execute(const ExperimentPlan& plan, const ExecuteOptions& options = {});

/// Recomputes the report from the datasets alone. Pure: equal datasets give
/// an equal report.
nlohmann::json analyze(const ExperimentPlan& plan, const std::vector<ScoreDataset>& datasets);

/// Re-analyses a finished output directory without any backend call and
/// rewrites its report and summary.
ExperimentResult analyze_directory(const std::filesystem::path& dir);

/// Rank-order stability of one model with the persona instruction given in
/// the system slot versus as a user message, everything else held fixed.
nlohmann::json persona_induction_ablation(const BackendConfig& model, const Overrides& overrides = {},
                                          const ExecuteOptions& options = {});

}  // namespace valstab
