#include "valstab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "valstab/cache.hpp"
#include "valstab/data_files.hpp"
#include "valstab/error.hpp"
#include "valstab/report_io.hpp"
#include "valstab/scoring.hpp"
#include "valstab/stability.hpp"

namespace valstab {

namespace {

constexpr int kManifestVersion = 1;

struct Recipe {
  std::string_view name;
  std::string_view description;
};

constexpr std::array<Recipe, 13> kRecipes{{
    {"fig2a", "Rank-order stability of simulated fictional characters"},
    {"fig2b", "Rank-order stability of simulated real-world personas"},
    {"fig3", "Ipsative stability without persona instructions"},
    {"fig4", "Rank-order stability of fictional characters over conversation length"},
    {"fig5", "Ipsative stability over conversation length, with and without personas"},
    {"fig6", "Correlation of value expression with Donation behaviour"},
    {"fig7", "Pairwise rank-order stability over fourteen contexts"},
    {"donation", "Rank-order stability of donated coins per race"},
    {"stealing", "Rank-order stability of the tendency to return a found bag per race"},
    {"religion", "Rank-order stability of time devoted to religion"},
    {"neutral", "Similarity of simulated profiles to the neutral value profile over conversation length"},
    {"neutral_order", "Participant-order stability between contexts and to the neutral order"},
    {"ablation", "Persona induction through the system slot versus a user message"},
}};

bool is_sweep(std::string_view r) {
  return r == "fig4" || r == "fig5" || r == "neutral" || r == "neutral_order";
}

std::string sanitize(std::string s) {
  for (auto& c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    if (!ok) c = '_';
  }
  return s;
}

std::string scale_name(Scale s) { return s == Scale::kFull ? "full" : "small"; }

Scale scale_from(std::string_view s) {
  if (s == "full") return Scale::kFull;
  if (s == "small") return Scale::kSmall;
  fail(ErrorCode::kInvalidArgument, "unknown scale '" + std::string(s) + "' (full|small)");
}

std::string variant_name(TTestVariant v) { return v == TTestVariant::kStudent ? "student" : "welch"; }

TTestVariant variant_from(std::string_view s) {
  if (s == "student") return TTestVariant::kStudent;
  if (s == "welch") return TTestVariant::kWelch;
  fail(ErrorCode::kInvalidArgument, "unknown t-test variant '" + std::string(s) + "'");
}

Topic resolve_topic(const DomainData& data, const std::string& id) {
  if (id == "none") return no_context_topic();
  return data.topic(id);
}

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

nlohmann::json mean_se_json(const MeanSe& s) { return {{"mean", num(s.mean)}, {"se", num(s.se)}, {"n", s.n}}; }

}  // namespace

const std::vector<std::string>& recipe_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& r : kRecipes) out.emplace_back(r.name);
    return out;
  }();
  return names;
}

std::string recipe_description(std::string_view recipe) {
  for (const auto& r : kRecipes) {
    if (r.name == recipe) return std::string(r.description);
  }
  fail(ErrorCode::kUnknownRecipe, "unknown recipe '" + std::string(recipe) + "'");
}

void to_json(nlohmann::json& j, const Overrides& o) {
  j = nlohmann::json{{"scale", scale_name(o.scale)}};
  if (o.population) j["population"] = to_string(*o.population);
  if (o.topics) j["topics"] = *o.topics;
  if (o.n_messages) j["n_messages"] = *o.n_messages;
  if (o.seeds) j["seeds"] = *o.seeds;
  if (o.permutations) j["permutations"] = *o.permutations;
  if (o.instrument) j["instrument"] = to_string(*o.instrument);
  if (o.length_grid) j["length_grid"] = *o.length_grid;
  if (o.max_personas) j["max_personas"] = *o.max_personas;
  if (o.answer_scale) j["answer_scale"] = *o.answer_scale == ScaleKind::kLikert6 ? "likert6" : "likert5";
  if (o.order_mode) j["order_mode"] = *o.order_mode == OrderMode::kPerItem ? "per_item" : "per_administration";
  if (o.estimator) j["estimator"] = to_string(*o.estimator);
  if (o.t_test) j["t_test"] = variant_name(*o.t_test);
  if (o.alpha) j["alpha"] = *o.alpha;
}

void from_json(const nlohmann::json& j, Overrides& o) {
  o = Overrides{};
  for (const auto& [key, value] : j.items()) {
    if (key == "scale") {
      o.scale = scale_from(value.get<std::string>());
    } else if (key == "population") {
      o.population = population_from_string(value.get<std::string>());
    } else if (key == "topics") {
      o.topics = value.get<std::vector<std::string>>();
    } else if (key == "n_messages") {
      o.n_messages = value.get<int>();
    } else if (key == "seeds") {
      o.seeds = value.get<std::vector<std::uint64_t>>();
    } else if (key == "permutations") {
      o.permutations = value.get<int>();
    } else if (key == "instrument") {
      o.instrument = instrument_from_string(value.get<std::string>());
    } else if (key == "length_grid") {
      o.length_grid = value.get<std::vector<int>>();
    } else if (key == "max_personas") {
      o.max_personas = value.get<std::size_t>();
    } else if (key == "answer_scale") {
      const auto s = value.get<std::string>();
      if (s != "likert6" && s != "likert5") fail(ErrorCode::kInvalidArgument, "answer_scale is likert6 or likert5");
      o.answer_scale = s == "likert6" ? ScaleKind::kLikert6 : ScaleKind::kLikert5;
    } else if (key == "order_mode") {
      const auto s = value.get<std::string>();
      if (s != "per_item" && s != "per_administration") {
        fail(ErrorCode::kInvalidArgument, "order_mode is per_item or per_administration");
      }
      o.order_mode = s == "per_item" ? OrderMode::kPerItem : OrderMode::kPerAdministration;
    } else if (key == "estimator") {
      o.estimator = estimator_from_string(value.get<std::string>());
    } else if (key == "t_test") {
      o.t_test = variant_from(value.get<std::string>());
    } else if (key == "alpha") {
      o.alpha = value.get<double>();
    } else {
      fail(ErrorCode::kInvalidArgument, "unknown override '" + key + "'");
    }
  }
}

std::size_t ExperimentPlan::answer_slots() const {
  std::size_t n = 0;
  for (const auto& r : runs) n += count_answer_slots(r.spec);
  return n;
}

void to_json(nlohmann::json& j, const ExperimentPlan& p) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : p.runs) {
    runs.push_back({{"label", r.label},
                    {"model", r.model},
                    {"role", r.role},
                    {"arm", r.arm},
                    {"length", r.length},
                    {"spec", r.spec}});
  }
  j = nlohmann::json{{"recipe", p.recipe},
                     {"description", p.description},
                     {"scale", scale_name(p.scale)},
                     {"estimator", to_string(p.estimator)},
                     {"t_test", variant_name(p.t_test)},
                     {"alpha", p.alpha},
                     {"length_grid", p.length_grid},
                     {"length_grid_approximate", p.length_grid_approximate},
                     {"models", p.models},
                     {"runs", runs}};
}

void from_json(const nlohmann::json& j, ExperimentPlan& p) {
  p = ExperimentPlan{};
  p.recipe = j.at("recipe").get<std::string>();
  p.description = j.value("description", std::string());
  p.scale = scale_from(j.value("scale", std::string("full")));
  p.estimator = estimator_from_string(j.value("estimator", std::string("spearman")));
  p.t_test = variant_from(j.value("t_test", std::string("student")));
  p.alpha = j.value("alpha", 0.05);
  p.length_grid = j.value("length_grid", std::vector<int>{});
  p.length_grid_approximate = j.value("length_grid_approximate", false);
  p.models = j.at("models").get<std::vector<std::string>>();
  for (const auto& r : j.at("runs")) {
    p.runs.push_back({r.at("label").get<std::string>(), r.at("model").get<std::string>(),
                      r.at("role").get<std::string>(), r.at("arm").get<std::string>(), r.at("length").get<int>(),
                      r.at("spec").get<RunSpec>()});
  }
}

ExperimentPlan plan(std::string_view recipe, const std::vector<BackendConfig>& models, const Overrides& o,
                    const DomainData& data) {
  ExperimentPlan p;
  p.recipe = std::string(recipe);
  p.description = recipe_description(recipe);
  p.scale = o.scale;
  p.estimator = o.estimator.value_or(Estimator::kSpearman);
  p.t_test = o.t_test.value_or(TTestVariant::kStudent);
  p.alpha = o.alpha.value_or(0.05);
  if (models.empty()) fail(ErrorCode::kInvalidArgument, "a plan needs at least one model");
  std::set<std::string> names;
  for (const auto& m : models) {
    m.validate();
    if (!names.insert(m.name).second) fail(ErrorCode::kInvalidArgument, "duplicate model name '" + m.name + "'");
    p.models.push_back(m.name);
  }
  const bool small = o.scale == Scale::kSmall;
  if (is_sweep(recipe)) {
    p.length_grid = o.length_grid.value_or(kDefaultLengthGrid);
    p.length_grid_approximate = !o.length_grid.has_value();
    if (p.length_grid.empty()) fail(ErrorCode::kInvalidArgument, "length grid is empty");
  }

  // Contexts: the canonical five, all fourteen for the context matrix.
  std::vector<Topic> topics;
  if (o.topics) {
    for (const auto& id : *o.topics) topics.push_back(resolve_topic(data, id));
  } else {
    topics = recipe == "fig7" ? data.topics() : data.canonical_topics();
    if (small) topics.resize(std::min<std::size_t>(topics.size(), recipe == "fig7" ? 4 : 2));
  }
  std::vector<std::uint64_t> seeds = o.seeds.value_or(recipe == "fig7" ? std::vector<std::uint64_t>{1}
                                                                       : std::vector<std::uint64_t>{1, 2, 3, 4, 5});
  if (small && !o.seeds && seeds.size() > 2) seeds.resize(2);
  const int permutations = o.permutations.value_or(small ? 8 : 50);
  const std::size_t max_personas = o.max_personas.value_or(small ? 8 : 0);

  auto base = [&](const BackendConfig& model, std::optional<Population> population) {
    RunSpec s;
    s.model = model;
    s.population = population;
    s.topics = topics;
    s.n_messages = o.n_messages.value_or(3);
    s.seeds = seeds;
    s.permutations = permutations;
    s.max_personas = max_personas;
    s.scale = o.answer_scale.value_or(ScaleKind::kLikert6);
    s.order_mode = o.order_mode.value_or(OrderMode::kPerItem);
    return s;
  };
  auto persona_pop = [&](Population fallback) { return o.population.value_or(fallback); };

  for (const auto& model : models) {
    auto add = [&](std::string role, std::string arm, int length, RunSpec spec) {
      spec.validate();
      std::string label = sanitize(model.name) + "." + role + "." + arm;
      if (length >= 0) label += ".n" + std::to_string(length);
      p.runs.push_back({label, model.name, std::move(role), std::move(arm), spec.n_messages, std::move(spec)});
    };
    auto main_spec = [&](std::optional<Population> population, Instrument instrument) {
      auto s = base(model, population);
      s.instrument = o.instrument.value_or(instrument);
      return s;
    };
    auto neutral_spec = [&](std::optional<Population> population) {
      auto s = base(model, population);
      s.topics = {no_context_topic()};
      s.n_messages = 0;
      return s;
    };

    if (recipe == "fig2a" || recipe == "fig7") {
      add("main", "persona", -1, main_spec(persona_pop(Population::kFictionalCharacters), Instrument::kPvq));
    } else if (recipe == "fig2b") {
      add("main", "persona", -1, main_spec(persona_pop(Population::kRealWorldPersonas), Instrument::kPvq));
    } else if (recipe == "fig3") {
      add("main", "no_persona", -1, main_spec(std::nullopt, Instrument::kPvq));
    } else if (recipe == "donation" || recipe == "stealing") {
      add("main", "persona", -1,
          main_spec(persona_pop(Population::kFictionalCharacters), instrument_from_string(recipe)));
    } else if (recipe == "religion") {
      add("main", "persona", -1, main_spec(persona_pop(Population::kRealWorldPersonas), Instrument::kReligion));
    } else if (recipe == "fig6") {
      add("main", "persona", -1, main_spec(persona_pop(Population::kFictionalCharacters), Instrument::kPvq));
      auto behavior = base(model, persona_pop(Population::kFictionalCharacters));
      behavior.instrument = Instrument::kDonation;
      add("behavior", "persona", -1, std::move(behavior));
    } else if (recipe == "ablation") {
      for (auto [arm, kind] : {std::pair{"system", TemplateKind::kTunedWithSystem},
                               std::pair{"user", TemplateKind::kTunedWithoutSystem}}) {
        auto s = main_spec(persona_pop(Population::kFictionalCharacters), Instrument::kPvq);
        s.model.prompt_template.kind = kind;
        add("main", arm, -1, std::move(s));
      }
    } else if (is_sweep(recipe)) {
      for (int n : p.length_grid) {
        auto s = main_spec(persona_pop(Population::kFictionalCharacters), Instrument::kPvq);
        s.n_messages = n;
        add("main", "persona", n, std::move(s));
        if (recipe == "fig5") {
          auto np = main_spec(std::nullopt, Instrument::kPvq);
          np.n_messages = n;
          add("main", "no_persona", n, std::move(np));
        }
      }
      if (recipe == "neutral") add("neutral", "no_persona", -1, neutral_spec(std::nullopt));
      if (recipe == "neutral_order") {
        add("neutral", "persona", -1, neutral_spec(persona_pop(Population::kFictionalCharacters)));
      }
    } else {
      fail(ErrorCode::kUnknownRecipe, "unknown recipe '" + std::string(recipe) + "'");
    }
  }
  return p;
}

namespace {

struct SeedSeries {
  std::vector<double> values;
  std::vector<std::string> errors;
};

// Stability entry for one run: rank-order and ipsative, per seed in persona
// mode and over permutations otherwise.
nlohmann::json stability_entry(const PlannedRun& run, const ScoredDataset& scored, const ExperimentPlan& plan,
                               nlohmann::json& samples) {
  nlohmann::json e{{"label", run.label},
                   {"arm", run.arm},
                   {"length", run.length},
                   {"instrument", to_string(run.spec.instrument)},
                   {"persona_mode", scored.persona_mode},
                   {"contexts", scored.topics},
                   {"skipped_cells", scored.skipped.size()}};
  const bool pvq = scored.instrument == Instrument::kPvq;
  nlohmann::json errors = nlohmann::json::array();

  if (!scored.persona_mode) {
    const auto matrices = score_matrices(scored, std::nullopt);
    e["participants"] = matrices.empty() ? 0 : matrices.front().participants.size();
    if (matrices.size() >= 2) {
      try {
        const auto ips = ipsative_population(matrices, plan.estimator);
        std::vector<double> per;
        for (const auto& r : ips.per_participant) {
          if (r) per.push_back(*r);
        }
        e["ipsative"] = {{"mean", ips.mean}, {"se", ips.se}, {"n", per.size()}, {"undefined", ips.undefined},
                         {"per_participant", per}, {"se_over", "participants"}};
        samples["ipsative"] = per;
      } catch (const Error& err) {
        errors.push_back(err.what());
      }
    }
    e["errors"] = errors;
    return e;
  }

  SeedSeries ro, ips;
  std::vector<std::vector<std::optional<double>>> per_dim;
  std::vector<std::string> dims;
  std::vector<std::vector<double>> pair_sum;
  std::vector<std::vector<int>> pair_n;
  std::size_t undefined = 0;
  std::size_t participants = 0;
  for (auto seed : scored.seeds) {
    const auto matrices = score_matrices(scored, seed);
    if (matrices.empty()) continue;
    participants = std::max(participants, matrices.front().participants.size());
    if (matrices.size() < 2) continue;
    try {
      const auto rep = rank_order(matrices, plan.estimator);
      ro.values.push_back(rep.mean);
      per_dim.push_back(rep.per_dimension);
      dims = rep.dimensions;
      undefined += rep.undefined;
      const auto table = pairwise_matrix(matrices, plan.estimator);
      if (pair_sum.empty()) {
        pair_sum.assign(table.size(), std::vector<double>(table.size(), 0.0));
        pair_n.assign(table.size(), std::vector<int>(table.size(), 0));
      }
      for (std::size_t i = 0; i < table.size(); ++i) {
        for (std::size_t j = 0; j < table.size(); ++j) {
          if (std::isfinite(table[i][j])) {
            pair_sum[i][j] += table[i][j];
            ++pair_n[i][j];
          }
        }
      }
    } catch (const Error& err) {
      errors.push_back("seed " + std::to_string(seed) + ": " + err.what());
    }
    if (pvq) {
      try {
        ips.values.push_back(ipsative_population(matrices, plan.estimator).mean);
      } catch (const Error& err) {
        errors.push_back("seed " + std::to_string(seed) + ": " + err.what());
      }
    }
  }
  e["participants"] = participants;
  if (!ro.values.empty()) {
    auto s = summarize(ro.values);
    nlohmann::json dim_json = nlohmann::json::object();
    for (std::size_t d = 0; d < dims.size(); ++d) {
      std::vector<double> xs;
      for (const auto& pd : per_dim) {
        if (pd[d]) xs.push_back(*pd[d]);
      }
      dim_json[dims[d]] = xs.empty() ? nlohmann::json() : nlohmann::json(summarize(xs).mean);
    }
    e["rank_order"] = {{"mean", s.mean},          {"se", num(s.se)},     {"n", s.n},
                       {"per_seed", ro.values},   {"se_over", "seeds"},  {"per_dimension", dim_json},
                       {"undefined", undefined}};
    samples["rank_order"] = ro.values;
    nlohmann::json matrix = nlohmann::json::array();
    for (std::size_t i = 0; i < pair_sum.size(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t j = 0; j < pair_sum.size(); ++j) {
        row.push_back(pair_n[i][j] == 0 ? nlohmann::json() : nlohmann::json(pair_sum[i][j] / pair_n[i][j]));
      }
      matrix.push_back(row);
    }
    e["pairwise"] = {{"contexts", scored.topics}, {"matrix", matrix}};
  }
  if (!ips.values.empty()) {
    auto s = summarize(ips.values);
    e["ipsative"] = {{"mean", s.mean}, {"se", num(s.se)}, {"n", s.n}, {"per_seed", ips.values}, {"se_over", "seeds"}};
    samples["ipsative"] = ips.values;
  }
  e["errors"] = errors;
  return e;
}

nlohmann::json value_behavior_entry(const ScoredDataset& values, const ScoredDataset& behavior, const ExperimentPlan& plan) {
  std::array<std::vector<double>, kValueCount> acc;
  std::size_t groups = 0;
  std::size_t contexts = 0;
  nlohmann::json errors = nlohmann::json::array();
  for (auto seed : values.seeds) {
    try {
      const auto rep = value_behavior_correlation(score_matrices(values, seed), score_matrices(behavior, seed),
                                                  plan.estimator);
      groups = std::max(groups, rep.groups);
      contexts = std::max(contexts, rep.contexts);
      for (std::size_t v = 0; v < kValueCount; ++v) {
        if (rep.per_value[v]) acc[v].push_back(*rep.per_value[v]);
      }
    } catch (const Error& err) {
      errors.push_back("seed " + std::to_string(seed) + ": " + err.what());
    }
  }
  nlohmann::json per_value = nlohmann::json::object();
  for (std::size_t v = 0; v < kValueCount; ++v) {
    per_value[std::string(short_code(all_values()[v]))] = mean_se_json(summarize(acc[v]));
  }
  return {{"per_value", per_value}, {"groups", groups}, {"contexts", contexts}, {"errors", errors}};
}

const ScoreDataset* find_dataset(const ExperimentPlan& plan, const std::vector<ScoreDataset>& datasets,
                                 const std::string& model, const std::string& role, const std::string& arm,
                                 std::optional<int> length) {
  for (std::size_t i = 0; i < plan.runs.size(); ++i) {
    const auto& r = plan.runs[i];
    if (r.model == model && r.role == role && r.arm == arm && (!length || r.length == *length)) return &datasets[i];
  }
  return nullptr;
}

}  // namespace

nlohmann::json analyze(const ExperimentPlan& plan, const std::vector<ScoreDataset>& datasets) {
  if (datasets.size() != plan.runs.size()) fail(ErrorCode::kInvalidArgument, "one dataset per planned run expected");
  nlohmann::json report{{"recipe", plan.recipe},
                        {"description", plan.description},
                        {"estimator", to_string(plan.estimator)},
                        {"length_grid", plan.length_grid},
                        {"length_grid_approximate", plan.length_grid_approximate}};
  nlohmann::json refs = nlohmann::json::array();
  for (const auto& h : kHumanReferences) {
    refs.push_back({{"study", h.study}, {"rank_order", h.rank_order_r}, {"ipsative", h.ipsative_r}});
  }
  report["human_reference"] = refs;

  std::size_t missing = 0;
  for (const auto& d : datasets) missing += d.missing.size();
  report["missing_cells"] = missing;

  // samples[entry key][measure][model] for the cross-model comparison.
  std::map<std::string, std::map<std::string, std::map<std::string, std::vector<double>>>> samples;
  nlohmann::json models = nlohmann::json::array();
  for (const auto& model : plan.models) {
    nlohmann::json entries = nlohmann::json::array();
    std::optional<std::array<double, kValueCount>> neutral_profile_ranks;
    if (plan.recipe == "neutral") {
      if (const auto* nd = find_dataset(plan, datasets, model, "neutral", "no_persona", std::nullopt)) {
        const auto m = score_matrices(score_dataset(*nd), std::nullopt);
        if (!m.empty() && !m.front().rows.empty()) {
          std::vector<std::array<double, kValueCount>> rows;
          for (const auto& r : m.front().rows) {
            std::array<double, kValueCount> a{};
            std::copy(r.begin(), r.end(), a.begin());
            rows.push_back(a);
          }
          neutral_profile_ranks = neutral_profile(rows);
        }
      }
    }
    std::optional<ScoredDataset> neutral_personas;
    if (plan.recipe == "neutral_order") {
      if (const auto* nd = find_dataset(plan, datasets, model, "neutral", "persona", std::nullopt)) {
        neutral_personas = score_dataset(*nd);
      }
    }

    for (std::size_t i = 0; i < plan.runs.size(); ++i) {
      const auto& run = plan.runs[i];
      if (run.model != model || run.role != "main") continue;
      const auto scored = score_dataset(datasets[i]);
      nlohmann::json run_samples = nlohmann::json::object();
      auto entry = stability_entry(run, scored, plan, run_samples);

      if (plan.recipe == "fig6") {
        if (const auto* bd = find_dataset(plan, datasets, model, "behavior", run.arm, std::nullopt)) {
          entry["value_behavior"] = value_behavior_entry(scored, score_dataset(*bd), plan);
        }
      }
      if (neutral_profile_ranks) {
        std::vector<double> per_seed;
        for (auto seed : scored.seeds) {
          try {
            per_seed.push_back(ipsative_to_neutral(score_matrices(scored, seed), *neutral_profile_ranks, plan.estimator).mean);
          } catch (const Error& err) {
            entry["errors"].push_back(err.what());
          }
        }
        nlohmann::json ranks = nlohmann::json::object();
        for (std::size_t v = 0; v < kValueCount; ++v) {
          ranks[std::string(short_code(all_values()[v]))] = (*neutral_profile_ranks)[v];
        }
        entry["neutral_profile"] = ranks;
        entry["similarity_to_neutral"] = mean_se_json(summarize(per_seed));
        entry["similarity_to_neutral"]["per_seed"] = per_seed;
      }
      if (neutral_personas) {
        std::vector<double> cont, neut;
        for (auto seed : scored.seeds) {
          try {
            const auto nm = score_matrices(*neutral_personas, seed);
            if (nm.empty()) continue;
            const auto rep = neutral_order_stability(score_matrices(scored, seed), nm.front(), plan.estimator);
            cont.push_back(rep.ro_contexts);
            neut.push_back(rep.ro_neutral);
          } catch (const Error& err) {
            entry["errors"].push_back(err.what());
          }
        }
        entry["ro_contexts"] = mean_se_json(summarize(cont));
        entry["ro_contexts"]["per_seed"] = cont;
        entry["ro_neutral"] = mean_se_json(summarize(neut));
        entry["ro_neutral"]["per_seed"] = neut;
      }

      const std::string key = run.arm + (run.length >= 0 && !plan.length_grid.empty() ? ".n" + std::to_string(run.length) : "");
      entry["key"] = key;
      for (const auto& [measure, values] : run_samples.items()) {
        samples[key][measure][model] = values.get<std::vector<double>>();
      }
      entries.push_back(std::move(entry));
    }
    models.push_back({{"model", model}, {"entries", entries}});
  }
  report["models"] = models;

  nlohmann::json comparisons = nlohmann::json::array();
  if (plan.models.size() >= 2) {
    for (const auto& [key, measures] : samples) {
      for (const auto& [measure, by_model] : measures) {
        std::vector<ModelSample> input;
        for (const auto& m : plan.models) {
          if (auto it = by_model.find(m); it != by_model.end()) input.push_back({m, it->second});
        }
        nlohmann::json c{{"key", key}, {"measure", measure}};
        try {
          const auto cm = compare_models(input, plan.alpha, plan.t_test);
          auto table = [](const std::vector<std::vector<double>>& t) {
            nlohmann::json out = nlohmann::json::array();
            for (const auto& row : t) {
              nlohmann::json r = nlohmann::json::array();
              for (double x : row) r.push_back(num(x));
              out.push_back(r);
            }
            return out;
          };
          c["models"] = cm.models;
          c["cells"] = cm.cells();
          c["alpha"] = cm.alpha;
          c["t_test"] = variant_name(plan.t_test);
          c["raw_p"] = table(cm.raw_p);
          c["adjusted_p"] = table(cm.adjusted_p);
          c["significant"] = cm.significant;
        } catch (const Error& err) {
          c["error"] = err.what();
        }
        comparisons.push_back(std::move(c));
      }
    }
  }
  report["comparisons"] = comparisons;
  return report;
}

namespace {

std::filesystem::path dataset_path(const std::filesystem::path& dir, const PlannedRun& run) {
  return dir / "runs" / (run.label + ".jsonl");
}

nlohmann::json manifest_json(const ExperimentPlan& plan, std::string_view status, std::size_t missing) {
  nlohmann::json spec_hashes = nlohmann::json::object();
  nlohmann::json config_hashes = nlohmann::json::object();
  for (const auto& r : plan.runs) {
    spec_hashes[r.label] = content_key(r.spec);
    config_hashes[r.label] = content_key(r.spec.model);
  }
  return {{"tool", "valstab"},
          {"manifest_version", kManifestVersion},
          {"status", status},
          {"missing_cells", missing},
          {"answer_slots", plan.answer_slots()},
          {"spec_hashes", spec_hashes},
          {"config_hashes", config_hashes},
          {"plan", plan}};
}

void write_report(const std::filesystem::path& dir, const ExperimentResult& result) {
  write_file(dir / "report.json", result.report.dump(2) + "\n");
  write_file(dir / "summary.txt", format_summary(result.report));
  for (std::size_t i = 0; i < result.plan.runs.size(); ++i) {
    const auto rows = score_dataset(result.datasets[i]).rows();
    write_file(dir / "scores" / (result.plan.runs[i].label + ".tsv"), format_score_table(rows));
  }
}

}  // namespace

ExperimentResult execute(const ExperimentPlan& plan, const ExecuteOptions& options) {
  ExperimentResult result;
  result.plan = plan;
  const auto& dir = options.out_dir;
  std::unique_ptr<Cache> cache;
  if (dir.empty()) {
    cache = std::make_unique<Cache>();
  } else {
    const auto manifest = dir / "manifest.json";
    if (std::filesystem::exists(manifest)) {
      if (!options.resume) {
        fail(ErrorCode::kIo, dir.string() + " already holds a run; pass --resume to continue it");
      }
      const auto previous = nlohmann::json::parse(read_file(manifest));
      if (previous.at("plan") != nlohmann::json(plan)) {
        fail(ErrorCode::kInvalidArgument, "the plan differs from the one recorded in " + manifest.string());
      }
    }
    write_file(manifest, manifest_json(plan, "running", 0).dump(2) + "\n");
    cache = std::make_unique<Cache>(dir / "cache");
  }

  std::map<std::string, std::shared_ptr<Backend>> backends;
  for (const auto& run : plan.runs) {
    const auto key = content_key(run.spec.model);
    auto& backend = backends[key];
    if (!backend) backend = make_backend(run.spec.model);
    Simulator sim(run.spec, backend, *cache);
    auto dataset = sim.run({options.workers});
    for (const auto& m : dataset.missing) result.missing.push_back(m.error);
    if (!dir.empty()) write_file(dataset_path(dir, run), serialize_dataset(dataset));
    result.datasets.push_back(std::move(dataset));
  }
  for (const auto& [key, backend] : backends) result.backend_calls += backend->calls();

  result.report = analyze(plan, result.datasets);
  if (!dir.empty()) {
    write_report(dir, result);
    write_file(dir / "manifest.json",
               manifest_json(plan, result.missing.empty() ? "complete" : "partial", result.missing.size()).dump(2) +
                   "\n");
  }
  return result;
}

ExperimentResult analyze_directory(const std::filesystem::path& dir) {
  const auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  ExperimentResult result;
  result.plan = manifest.at("plan").get<ExperimentPlan>();
  for (const auto& run : result.plan.runs) {
    const auto path = dataset_path(dir, run);
    if (!std::filesystem::exists(path)) {
      fail(ErrorCode::kIo, "missing dataset " + path.string() + "; finish the run with --resume first");
    }
    result.datasets.push_back(parse_dataset(read_file(path)));
    for (const auto& m : result.datasets.back().missing) result.missing.push_back(m.error);
  }
  result.report = analyze(result.plan, result.datasets);
  write_report(dir, result);
  return result;
}

nlohmann::json persona_induction_ablation(const BackendConfig& model, const Overrides& overrides,
                                          const ExecuteOptions& options) {
  const auto result = execute(plan("ablation", {model}, overrides), options);
  nlohmann::json arms = nlohmann::json::object();
  for (const auto& e : result.report.at("models").at(0).at("entries")) {
    arms[e.at("arm").get<std::string>()] = e.contains("rank_order") ? e.at("rank_order") : nlohmann::json();
  }
  return {{"model", model.name}, {"system", arms.value("system", nlohmann::json())},
          {"user", arms.value("user", nlohmann::json())}};
}

}  // namespace valstab
