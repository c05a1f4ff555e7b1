#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "valstab/data_files.hpp"
#include "valstab/error.hpp"
#include "valstab/experiments.hpp"
#include "valstab/report_io.hpp"

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::vector<T> parse_numbers(const std::string& text) {
  std::vector<T> out;
  for (const auto& item : split_list(text)) {
    try {
      std::size_t used = 0;
      const auto v = std::stoll(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(static_cast<T>(v));
    } catch (const std::exception&) {
      valstab::fail(valstab::ErrorCode::kInvalidArgument, "not a non-negative integer: '" + item + "'");
    }
  }
  return out;
}

// "key=value" overrides; lists are comma separated, numbers stay numbers.
nlohmann::json parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    valstab::fail(valstab::ErrorCode::kInvalidArgument, "override must look like key=value: '" + text + "'");
  }
  const auto key = text.substr(0, eq);
  const auto value = text.substr(eq + 1);
  if (key == "topics") return {{key, split_list(value)}};
  if (key == "seeds") return {{key, parse_numbers<std::uint64_t>(value)}};
  if (key == "length_grid") return {{key, parse_numbers<int>(value)}};
  const auto parsed = nlohmann::json::parse(value, nullptr, false);
  if (!parsed.is_discarded() && (parsed.is_number() || parsed.is_boolean())) return {{key, parsed}};
  return {{key, value}};
}

struct RunArgs {
  std::string recipe;
  std::vector<std::string> overrides;
  std::string out;
  std::vector<std::string> model_configs;
  std::string scripted;
  std::string scale = "full";
  std::string population;
  std::string topics;
  int n_messages = -1;
  std::string seeds;
  int permutations = -1;
  std::string instrument;
  std::string length_grid;
  int max_personas = -1;
  std::string estimator;
  std::string order_mode;
  std::string answer_scale;
  std::string t_test;
  double alpha = -1.0;
  int workers = 1;
  bool resume = false;
  bool dry_run = false;
};

valstab::Overrides build_overrides(const RunArgs& a) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& o : a.overrides) j.update(parse_override(o));
  j["scale"] = a.scale;
  if (!a.population.empty()) j["population"] = a.population;
  if (!a.topics.empty()) j["topics"] = split_list(a.topics);
  if (a.n_messages >= 0) j["n_messages"] = a.n_messages;
  if (!a.seeds.empty()) j["seeds"] = parse_numbers<std::uint64_t>(a.seeds);
  if (a.permutations >= 0) j["permutations"] = a.permutations;
  if (!a.instrument.empty()) j["instrument"] = a.instrument;
  if (!a.length_grid.empty()) j["length_grid"] = parse_numbers<int>(a.length_grid);
  if (a.max_personas >= 0) j["max_personas"] = a.max_personas;
  if (!a.estimator.empty()) j["estimator"] = a.estimator;
  if (!a.order_mode.empty()) j["order_mode"] = a.order_mode;
  if (!a.answer_scale.empty()) j["answer_scale"] = a.answer_scale;
  if (!a.t_test.empty()) j["t_test"] = a.t_test;
  if (a.alpha >= 0.0) j["alpha"] = a.alpha;
  return j.get<valstab::Overrides>();
}

std::vector<valstab::BackendConfig> load_models(const RunArgs& a) {
  std::vector<valstab::BackendConfig> models;
  for (const auto& path : a.model_configs) models.push_back(valstab::load_backend_config(path));
  if (!a.scripted.empty()) {
    const auto j = nlohmann::json{{"policy", a.scripted}};
    nlohmann::json cfg{{"name", "scripted-" + a.scripted}, {"dialect", "scripted"}, {"template", "mistral"},
                       {"scripted", j}};
    models.push_back(cfg.get<valstab::BackendConfig>());
  }
  if (models.empty()) {
    valstab::fail(valstab::ErrorCode::kInvalidArgument, "give at least one --model-config (or --scripted POLICY)");
  }
  return models;
}

int cmd_run(const RunArgs& a) {
  const auto models = load_models(a);
  const auto p = valstab::plan(a.recipe, models, build_overrides(a));
  if (a.dry_run) {
    std::cout << "recipe\t" << p.recipe << "\n";
    for (const auto& r : p.runs) {
      std::cout << r.label << "\t" << valstab::count_answer_slots(r.spec) << "\n";
    }
    std::cout << "total\t" << p.answer_slots() << "\n";
    return 0;
  }
  if (a.out.empty()) valstab::fail(valstab::ErrorCode::kInvalidArgument, "--out DIR is required");
  valstab::ExecuteOptions options;
  options.out_dir = a.out;
  options.workers = a.workers;
  options.resume = a.resume;
  const auto result = valstab::execute(p, options);
  std::cout << valstab::format_summary(result.report);
  std::cout << "\nbackend calls: " << result.backend_calls << "\nwritten to " << a.out << "\n";
  if (!result.missing.empty()) {
    std::cerr << result.missing.size() << " cell(s) failed; first: " << result.missing.front() << "\n";
    return 3;
  }
  return 0;
}

int cmd_analyze(const std::string& dir) {
  const auto result = valstab::analyze_directory(dir);
  std::cout << valstab::format_summary(result.report);
  return 0;
}

int cmd_export(const std::string& dir, const std::string& format, std::string to) {
  const auto result = valstab::analyze_directory(dir);
  if (format == "json") {
    std::cout << result.report.dump(2) << "\n";
    return 0;
  }
  if (format != "table") valstab::fail(valstab::ErrorCode::kInvalidArgument, "format must be table or json");
  if (to.empty()) to = (std::filesystem::path(dir) / "exports").string();
  for (const auto& f : valstab::export_tables(result)) {
    const auto path = std::filesystem::path(to) / f.name;
    valstab::write_file(path, f.content);
    std::cout << path.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Measure the stability of values expressed by language models across conversation contexts"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Simulate and analyse one recipe");
  run_cmd->add_option("recipe", run.recipe, "Recipe name (see `valstab recipes`)")->required();
  run_cmd->add_option("overrides", run.overrides, "Extra key=value overrides");
  run_cmd->add_option("--out", run.out, "Output directory");
  run_cmd->add_option("--model-config", run.model_configs, "Backend configuration JSON (repeatable)");
  run_cmd->add_option("--scripted", run.scripted, "Add an offline scripted model")
      ->check(CLI::IsMember({"fixed_per_persona", "uniform_random", "drift_after_k"}));
  run_cmd->add_option("--scale", run.scale, "full or small")->check(CLI::IsMember({"full", "small"}));
  run_cmd->add_option("--population", run.population, "fictional or real_world");
  run_cmd->add_option("--topics", run.topics, "Comma-separated topic ids");
  run_cmd->add_option("--n-messages", run.n_messages, "Simulated messages before the questionnaire");
  run_cmd->add_option("--seeds", run.seeds, "Comma-separated seeds");
  run_cmd->add_option("--permutations", run.permutations, "Answer-order permutations in no-persona mode");
  run_cmd->add_option("--instrument", run.instrument, "pvq, donation, stealing or religion");
  run_cmd->add_option("--length-grid", run.length_grid, "Comma-separated conversation lengths for sweeps");
  run_cmd->add_option("--max-personas", run.max_personas, "Use only the first N personas");
  run_cmd->add_option("--estimator", run.estimator, "spearman or pearson");
  run_cmd->add_option("--order-mode", run.order_mode, "per_item or per_administration");
  run_cmd->add_option("--answer-scale", run.answer_scale, "likert6 or likert5");
  run_cmd->add_option("--t-test", run.t_test, "student or welch");
  run_cmd->add_option("--alpha", run.alpha, "FDR significance level");
  run_cmd->add_option("--workers", run.workers, "Concurrent cells")->check(CLI::Range(1, 256));
  run_cmd->add_flag("--resume", run.resume, "Continue an interrupted run in --out");
  run_cmd->add_flag("--dry-run", run.dry_run, "Print answer-record counts without calling any backend");

  std::string analyze_dir;
  auto* analyze_cmd = app.add_subcommand("analyze", "Recompute the report of a finished run");
  analyze_cmd->add_option("dir", analyze_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  std::string export_dir, export_format = "table", export_to;
  auto* export_cmd = app.add_subcommand("export", "Write tables for external plotting");
  export_cmd->add_option("dir", export_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  export_cmd->add_option("--format", export_format, "table or json")->check(CLI::IsMember({"table", "json"}));
  export_cmd->add_option("--to", export_to, "Destination directory (default DIR/exports)");

  auto* recipes_cmd = app.add_subcommand("recipes", "List the built-in recipes");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return cmd_run(run);
    if (*analyze_cmd) return cmd_analyze(analyze_dir);
    if (*export_cmd) return cmd_export(export_dir, export_format, export_to);
    if (*recipes_cmd) {
      for (const auto& r : valstab::recipe_names()) std::cout << r << "\t" << valstab::recipe_description(r) << "\n";
      return 0;
    }
  } catch (const valstab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
