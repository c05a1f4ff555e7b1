#include "valstab/report_io.hpp"

#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "valstab/scoring.hpp"

namespace valstab {

namespace {

std::string field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return "NA";
  return format_number(j.at(key).get<double>());
}

std::string mean_se(const nlohmann::json& j) { return field(j, "mean") + " +/- " + field(j, "se"); }

std::string table_of(const std::vector<std::string>& labels, const nlohmann::json& matrix) {
  std::string out = "context";
  for (const auto& l : labels) out += "\t" + l;
  out += "\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out += labels[i];
    for (const auto& x : matrix.at(i)) {
      out += "\t";
      if (x.is_null()) {
        out += "NA";
      } else if (x.is_boolean()) {
        out += x.get<bool>() ? "1" : "0";
      } else {
        out += format_number(x.get<double>());
      }
    }
    out += "\n";
  }
  return out;
}

}  // namespace

std::string format_number(double value) {
  if (!std::isfinite(value)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

std::string format_summary(const nlohmann::json& report) {
  std::string out = "recipe: " + report.at("recipe").get<std::string>() + " (" +
                    report.value("description", std::string()) + ")\n";
  out += "estimator: " + report.value("estimator", std::string("spearman")) + "\n";
  if (report.value("length_grid_approximate", false)) {
    out += "note: conversation-length grid is an approximation of the published sweep\n";
  }
  if (const auto missing = report.value("missing_cells", 0); missing > 0) {
    out += "warning: " + std::to_string(missing) + " cell(s) missing; finish with --resume\n";
  }
  out += "\n";
  for (const auto& m : report.at("models")) {
    out += "model " + m.at("model").get<std::string>() + "\n";
    for (const auto& e : m.at("entries")) {
      out += "  " + e.at("key").get<std::string>() + " [" + e.at("instrument").get<std::string>() + "]";
      if (e.contains("rank_order")) out += "  rank-order " + mean_se(e.at("rank_order"));
      if (e.contains("ipsative")) out += "  ipsative " + mean_se(e.at("ipsative"));
      if (e.contains("similarity_to_neutral")) out += "  to-neutral " + mean_se(e.at("similarity_to_neutral"));
      if (e.contains("ro_contexts")) {
        out += "  RO_cont " + mean_se(e.at("ro_contexts")) + "  RO_neut " + mean_se(e.at("ro_neutral"));
      }
      out += "\n";
      if (e.contains("value_behavior")) {
        out += "    value-behaviour r:";
        for (const auto& [code, s] : e.at("value_behavior").at("per_value").items()) {
          out += " " + code + "=" + field(s, "mean");
        }
        out += "  (groups " + std::to_string(e.at("value_behavior").at("groups").get<int>()) + ")\n";
      }
      for (const auto& err : e.value("errors", nlohmann::json::array())) {
        out += "    ! " + err.get<std::string>() + "\n";
      }
    }
  }
  out += "\nhuman reference (longitudinal studies):\n";
  for (const auto& h : report.at("human_reference")) {
    out += "  " + h.at("study").get<std::string>() + ": rank-order r=" + field(h, "rank_order") +
           ", ipsative r=" + field(h, "ipsative") + "\n";
  }
  for (const auto& c : report.value("comparisons", nlohmann::json::array())) {
    out += "\ncomparison " + c.at("key").get<std::string>() + " / " + c.at("measure").get<std::string>();
    if (c.contains("error")) {
      out += ": " + c.at("error").get<std::string>() + "\n";
      continue;
    }
    std::size_t significant = 0;
    for (const auto& row : c.at("significant")) {
      for (const auto& x : row) significant += x.get<bool>() ? 1 : 0;
    }
    out += ": " + std::to_string(c.at("cells").get<int>()) + " pairs, " + std::to_string(significant / 2) +
           " significant after FDR at alpha " + field(c, "alpha") + "\n";
  }
  return out;
}

std::vector<ExportFile> export_tables(const ExperimentResult& result) {
  std::vector<ExportFile> files;
  std::string scores = "run\tparticipant\tseed\ttopic\tdimension\tscore\n";
  for (std::size_t i = 0; i < result.plan.runs.size(); ++i) {
    for (const auto& r : score_dataset(result.datasets[i]).rows()) {
      scores += result.plan.runs[i].label + "\t" + r.participant + "\t" + std::to_string(r.seed) + "\t" + r.topic +
                "\t" + r.dimension + "\t" + format_number(r.score) + "\n";
    }
  }
  files.push_back({"scores.tsv", std::move(scores)});

  const auto& report = result.report;
  std::string stability = "model\tkey\tarm\tlength\tinstrument\tmeasure\tmean\tse\tn\n";
  std::string vb = "model\tkey\tvalue\tmean\tse\tn\n";
  bool any_vb = false;
  for (const auto& m : report.at("models")) {
    const auto model = m.at("model").get<std::string>();
    for (const auto& e : m.at("entries")) {
      const auto prefix = model + "\t" + e.at("key").get<std::string>() + "\t" + e.at("arm").get<std::string>() +
                          "\t" + std::to_string(e.at("length").get<int>()) + "\t" +
                          e.at("instrument").get<std::string>();
      for (const char* measure : {"rank_order", "ipsative", "similarity_to_neutral", "ro_contexts", "ro_neutral"}) {
        if (!e.contains(measure)) continue;
        const auto& s = e.at(measure);
        stability += prefix + "\t" + measure + "\t" + field(s, "mean") + "\t" + field(s, "se") + "\t" +
                     std::to_string(s.value("n", 0)) + "\n";
      }
      if (e.contains("pairwise")) {
        const auto labels = e.at("pairwise").at("contexts").get<std::vector<std::string>>();
        files.push_back({"pairwise/" + model + "." + e.at("key").get<std::string>() + ".tsv",
                         table_of(labels, e.at("pairwise").at("matrix"))});
      }
      if (e.contains("value_behavior")) {
        any_vb = true;
        for (const auto& [code, s] : e.at("value_behavior").at("per_value").items()) {
          vb += model + "\t" + e.at("key").get<std::string>() + "\t" + code + "\t" + field(s, "mean") + "\t" +
                field(s, "se") + "\t" + std::to_string(s.value("n", 0)) + "\n";
        }
      }
    }
  }
  for (const auto& h : report.at("human_reference")) {
    stability += "human\t" + h.at("study").get<std::string>() + "\t\t\t\trank_order\t" + field(h, "rank_order") +
                 "\tNA\t0\n";
    stability += "human\t" + h.at("study").get<std::string>() + "\t\t\t\tipsative\t" + field(h, "ipsative") +
                 "\tNA\t0\n";
  }
  files.push_back({"stability.tsv", std::move(stability)});
  if (any_vb) files.push_back({"value_behavior.tsv", std::move(vb)});

  for (const auto& c : report.value("comparisons", nlohmann::json::array())) {
    if (c.contains("error")) continue;
    const auto labels = c.at("models").get<std::vector<std::string>>();
    const auto stem = "comparisons/" + c.at("key").get<std::string>() + "." + c.at("measure").get<std::string>();
    files.push_back({stem + ".adjusted_p.tsv", table_of(labels, c.at("adjusted_p"))});
    files.push_back({stem + ".significant.tsv", table_of(labels, c.at("significant"))});
  }
  return files;
}

}  // namespace valstab
