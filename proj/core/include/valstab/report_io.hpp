#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "valstab/experiments.hpp"

namespace valstab {

/// Plain-text digest of a report, with the human reference lines.
std::string format_summary(const nlohmann::json& report);

struct ExportFile {
  std::string name;  // relative path inside the export directory
  std::string content;
};

/// Tab-separated tables for external plotting: per-run scores, stability
/// summaries, pairwise context matrices, value-behaviour correlations and
/// model comparison matrices.
std::vector<ExportFile> export_tables(const ExperimentResult& result);

/// Renders a number the way every table does: shortest round-trip form,
/// "NA" for undefined values.
std::string format_number(double value);

}  // namespace valstab
