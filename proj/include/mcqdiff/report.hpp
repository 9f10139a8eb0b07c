#pragma once

#include <map>
#include <string>
#include <vector>

#include "mcqdiff/dataset.hpp"
#include "mcqdiff/experiment.hpp"

namespace mcqdiff {

/// A static literature/baseline row rendered alongside computed results,
/// never recomputed and never competing for the best-value flag.
struct ReferenceRow {
    std::string method;
    std::map<std::string, double> values;  // dataset label -> reported value
};

struct GridReport {
    std::vector<ExperimentResult> results;
    std::vector<ReferenceRow> references;
};

enum class ReportFormat { Csv, Markdown };

ReportFormat report_format_from_name(const std::string& name);

/// Deterministic bytes; all numbers at 4 decimals; per-dataset best mean RMSE
/// flagged. CSV is one row per experiment; markdown mirrors the
/// methods-by-datasets table layout.
std::string render_report(const GridReport& report, ReportFormat format);

std::string results_to_json_text(const GridReport& report);
GridReport results_from_json_text(const std::string& text);

/// Difficulty histogram plus the share of items at or above a threshold.
std::string render_histogram_report(const Dataset& dataset, const std::string& label,
                                    int bins, double share_threshold, ReportFormat format);

}  // namespace mcqdiff
