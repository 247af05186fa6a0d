// Correlation metrics between predicted and gold change scores.
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tatt/change_detection.hpp"
#include "tatt/corpus.hpp"

namespace tatt {

/// Product-moment correlation. Needs equal lengths >= 3; throws
/// DegenerateMetricError when either side has zero variance.
double pearson_r(std::span<const double> x, std::span<const double> y);

/// 1-based fractional ranks, ascending; tied values share their average rank.
std::vector<double> average_ranks(std::span<const double> x);

/// Pearson correlation of average ranks.
double spearman_rho(std::span<const double> x, std::span<const double> y);

struct EvalReport {
    double pearson_r = 0.0;
    double spearman_rho = 0.0;
    std::size_t n_scored = 0;
    std::size_t n_unscored = 0;
};

/// Coefficients over target words that carry a score in the report. Targets
/// without a score count as unscored. Throws EvaluationError below 3 scored.
EvalReport evaluate(const ScoreReport& report, std::span<const TargetWordRecord> targets);

struct ScatterRow {
    std::string word;
    double gold_rank = 0.0;
    double predicted_rank = 0.0;
};

/// Gold and predicted ranks of the scored targets, rows ordered by word.
std::vector<ScatterRow> rank_scatter(const ScoreReport& report, std::span<const TargetWordRecord> targets);

std::string format_metrics(const EvalReport& r);
std::string format_scatter(std::span<const ScatterRow> rows);

/// Reads a score TSV: `#` lines skipped, at least `word<TAB>score` per line,
/// score `NA` for unscored words. Throws ParseError with the line number.
ScoreReport load_score_report(const std::filesystem::path& path);

}  // namespace tatt
