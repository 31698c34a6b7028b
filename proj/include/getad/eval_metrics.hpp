#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace getad {

/// Labels: 1 = anomaly (positive), 0 = normal. Higher scores are more anomalous.
using Labels = std::span<const std::uint8_t>;

struct PrPoint {
  double threshold;  // score >= threshold counts as positive
  double precision;
  double recall;
};

/// Step-wise average precision over distinct descending thresholds.
double pr_auc(std::span<const double> scores, Labels labels);

/// Curve with one point per distinct score plus the leading (inf, 1, 0) point.
std::vector<PrPoint> pr_curve(std::span<const double> scores, Labels labels);

struct F1Result {
  double f1 = 0.0;
  double threshold = 0.0;  // predict anomaly iff score > threshold
  std::size_t tp = 0, fp = 0, fn = 0;
};

/// F1 of the rule score > threshold.
F1Result f1_at(std::span<const double> scores, Labels labels, double threshold);

/// Best F1 over the candidate thresholds: just below the minimum score (all
/// positive) and the midpoints between consecutive distinct scores. The
/// smallest threshold wins ties.
F1Result best_f1(std::span<const double> scores, Labels labels);

struct EvalResult {
  double pr_auc = 0.0;
  double f1 = 0.0;
  double threshold = 0.0;
  std::size_t n_pos = 0, n_neg = 0;
  std::string scoring;
  std::string f1_mode = "best";
  std::vector<PrPoint> curve;
};

/// Best-threshold F1 by default; a fixed threshold (from a validation split)
/// when given.
EvalResult evaluate(std::span<const double> scores, Labels labels, const std::string& scoring,
                    const double* fixed_threshold = nullptr);

std::string metrics_json(const EvalResult& r);
/// Writes the metrics JSON and, when csv_path is non-empty, the PR curve CSV.
void report(const EvalResult& r, const std::filesystem::path& metrics_path,
            const std::filesystem::path& csv_path);
EvalResult read_metrics(const std::filesystem::path& metrics_path);

}  // namespace getad
