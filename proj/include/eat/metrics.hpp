#pragma once

// OOD detection and classification measures. OOD is the positive class and a higher
// score means "more OOD". A record whose score equals the decision threshold counts
// as detected (flagged OOD).

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eat/model.hpp"

namespace eat {

/// Area under the ROC curve by a descending-score sweep with tied scores grouped.
double auroc(std::span<const ScoreRecord> records);

/// Average precision: sum over distinct thresholds of precision * recall increment.
double aupr(std::span<const ScoreRecord> records);

/// Largest threshold t with TPR(t) >= tpr; returns the fraction of inliers scoring >= t.
double fpr_at_tpr(std::span<const ScoreRecord> records, double tpr);

/// The threshold fpr_at_tpr uses.
double threshold_at_tpr(std::span<const ScoreRecord> records, double tpr);

/// Accuracy over inliers scoring below the fpr_at_tpr threshold.
double acc_at_tpr(std::span<const ScoreRecord> records, double tpr);

/// Flags the largest number of top-scoring inliers whose fraction does not exceed
/// `fpr` (tied scores are flagged together) and returns accuracy on the rest.
/// fpr = 0 keeps every inlier.
double acc_at_fpr(std::span<const ScoreRecord> records, double fpr);

/// Plain accuracy over all inlier records.
double inlier_accuracy(std::span<const ScoreRecord> records);

/// round(N * (1 - fpr95) * acc95)
long long n_correct(long long n, double fpr95, double acc95);

/// Operating points as fractions in (0, 1] for TPR and [0, 1) for FPR.
struct OperatingPoints {
  std::vector<double> tpr = {0.80, 0.90, 0.95, 0.98};
  std::vector<double> fpr = {0.0, 0.001, 0.01, 0.1};
};

struct MetricsReport {
  double auroc = 0.0;
  double aupr = 0.0;
  std::map<double, double> fpr_at_tpr;
  std::map<double, std::optional<double>> acc_at_tpr;  // nullopt when no inlier remains
  std::map<double, std::optional<double>> acc_at_fpr;
  std::optional<double> fpr95;
  std::optional<double> acc95;
  std::optional<long long> n_correct;
  std::size_t n_in = 0;
  std::size_t n_out = 0;

  /// Flat (key, value) pairs in a fixed order; undefined values read "nan".
  std::vector<std::pair<std::string, std::string>> entries() const;
  std::string to_text() const;
  std::string to_json() const;
};

/// Percent label for an operating point: 0.95 -> "95", 0.001 -> "0.1".
std::string percent_label(double fraction);

MetricsReport compute_report(std::span<const ScoreRecord> records,
                             const OperatingPoints& points = {});

/// Score CSV: header `id,is_ood,score,pred,label`; pred/label empty on OOD rows.
std::string scores_to_csv(std::span<const ScoreRecord> records);
std::vector<ScoreRecord> scores_from_csv(const std::string& text);
void write_scores_csv(std::span<const ScoreRecord> records, const std::filesystem::path& path);
std::vector<ScoreRecord> read_scores_csv(const std::filesystem::path& path);

}  // namespace eat
