#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "eat/datasets.hpp"
#include "eat/metrics.hpp"
#include "eat/model.hpp"
#include "eat/trainer.hpp"

namespace eat {

/// Everything one run needs: data synthesis, training and evaluation settings.
struct ExperimentConfig {
  LongTailSpec dataset;
  std::size_t test_per_class = 100;
  OodMode ood_mode = OodMode::held_out_patterns;
  std::size_t ood_train_count = 1000;
  std::size_t ood_test_count = 1000;
  std::size_t ood_patterns = 20;
  TrainConfig train = preset(Method::eat);
  OperatingPoints points;
  std::filesystem::path output_dir;
  std::size_t sweep_seeds = 6;

  void validate() const;
  /// Grid shape for CutMix when the dataset is grid-image.
  std::optional<GridShape> grid() const;
  /// Copy with the run seed replaced (data noise and training both follow it).
  ExperimentConfig with_seed(std::uint64_t seed) const;
};

/// Parses `key = value` lines; `#` starts a comment. Unknown keys are rejected.
/// A `method` key applies that method's preset before the other keys.
/// Operating points are given in percent, e.g. `tpr_points = 80, 90, 95, 98`.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_string(const ExperimentConfig& config);

struct ExperimentData {
  SampleSet train_in;
  SampleSet train_ood;
  SampleSet test_in;
  SampleSet test_ood;
};

/// Train/test inliers share class patterns; train/test OOD share the held-out pool.
ExperimentData synthesize(const ExperimentConfig& config);

/// Stage 1, then stage 2 with priors from the training inliers when epochs_stage2 > 0.
TrainResult train_model(const ExperimentConfig& config, const ExperimentData& data);

/// Inlier rows followed by OOD rows.
std::vector<ScoreRecord> score_test_sets(const ModelParams& params, const SampleSet& test_in,
                                         const SampleSet& test_ood, Detector detector,
                                         kernels::Execution exec = kernels::Execution::serial);

struct ExperimentResult {
  TrainResult trained;
  std::vector<ScoreRecord> records;
  MetricsReport report;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

/// Mean and sample standard deviation per report key, over runs where the key is
/// defined. One run gives std 0.
struct SweepSummary {
  std::vector<std::uint64_t> seeds;
  std::vector<MetricsReport> reports;
  std::vector<std::string> keys;
  std::map<std::string, double> mean;
  std::map<std::string, double> stddev;

  std::string to_text() const;
  std::string to_json() const;
};

SweepSummary summarize(const std::vector<std::uint64_t>& seeds,
                       const std::vector<MetricsReport>& reports);

/// Runs seeds base, base+1, ... in parallel OpenMP threads.
SweepSummary run_sweep(const ExperimentConfig& config, std::size_t num_seeds, int threads = 0);

}  // namespace eat
