#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eat/augment.hpp"
#include "eat/datasets.hpp"
#include "eat/losses.hpp"
#include "eat/model.hpp"

namespace eat {

enum class Method { eat, oe_baseline, msp_baseline };

Method parse_method(const std::string& text);
std::string to_string(Method method);
OutlierObjective outlier_objective(Method method);
/// Score used at evaluation time: abstention mass for EAT, MSP for the baselines.
Detector default_detector(Method method);

struct TrainConfig {
  Method method = Method::eat;
  double lambda = 0.05;
  std::size_t num_abstention = 3;  // k
  std::size_t num_heads = 3;       // m
  std::size_t hidden_dim = 32;
  std::size_t epochs_stage1 = 30;
  std::size_t epochs_stage2 = 1;
  double lr_stage1 = 1e-2;
  double lr_stage2 = 1e-3;
  double momentum = 0.9;
  std::size_t batch_size = 64;
  double generated_weight = 0.05;  // w_gen
  std::size_t augment_count_per_batch = 16;
  std::uint64_t seed = 0;

  void validate() const;
  Architecture architecture(std::size_t input_dim, std::size_t num_classes) const;
};

/// Preset for one of the three compared methods: EAT keeps k=3, m=3, CutMix and the
/// stage-2 fine-tune; the baselines use one plain C-way head (k=0, m=1), no
/// augmentation and no fine-tuning.
TrainConfig preset(Method method);

struct LossTracePoint {
  std::size_t epoch = 0;
  std::string split;  // "stage1" or "stage2"
  double mean_loss = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<LossTracePoint> trace;
};

/// Per-step diagnostics, for instrumentation in tests.
struct StepRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double inlier_term = 0.0;
  double outlier_term = 0.0;
  double total = 0.0;
  double learning_rate = 0.0;
};

struct Stage1Options {
  /// Grid geometry for CutMix; augmentation is skipped without it.
  std::optional<GridShape> grid;
  /// Stops after this many optimisation steps when set (instrumentation).
  std::optional<std::size_t> max_steps;
  std::vector<StepRecord>* steps = nullptr;
};

/// Deterministic initial parameters for `config` on data of the given shape.
ModelParams initial_params(const TrainConfig& config, std::size_t input_dim,
                           std::size_t num_classes);

/// Joint training on inliers (plus CutMix tail composites) and outliers with
/// per-head virtual labels, momentum SGD and a cosine-annealed learning rate.
TrainResult train_stage1(const TrainConfig& config, ModelParams init, const SampleSet& inliers,
                         const SampleSet& outliers, const Stage1Options& options = {});
TrainResult train_stage1(const TrainConfig& config, std::size_t num_classes,
                         const SampleSet& inliers, const SampleSet& outliers,
                         const Stage1Options& options = {});

/// Head-only fine-tuning with the logit-adjusted loss; extractor weights are untouched.
TrainResult finetune_stage2(const TrainConfig& config, ModelParams params,
                            const SampleSet& inliers, const ClassPriors& priors);

/// cos-annealed rate for `step` of `total_steps`, decaying from `base` to 0.
double cosine_lr(double base, std::size_t step, std::size_t total_steps);

void write_loss_trace_csv(const std::vector<LossTracePoint>& trace,
                          const std::filesystem::path& path);

}  // namespace eat
