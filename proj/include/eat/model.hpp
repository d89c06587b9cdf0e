#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eat/autodiff.hpp"
#include "eat/datasets.hpp"
#include "eat/kernels.hpp"
#include "eat/tensor.hpp"

namespace eat {

struct Architecture {
  std::size_t input_dim = 64;
  std::size_t hidden_dim = 32;
  std::size_t num_classes = 10;
  std::size_t num_abstention = 3;  // k; 0 for plain C-way baselines
  std::size_t num_heads = 3;       // m

  std::size_t logit_count() const noexcept { return num_classes + num_abstention; }
  void validate() const;
  bool operator==(const Architecture&) const = default;
};

struct Head {
  Tensor weight;  // [hidden x (C+k)]
  Tensor bias;    // [C+k]
};

/// Two dense ReLU layers shared by every head, then m affine heads over C+k logits.
struct ModelParams {
  Architecture arch;
  Tensor w1, b1;  // [d x h], [h]
  Tensor w2, b2;  // [h x h], [h]
  std::vector<Head> heads;

  std::vector<Tensor*> extractor_tensors();
  std::vector<const Tensor*> extractor_tensors() const;
  std::vector<Tensor*> head_tensors();
  std::vector<const Tensor*> head_tensors() const;
  /// Extractor tensors followed by every head's weight and bias.
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;

  std::size_t parameter_count() const;
  void zero_grad();

  bool operator==(const ModelParams& other) const;
};

/// He-scaled extractor and independently drawn heads, all from `seed`.
ModelParams init_params(const Architecture& arch, std::uint64_t seed);
/// Same shapes, all weights zero.
ModelParams zero_params(const Architecture& arch);

/// Parameters in tensors() order as one rank-1 tensor.
Tensor flatten(const ModelParams& params);
void unflatten(ModelParams& params, const Tensor& flat);
/// Gradient slots in tensors() order (zeros where a slot is absent).
Tensor flatten_grad(const ModelParams& params);
Tensor flatten_extractor(const ModelParams& params);

/// Per-head logits for one input.
std::vector<Tensor> forward(const ModelParams& params, std::span<const double> x);

/// Per-head logits [n x (C+k)] for a batch.
std::vector<Tensor> forward_batch(const ModelParams& params, const Tensor& inputs,
                                  kernels::Execution exec = kernels::Execution::serial);

struct GraphForward {
  Graph::Var features;
  std::vector<Graph::Var> logits;
};

/// Records the forward pass on `graph`. With `train_extractor` false the extractor
/// runs outside the graph and only the heads receive gradients.
GraphForward forward_graph(Graph& graph, ModelParams& params, const Tensor& inputs,
                           bool train_extractor = true);

/// Head-averaged abstention mass: (1/m) sum_i sum_{j >= C} softmax(head_i)[j].
double ood_score(const ModelParams& params, std::span<const double> x);
/// argmax over the first C entries of the head-averaged softmax; ties to the lowest index.
std::size_t predict_inlier(const ModelParams& params, std::span<const double> x);
/// 1 - max_c of the head-averaged softmax over the first C logits alone.
double msp_score(const ModelParams& params, std::span<const double> x);

/// Same quantities from precomputed per-head logits of one sample.
double ood_score_from_logits(std::span<const Tensor> head_logits, std::size_t num_classes);
std::size_t predict_from_logits(std::span<const Tensor> head_logits, std::size_t num_classes);
double msp_from_logits(std::span<const Tensor> head_logits, std::size_t num_classes);

enum class Detector { ensemble, msp };

Detector parse_detector(const std::string& text);
std::string to_string(Detector detector);

/// One evaluated sample.
struct ScoreRecord {
  std::int64_t id = 0;
  bool is_ood = false;
  double score = 0.0;                 // higher means more OOD
  std::optional<int> predicted;       // inlier class in [0, C)
  std::optional<int> true_class;

  bool operator==(const ScoreRecord&) const = default;
};

/// Scores every row; inlier rows carry predictions and true labels, OOD rows neither.
std::vector<ScoreRecord> score_samples(const ModelParams& params, const SampleSet& samples,
                                       bool is_ood, Detector detector,
                                       kernels::Execution exec = kernels::Execution::serial);

// Checkpoint container, text format:
//   eat-checkpoint 1
//   arch <d> <h> <C> <k> <m>
//   tensor <name> <rank> <dim...>
//   <values, one per line, %.17g>
// Tensors appear in tensors() order: w1 b1 w2 b2 head0.weight head0.bias ...
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_to_string(const ModelParams& params);
ModelParams checkpoint_from_string(const std::string& text);

}  // namespace eat
