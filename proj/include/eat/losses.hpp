#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "eat/autodiff.hpp"
#include "eat/tensor.hpp"

namespace eat {

/// Class priors over the C inlier classes: strictly positive, summing to one.
class ClassPriors {
 public:
  /// Throws ConfigError on a zero/negative entry or a sum off by more than 1e-12.
  explicit ClassPriors(std::vector<double> pi);

  static ClassPriors uniform(std::size_t num_classes);
  /// Empirical priors of a label list; every class must occur at least once.
  static ClassPriors from_labels(std::span<const int> labels, std::size_t num_classes);

  std::size_t size() const noexcept { return pi_.size(); }
  double operator[](std::size_t c) const noexcept { return pi_[c]; }
  const std::vector<double>& values() const noexcept { return pi_; }
  /// Margin log(pi_y' / pi_y): positive when y is the rarer class.
  double margin(std::size_t y, std::size_t y_other) const;

 private:
  std::vector<double> pi_;
};

// Per-sample objectives on one logit vector.

/// -log softmax(logits)[label]
double ce_loss(std::span<const double> logits, std::size_t label);

/// Index in [C, C+k) of the largest abstention logit; ties go to the lowest index.
std::size_t assign_virtual_label(std::span<const double> logits, std::size_t num_classes,
                                 std::size_t num_abstention);

/// Cross-entropy against the self-assigned virtual label.
double outlier_loss(std::span<const double> logits, std::size_t num_classes,
                    std::size_t num_abstention);

/// Cross-entropy of softmax(logits) against the uniform distribution on the first C classes.
double oe_uniform_loss(std::span<const double> logits, std::size_t num_classes);

/// log(1 + sum_{y' != y} (pi_y / pi_y') exp(f_y' - f_y)) over C logits.
double la_loss(std::span<const double> logits, std::size_t label, const ClassPriors& priors);

/// What the outlier term of the objective does with OOD rows.
enum class OutlierObjective {
  virtual_label,  // cross-entropy against the per-head abstention argmax
  oe_uniform,     // cross-entropy against uniform over inlier classes
  none,           // no outlier term
};

/// Targets for a batch of outlier rows under `objective`; virtual labels are read off
/// the current logits and treated as constants.
Tensor outlier_targets(const Tensor& logits, std::size_t num_classes,
                       std::size_t num_abstention, OutlierObjective objective);

struct ObjectiveTerms {
  Graph::Var total;
  double inlier = 0.0;   // summed over heads
  double outlier = 0.0;  // summed over heads, before lambda
};

/// sum over heads of [ mean_i w_i ce(inlier_i) + lambda * mean_j outlier_loss(outlier_j) ].
///
/// `outlier_logits` may be empty (no outlier rows), giving a zero outlier term.
/// Throws ContractViolation on an empty inlier batch.
ObjectiveTerms total_loss(Graph& graph, std::span<const Graph::Var> inlier_logits,
                          std::span<const int> labels, std::span<const double> weights,
                          std::span<const Graph::Var> outlier_logits, double lambda,
                          std::size_t num_classes, std::size_t num_abstention,
                          OutlierObjective objective);

/// Plain-value evaluation of the same objective on precomputed per-head logits.
double total_loss_value(std::span<const Tensor> inlier_logits, std::span<const int> labels,
                        std::span<const double> weights, std::span<const Tensor> outlier_logits,
                        double lambda, std::size_t num_classes, std::size_t num_abstention,
                        OutlierObjective objective);

/// Graph form of the mean logit-adjusted loss over the first C columns of `logits`.
Graph::Var la_loss_batch(Graph& graph, Graph::Var logits, std::span<const int> labels,
                         const ClassPriors& priors);

}  // namespace eat
