#pragma once

// Gradient-noise identities for outlier objectives.
//
// For an outlier x~ with probabilities z~ = softmax(f(x~)), the virtual-label loss
// contributes g = -grad(z~_j) / z~_j with j the abstention argmax, and the uniform
// (OE) loss contributes g' = -(1/C) sum_{j<C} grad(z~_j) / z~_j. Here both are built
// by backpropagating the probabilities themselves and compared against the
// gradients of the loss functions and against finite differences.

#include <cstddef>
#include <string>
#include <vector>

#include "eat/datasets.hpp"
#include "eat/model.hpp"
#include "eat/tensor.hpp"

namespace eat {

struct VirtualNoise {
  Tensor g;
  std::size_t virtual_label = 0;
};

/// -grad_theta z~_j / z~_j for head `head`, gradient over all model parameters.
/// Throws NumericDomainError when z~_j < 1e-300.
VirtualNoise analytic_noise_virtual(const ModelParams& params, std::span<const double> x,
                                    std::size_t head = 0);

/// -(1/C) sum_{j<C} grad_theta z~_j / z~_j.
Tensor analytic_noise_oe(const ModelParams& params, std::span<const double> x,
                         std::size_t head = 0);

/// Reverse-mode gradients of the per-sample outlier losses through the fused
/// softmax cross-entropy.
Tensor autodiff_outlier_grad(const ModelParams& params, std::span<const double> x,
                             std::size_t head = 0);
Tensor autodiff_oe_grad(const ModelParams& params, std::span<const double> x,
                        std::size_t head = 0);

/// Scalar losses as functions of the flat parameter vector, for finite differences.
/// The virtual label is frozen at `virtual_label`.
double outlier_loss_at(const ModelParams& params, const Tensor& flat, std::span<const double> x,
                       std::size_t head, std::size_t virtual_label);
double oe_loss_at(const ModelParams& params, const Tensor& flat, std::span<const double> x,
                  std::size_t head);

struct NoiseReport {
  std::size_t sample = 0;
  std::size_t virtual_label = 0;
  Tensor g;
  Tensor g_prime;
  double max_rel_err_g = 0.0;        // vs autodiff
  double max_rel_err_gprime = 0.0;   // vs autodiff
  double max_rel_err_g_fd = 0.0;     // vs finite differences (0 when skipped)
  double max_rel_err_gprime_fd = 0.0;
};

struct Prop1Options {
  std::size_t head = 0;
  bool finite_differences = true;
  double fd_step = 1e-5;
  /// Relative-error denominator floor against autodiff.
  double floor = 1e-10;
  /// Floor against finite differences, whose absolute error is ~1e-11 at fd_step 1e-5.
  double fd_floor = 1e-6;
  /// Pairs with cosine below this count as pointing in different directions.
  double cosine_threshold = 0.99;
};

struct Prop1Summary {
  std::vector<NoiseReport> reports;
  std::size_t pairs = 0;
  double direction_diversity_g = 0.0;
  double direction_diversity_gprime = 0.0;
  double worst_rel_err_g = 0.0;
  double worst_rel_err_gprime = 0.0;
  double worst_rel_err_g_fd = 0.0;
  double worst_rel_err_gprime_fd = 0.0;
};

/// Per-sample noise reports plus the fraction of sample pairs whose noise vectors
/// differ in direction. Errors from one sample are rethrown annotated with its index.
Prop1Summary verify_prop1(const ModelParams& params, const SampleSet& outliers,
                          const Prop1Options& options = {});

double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace eat
