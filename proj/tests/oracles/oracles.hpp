#pragma once

// Independent reference computations used only by tests. Each one is written from the
// definition, by enumeration or in extended precision, and shares no code with the
// library beyond its data types.

#include <optional>
#include <random>
#include <span>
#include <vector>

#include "eat/model.hpp"

namespace oracle {

std::vector<double> softmax(std::span<const double> logits);
double cross_entropy(std::span<const double> logits, std::size_t label);

/// Class counts round(head * rho^(-c/(C-1))).
std::vector<std::size_t> longtail_counts(std::size_t head, double rho, std::size_t classes);

/// Per-head logits with plain nested loops in long double.
std::vector<std::vector<double>> forward(const eat::ModelParams& params,
                                         std::span<const double> x);

// Metrics by enumeration. nullopt where the quantity is undefined.
double auroc(std::span<const eat::ScoreRecord> records);
double aupr(std::span<const eat::ScoreRecord> records);
double fpr_at_tpr(std::span<const eat::ScoreRecord> records, double tpr);
std::optional<double> acc_at_tpr(std::span<const eat::ScoreRecord> records, double tpr);
std::optional<double> acc_at_fpr(std::span<const eat::ScoreRecord> records, double fpr);

/// Random record set: n_in inliers and n_out OOD rows; scores drawn from `levels`
/// distinct values so ties are common.
std::vector<eat::ScoreRecord> random_records(std::mt19937_64& rng, std::size_t n_in,
                                             std::size_t n_out, int levels);

}  // namespace oracle
