#include "eat/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eat/errors.hpp"

namespace eat {
namespace {

// log(1 + sum_i exp(d_i)) without overflow.
double log1p_sum_exp(std::span<const double> d) {
  double top = 0.0;
  for (double v : d) top = std::max(top, v);
  double s = 0.0;
  for (double v : d) s += std::exp(v - top);
  if (top == 0.0) return std::log1p(s);
  return top + std::log(std::exp(-top) + s);
}

void require_finite(std::span<const double> logits, const char* where) {
  for (double v : logits) {
    if (!std::isfinite(v)) throw NumericDomainError(std::string(where) + ": non-finite logit");
  }
}

Tensor one_hot_rows(std::size_t rows, std::size_t cols, std::span<const int> labels) {
  Tensor t({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= cols) {
      throw ContractViolation("label " + std::to_string(labels[r]) + " out of range");
    }
    t.at(r, static_cast<std::size_t>(labels[r])) = 1.0;
  }
  return t;
}

}  // namespace

ClassPriors::ClassPriors(std::vector<double> pi) : pi_(std::move(pi)) {
  if (pi_.empty()) throw ConfigError("class priors must be nonempty");
  double sum = 0.0;
  for (double p : pi_) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw ConfigError("class priors must be strictly positive (log margin undefined)");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("class priors must sum to one");
}

ClassPriors ClassPriors::uniform(std::size_t num_classes) {
  return ClassPriors(std::vector<double>(num_classes, 1.0 / static_cast<double>(num_classes)));
}

ClassPriors ClassPriors::from_labels(std::span<const int> labels, std::size_t num_classes) {
  std::vector<double> counts(num_classes, 0.0);
  std::size_t n = 0;
  for (int y : labels) {
    if (y < 0) continue;
    if (static_cast<std::size_t>(y) >= num_classes) {
      throw ContractViolation("priors: label out of range");
    }
    counts[static_cast<std::size_t>(y)] += 1.0;
    ++n;
  }
  for (auto& c : counts) c /= static_cast<double>(n);
  return ClassPriors(std::move(counts));
}

double ClassPriors::margin(std::size_t y, std::size_t y_other) const {
  return std::log(pi_[y_other] / pi_[y]);
}

double ce_loss(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) throw ContractViolation("ce_loss: label out of range");
  require_finite(logits, "ce_loss");
  std::vector<double> d;
  d.reserve(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) {
    if (c != label) d.push_back(logits[c] - logits[label]);
  }
  return log1p_sum_exp(d);
}

std::size_t assign_virtual_label(std::span<const double> logits, std::size_t num_classes,
                                 std::size_t num_abstention) {
  if (num_abstention == 0) throw ConfigError("virtual labels need at least one abstention class");
  if (logits.size() != num_classes + num_abstention) {
    throw ContractViolation("assign_virtual_label: expected C+k logits");
  }
  std::size_t best = num_classes;
  for (std::size_t c = num_classes + 1; c < logits.size(); ++c) {
    if (logits[c] > logits[best]) best = c;
  }
  return best;
}

double outlier_loss(std::span<const double> logits, std::size_t num_classes,
                    std::size_t num_abstention) {
  return ce_loss(logits, assign_virtual_label(logits, num_classes, num_abstention));
}

double oe_uniform_loss(std::span<const double> logits, std::size_t num_classes) {
  if (num_classes == 0 || num_classes > logits.size()) {
    throw ContractViolation("oe_uniform_loss: need 1 <= C <= logit count");
  }
  require_finite(logits, "oe_uniform_loss");
  const double lse = log_sum_exp(logits);
  double s = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) s += lse - logits[c];
  return s / static_cast<double>(num_classes);
}

double la_loss(std::span<const double> logits, std::size_t label, const ClassPriors& priors) {
  if (logits.size() != priors.size()) {
    throw ContractViolation("la_loss: logit count must equal the number of priors");
  }
  if (label >= logits.size()) throw ContractViolation("la_loss: label out of range");
  require_finite(logits, "la_loss");
  std::vector<double> d;
  d.reserve(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) {
    if (c != label) d.push_back(priors.margin(label, c) + logits[c] - logits[label]);
  }
  return log1p_sum_exp(d);
}

Tensor outlier_targets(const Tensor& logits, std::size_t num_classes,
                       std::size_t num_abstention, OutlierObjective objective) {
  Tensor t = Tensor::zeros_like(logits);
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    switch (objective) {
      case OutlierObjective::virtual_label:
        t.at(r, assign_virtual_label(logits.row(r), num_classes, num_abstention)) = 1.0;
        break;
      case OutlierObjective::oe_uniform:
        for (std::size_t c = 0; c < num_classes; ++c) {
          t.at(r, c) = 1.0 / static_cast<double>(num_classes);
        }
        break;
      case OutlierObjective::none:
        break;
    }
  }
  return t;
}

ObjectiveTerms total_loss(Graph& graph, std::span<const Graph::Var> inlier_logits,
                          std::span<const int> labels, std::span<const double> weights,
                          std::span<const Graph::Var> outlier_logits, double lambda,
                          std::size_t num_classes, std::size_t num_abstention,
                          OutlierObjective objective) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
  if (labels.empty()) throw ContractViolation("total_loss: empty inlier batch");
  if (weights.size() != labels.size()) throw ContractViolation("total_loss: weight count");
  if (inlier_logits.empty()) throw ContractViolation("total_loss: no heads");
  const bool with_outliers = !outlier_logits.empty() && objective != OutlierObjective::none;
  if (with_outliers && outlier_logits.size() != inlier_logits.size()) {
    throw ContractViolation("total_loss: head count differs between inlier and outlier logits");
  }

  const double n_in = static_cast<double>(labels.size());
  std::vector<double> in_weights(weights.begin(), weights.end());
  for (auto& w : in_weights) w /= n_in;

  ObjectiveTerms terms{};
  bool first = true;
  for (std::size_t h = 0; h < inlier_logits.size(); ++h) {
    const Tensor& lv = graph.value(inlier_logits[h]);
    if (lv.rows() != labels.size()) throw ContractViolation("total_loss: inlier row count");
    auto in_term = graph.softmax_xent(inlier_logits[h], one_hot_rows(lv.rows(), lv.cols(), labels),
                                      in_weights);
    terms.inlier += graph.scalar(in_term);
    auto head_total = in_term;
    if (with_outliers) {
      const Tensor& ov = graph.value(outlier_logits[h]);
      const double n_out = static_cast<double>(ov.rows());
      auto targets = outlier_targets(ov, num_classes, num_abstention, objective);
      auto out_term = graph.softmax_xent(outlier_logits[h], std::move(targets),
                                         std::vector<double>(ov.rows(), 1.0 / n_out));
      terms.outlier += graph.scalar(out_term);
      head_total = graph.add(head_total, graph.scale(out_term, lambda));
    }
    terms.total = first ? head_total : graph.add(terms.total, head_total);
    first = false;
  }
  return terms;
}

double total_loss_value(std::span<const Tensor> inlier_logits, std::span<const int> labels,
                        std::span<const double> weights, std::span<const Tensor> outlier_logits,
                        double lambda, std::size_t num_classes, std::size_t num_abstention,
                        OutlierObjective objective) {
  if (labels.empty()) throw ContractViolation("total_loss: empty inlier batch");
  const bool with_outliers = !outlier_logits.empty() && objective != OutlierObjective::none;
  double total = 0.0;
  for (std::size_t h = 0; h < inlier_logits.size(); ++h) {
    double in_term = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      in_term += weights[i] * ce_loss(inlier_logits[h].row(i), static_cast<std::size_t>(labels[i]));
    }
    in_term /= static_cast<double>(labels.size());
    double out_term = 0.0;
    if (with_outliers) {
      const Tensor& ov = outlier_logits[h];
      for (std::size_t j = 0; j < ov.rows(); ++j) {
        out_term += objective == OutlierObjective::virtual_label
                        ? outlier_loss(ov.row(j), num_classes, num_abstention)
                        : oe_uniform_loss(ov.row(j), num_classes);
      }
      out_term /= static_cast<double>(ov.rows());
    }
    total += in_term + lambda * out_term;
  }
  return total;
}

Graph::Var la_loss_batch(Graph& graph, Graph::Var logits, std::span<const int> labels,
                         const ClassPriors& priors) {
  const std::size_t C = priors.size();
  const Tensor& lv = graph.value(logits);
  if (lv.rows() != labels.size() || labels.empty()) {
    throw ContractViolation("la_loss_batch: label count must match logit rows");
  }
  auto inlier = lv.cols() == C ? logits : graph.slice_cols(logits, 0, C);
  std::vector<double> log_pi(C);
  for (std::size_t c = 0; c < C; ++c) log_pi[c] = std::log(priors[c]);
  auto adjusted = graph.add_bias(inlier, graph.constant(Tensor::vector(std::move(log_pi))));
  return graph.softmax_xent(adjusted, one_hot_rows(labels.size(), C, labels),
                            std::vector<double>(labels.size(), 1.0 / static_cast<double>(labels.size())));
}

}  // namespace eat
