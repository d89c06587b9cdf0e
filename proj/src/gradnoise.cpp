#include "eat/gradnoise.hpp"

#include <cmath>

#include "eat/autodiff.hpp"
#include "eat/errors.hpp"
#include "eat/losses.hpp"

namespace eat {
namespace {

constexpr double kUnderflow = 1e-300;

void check_head(const ModelParams& params, std::size_t head) {
  if (head >= params.heads.size()) throw ContractViolation("head index out of range");
}

// Single-head forward restricted to `head`; returns its logits node.
Graph::Var head_logits(Graph& graph, ModelParams& params, std::span<const double> x,
                       std::size_t head) {
  const auto fwd =
      forward_graph(graph, params, Tensor::matrix(1, x.size(), {x.begin(), x.end()}));
  return fwd.logits[head];
}

// grad_theta z~_j over all parameters, plus z~_j itself.
std::pair<Tensor, double> probability_gradient(ModelParams& work, std::span<const double> x,
                                               std::size_t head, std::size_t j) {
  Graph graph;
  auto probs = graph.softmax(head_logits(graph, work, x, head));
  auto zj = graph.element(probs, 0, j);
  work.zero_grad();
  graph.backward(zj);
  return {flatten_grad(work), graph.scalar(zj)};
}

}  // namespace

VirtualNoise analytic_noise_virtual(const ModelParams& params, std::span<const double> x,
                                    std::size_t head) {
  check_head(params, head);
  const auto& a = params.arch;
  if (a.num_abstention == 0) throw ConfigError("virtual-label noise needs k >= 1");
  const auto logits = forward(params, x)[head];
  const std::size_t j = assign_virtual_label(logits.data(), a.num_classes, a.num_abstention);
  ModelParams work = params;
  auto [grad, zj] = probability_gradient(work, x, head, j);
  if (!(zj >= kUnderflow)) {
    throw NumericDomainError("virtual-class probability underflows (z_j < 1e-300)");
  }
  for (auto& v : grad.data()) v = -v / zj;
  return {std::move(grad), j};
}

Tensor analytic_noise_oe(const ModelParams& params, std::span<const double> x, std::size_t head) {
  check_head(params, head);
  const std::size_t C = params.arch.num_classes;
  ModelParams work = params;
  Tensor total(std::vector<std::size_t>{work.parameter_count()});
  for (std::size_t j = 0; j < C; ++j) {
    auto [grad, zj] = probability_gradient(work, x, head, j);
    if (!(zj >= kUnderflow)) {
      throw NumericDomainError("inlier-class probability " + std::to_string(j) +
                               " underflows (z_j < 1e-300)");
    }
    for (std::size_t i = 0; i < total.size(); ++i) total[i] -= grad[i] / zj;
  }
  for (auto& v : total.data()) v /= static_cast<double>(C);
  return total;
}

Tensor autodiff_outlier_grad(const ModelParams& params, std::span<const double> x,
                             std::size_t head) {
  check_head(params, head);
  const auto& a = params.arch;
  ModelParams work = params;
  Graph graph;
  auto logits = head_logits(graph, work, x, head);
  auto targets = outlier_targets(graph.value(logits), a.num_classes, a.num_abstention,
                                 OutlierObjective::virtual_label);
  auto loss = graph.softmax_xent(logits, std::move(targets), {1.0});
  work.zero_grad();
  graph.backward(loss);
  return flatten_grad(work);
}

Tensor autodiff_oe_grad(const ModelParams& params, std::span<const double> x, std::size_t head) {
  check_head(params, head);
  const auto& a = params.arch;
  ModelParams work = params;
  Graph graph;
  auto logits = head_logits(graph, work, x, head);
  auto targets = outlier_targets(graph.value(logits), a.num_classes, a.num_abstention,
                                 OutlierObjective::oe_uniform);
  auto loss = graph.softmax_xent(logits, std::move(targets), {1.0});
  work.zero_grad();
  graph.backward(loss);
  return flatten_grad(work);
}

double outlier_loss_at(const ModelParams& params, const Tensor& flat, std::span<const double> x,
                       std::size_t head, std::size_t virtual_label) {
  ModelParams work = params;
  unflatten(work, flat);
  return ce_loss(forward(work, x)[head].data(), virtual_label);
}

double oe_loss_at(const ModelParams& params, const Tensor& flat, std::span<const double> x,
                  std::size_t head) {
  ModelParams work = params;
  unflatten(work, flat);
  return oe_uniform_loss(forward(work, x)[head].data(), params.arch.num_classes);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na == 0.0 || nb == 0.0) return na == nb ? 1.0 : 0.0;
  return dot(a, b) / (na * nb);
}

Prop1Summary verify_prop1(const ModelParams& params, const SampleSet& outliers,
                          const Prop1Options& options) {
  if (outliers.empty()) throw ContractViolation("verify_prop1 needs a nonempty batch");
  check_head(params, options.head);
  Prop1Summary summary;
  const Tensor flat = flatten(params);
  for (std::size_t i = 0; i < outliers.size(); ++i) {
    const auto x = outliers.row(i);
    try {
      NoiseReport r;
      r.sample = i;
      auto vn = analytic_noise_virtual(params, x, options.head);
      r.g = std::move(vn.g);
      r.virtual_label = vn.virtual_label;
      r.g_prime = analytic_noise_oe(params, x, options.head);
      r.max_rel_err_g = max_relative_error(
          r.g.data(), autodiff_outlier_grad(params, x, options.head).data(), options.floor);
      r.max_rel_err_gprime = max_relative_error(
          r.g_prime.data(), autodiff_oe_grad(params, x, options.head).data(), options.floor);
      if (options.finite_differences) {
        const auto fd_g = finite_diff_grad(
            [&](const Tensor& t) {
              return outlier_loss_at(params, t, x, options.head, r.virtual_label);
            },
            flat, options.fd_step);
        const auto fd_gp = finite_diff_grad(
            [&](const Tensor& t) { return oe_loss_at(params, t, x, options.head); }, flat,
            options.fd_step);
        r.max_rel_err_g_fd = max_relative_error(r.g.data(), fd_g.data(), options.fd_floor);
        r.max_rel_err_gprime_fd =
            max_relative_error(r.g_prime.data(), fd_gp.data(), options.fd_floor);
      }
      summary.worst_rel_err_g = std::max(summary.worst_rel_err_g, r.max_rel_err_g);
      summary.worst_rel_err_gprime = std::max(summary.worst_rel_err_gprime, r.max_rel_err_gprime);
      summary.worst_rel_err_g_fd = std::max(summary.worst_rel_err_g_fd, r.max_rel_err_g_fd);
      summary.worst_rel_err_gprime_fd =
          std::max(summary.worst_rel_err_gprime_fd, r.max_rel_err_gprime_fd);
      summary.reports.push_back(std::move(r));
    } catch (const Error& e) {
      throw Error(e.kind(), "sample " + std::to_string(i) + ": " + e.what());
    }
  }
  std::size_t differ_g = 0, differ_gp = 0;
  const auto& reps = summary.reports;
  for (std::size_t i = 0; i < reps.size(); ++i) {
    for (std::size_t j = i + 1; j < reps.size(); ++j) {
      ++summary.pairs;
      differ_g += cosine_similarity(reps[i].g.data(), reps[j].g.data()) < options.cosine_threshold;
      differ_gp += cosine_similarity(reps[i].g_prime.data(), reps[j].g_prime.data()) <
                   options.cosine_threshold;
    }
  }
  if (summary.pairs > 0) {
    summary.direction_diversity_g =
        static_cast<double>(differ_g) / static_cast<double>(summary.pairs);
    summary.direction_diversity_gprime =
        static_cast<double>(differ_gp) / static_cast<double>(summary.pairs);
  }
  return summary;
}

}  // namespace eat
