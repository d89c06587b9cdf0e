#include "eat/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include "eat/errors.hpp"

namespace eat {
namespace {

constexpr std::uint64_t kStage1Tag = 0x5354414745310000ULL;
constexpr std::uint64_t kStage2Tag = 0x5354414745320000ULL;

class MomentumSgd {
 public:
  MomentumSgd(std::vector<Tensor*> params, double momentum)
      : params_(std::move(params)), momentum_(momentum) {
    for (auto* p : params_) velocity_.emplace_back(p->size(), 0.0);
  }

  void zero_grad() {
    for (auto* p : params_) {
      p->ensure_grad();
      p->zero_grad();
    }
  }

  void step(double lr) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto data = params_[i]->data();
      auto grad = params_[i]->grad();
      auto& v = velocity_[i];
      for (std::size_t j = 0; j < data.size(); ++j) {
        v[j] = momentum_ * v[j] + grad[j];
        data[j] -= lr * v[j];
      }
    }
  }

  void drop_grads() {
    for (auto* p : params_) p->drop_grad();
  }

 private:
  std::vector<Tensor*> params_;
  std::vector<std::vector<double>> velocity_;
  double momentum_;
};

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

std::vector<std::size_t> class_counts(const SampleSet& set, std::size_t num_classes) {
  std::vector<std::size_t> counts(num_classes, 0);
  for (int y : set.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw ContractViolation("inlier label out of range");
    }
    ++counts[static_cast<std::size_t>(y)];
  }
  return counts;
}

}  // namespace

Method parse_method(const std::string& text) {
  if (text == "eat" || text == "EAT") return Method::eat;
  if (text == "oe" || text == "oe-baseline" || text == "OE-baseline") return Method::oe_baseline;
  if (text == "msp" || text == "msp-baseline" || text == "MSP-baseline") return Method::msp_baseline;
  throw ConfigError("unknown method '" + text + "'");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::eat: return "eat";
    case Method::oe_baseline: return "oe-baseline";
    case Method::msp_baseline: return "msp-baseline";
  }
  return "unknown";
}

OutlierObjective outlier_objective(Method method) {
  switch (method) {
    case Method::eat: return OutlierObjective::virtual_label;
    case Method::oe_baseline: return OutlierObjective::oe_uniform;
    case Method::msp_baseline: return OutlierObjective::none;
  }
  return OutlierObjective::none;
}

Detector default_detector(Method method) {
  return method == Method::eat ? Detector::ensemble : Detector::msp;
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(lr_stage1 > 0.0) || !(lr_stage2 > 0.0)) throw ConfigError("learning rates must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (num_heads == 0) throw ConfigError("num_heads must be positive");
  if (hidden_dim == 0) throw ConfigError("hidden_dim must be positive");
  if (!(generated_weight > 0.0 && generated_weight <= 1.0)) {
    throw ConfigError("w_gen must lie in (0, 1]");
  }
  if (method == Method::eat && num_abstention == 0) {
    throw ConfigError("EAT needs at least one abstention class (k >= 1)");
  }
}

Architecture TrainConfig::architecture(std::size_t input_dim, std::size_t num_classes) const {
  return Architecture{input_dim, hidden_dim, num_classes, num_abstention, num_heads};
}

TrainConfig preset(Method method) {
  TrainConfig c;
  c.method = method;
  if (method != Method::eat) {
    c.num_abstention = 0;
    c.num_heads = 1;
    c.augment_count_per_batch = 0;
    c.epochs_stage2 = 0;
  }
  return c;
}

double cosine_lr(double base, std::size_t step, std::size_t total_steps) {
  if (total_steps == 0) return base;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return 0.5 * base * (1.0 + std::cos(std::numbers::pi * t));
}

ModelParams initial_params(const TrainConfig& config, std::size_t input_dim,
                           std::size_t num_classes) {
  return init_params(config.architecture(input_dim, num_classes), config.seed);
}

TrainResult train_stage1(const TrainConfig& config, std::size_t num_classes,
                         const SampleSet& inliers, const SampleSet& outliers,
                         const Stage1Options& options) {
  return train_stage1(config, initial_params(config, inliers.dim, num_classes), inliers,
                      outliers, options);
}

TrainResult train_stage1(const TrainConfig& config, ModelParams init, const SampleSet& inliers,
                         const SampleSet& outliers, const Stage1Options& options) {
  config.validate();
  if (inliers.empty()) throw ContractViolation("stage 1 needs a nonempty inlier set");
  const auto objective = outlier_objective(config.method);
  if (outliers.empty() && objective != OutlierObjective::none) {
    throw ConfigError("only the MSP baseline may train without outliers");
  }
  const auto& arch = init.arch;
  if (inliers.dim != arch.input_dim || (!outliers.empty() && outliers.dim != arch.input_dim)) {
    throw ContractViolation("sample dimension does not match the model input");
  }
  TrainResult result{std::move(init), {}};
  if (config.epochs_stage1 == 0) return result;

  ModelParams& params = result.params;
  const std::size_t C = arch.num_classes;
  const std::size_t k = arch.num_abstention;
  auto rng = std::mt19937_64(config.seed ^ kStage1Tag);

  // CutMix sources: tail classes are foregrounds, head classes and outliers backgrounds.
  SampleSet tail_set, head_set;
  const bool augment = config.method == Method::eat && config.augment_count_per_batch > 0 &&
                       options.grid.has_value();
  bool have_tail = false;
  if (augment) {
    const auto counts = class_counts(inliers, C);
    const auto tail = tail_classes(counts);
    std::vector<std::size_t> tail_idx, head_idx;
    for (std::size_t i = 0; i < inliers.size(); ++i) {
      const bool is_tail = std::find(tail.begin(), tail.end(), inliers.labels[i]) != tail.end();
      (is_tail ? tail_idx : head_idx).push_back(i);
    }
    tail_set = inliers.subset(tail_idx);
    head_set = inliers.subset(head_idx);
    have_tail = !tail_set.empty();
  }
  const BackgroundPool pool{&head_set, &outliers};

  const std::size_t B = config.batch_size;
  const std::size_t steps_per_epoch = (inliers.size() + B - 1) / B;
  const std::size_t total_steps = steps_per_epoch * config.epochs_stage1;
  MomentumSgd optimizer(params.tensors(), config.momentum);

  auto in_order = iota_indices(inliers.size());
  auto out_order = iota_indices(outliers.size());
  std::size_t global_step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs_stage1; ++epoch) {
    std::shuffle(in_order.begin(), in_order.end(), rng);
    std::shuffle(out_order.begin(), out_order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      if (options.max_steps && global_step >= *options.max_steps) break;
      const std::size_t begin = s * B;
      const std::size_t end = std::min(begin + B, inliers.size());
      std::span<const std::size_t> rows(in_order.data() + begin, end - begin);
      SampleSet in_batch = inliers.subset(rows);
      if (augment && have_tail) {
        in_batch = concat(in_batch, make_tail_augmented_batch(tail_set, pool,
                                                              config.augment_count_per_batch,
                                                              config.generated_weight,
                                                              *options.grid, rng));
      }

      Graph graph;
      const auto in_fwd = forward_graph(graph, params, in_batch.matrix());
      std::vector<Graph::Var> out_logits;
      if (objective != OutlierObjective::none) {
        std::vector<std::size_t> out_rows(B);
        for (std::size_t i = 0; i < B; ++i) out_rows[i] = out_order[(begin + i) % outliers.size()];
        out_logits = forward_graph(graph, params, outliers.subset(out_rows).matrix()).logits;
      }
      ObjectiveTerms terms;
      try {
        terms = total_loss(graph, in_fwd.logits, in_batch.labels, in_batch.weights, out_logits,
                           config.lambda, C, k, objective);
      } catch (const NumericDomainError& e) {
        throw TrainingFailure(std::string("stage 1 diverged: ") + e.what(), epoch, s);
      }
      const double loss = graph.scalar(terms.total);
      if (!std::isfinite(loss)) throw TrainingFailure("stage 1 loss is non-finite", epoch, s);

      const double lr = cosine_lr(config.lr_stage1, global_step, total_steps);
      if (options.steps != nullptr) {
        options.steps->push_back({epoch, s, terms.inlier, terms.outlier, loss, lr});
      }
      optimizer.zero_grad();
      graph.backward(terms.total);
      optimizer.step(lr);
      try {
        for (const auto* t : params.tensors()) t->require_finite("stage 1 parameters");
      } catch (const NumericDomainError& e) {
        throw TrainingFailure(e.what(), epoch, s);
      }

      epoch_loss += loss;
      ++epoch_steps;
      ++global_step;
    }
    if (epoch_steps > 0) {
      result.trace.push_back({epoch, "stage1", epoch_loss / static_cast<double>(epoch_steps)});
    }
    if (options.max_steps && global_step >= *options.max_steps) break;
  }
  optimizer.drop_grads();
  return result;
}

TrainResult finetune_stage2(const TrainConfig& config, ModelParams params,
                            const SampleSet& inliers, const ClassPriors& priors) {
  config.validate();
  if (inliers.empty()) throw ContractViolation("stage 2 needs a nonempty inlier set");
  if (priors.size() != params.arch.num_classes) {
    throw ContractViolation("stage 2 priors must cover exactly the inlier classes");
  }
  TrainResult result{std::move(params), {}};
  if (config.epochs_stage2 == 0) return result;

  ModelParams& p = result.params;
  auto rng = std::mt19937_64(config.seed ^ kStage2Tag);
  const std::size_t B = config.batch_size;
  const std::size_t steps_per_epoch = (inliers.size() + B - 1) / B;
  const std::size_t total_steps = steps_per_epoch * config.epochs_stage2;
  MomentumSgd optimizer(p.head_tensors(), config.momentum);
  auto order = iota_indices(inliers.size());
  std::size_t global_step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs_stage2; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const std::size_t begin = s * B;
      const std::size_t end = std::min(begin + B, inliers.size());
      const SampleSet batch =
          inliers.subset(std::span<const std::size_t>(order.data() + begin, end - begin));
      Graph graph;
      const auto fwd = forward_graph(graph, p, batch.matrix(), /*train_extractor=*/false);
      Graph::Var total{};
      try {
        for (std::size_t h = 0; h < fwd.logits.size(); ++h) {
          auto term = la_loss_batch(graph, fwd.logits[h], batch.labels, priors);
          total = h == 0 ? term : graph.add(total, term);
        }
      } catch (const NumericDomainError& e) {
        throw TrainingFailure(std::string("stage 2 diverged: ") + e.what(), epoch, s);
      }
      const double loss = graph.scalar(total);
      if (!std::isfinite(loss)) throw TrainingFailure("stage 2 loss is non-finite", epoch, s);
      optimizer.zero_grad();
      graph.backward(total);
      optimizer.step(cosine_lr(config.lr_stage2, global_step, total_steps));
      try {
        for (const auto* t : p.head_tensors()) t->require_finite("stage 2 head parameters");
      } catch (const NumericDomainError& e) {
        throw TrainingFailure(e.what(), epoch, s);
      }
      epoch_loss += loss;
      ++global_step;
    }
    result.trace.push_back({epoch, "stage2", epoch_loss / static_cast<double>(steps_per_epoch)});
  }
  optimizer.drop_grads();
  return result;
}

void write_loss_trace_csv(const std::vector<LossTracePoint>& trace,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,split,mean_loss\n";
  for (const auto& t : trace) out << t.epoch << ',' << t.split << ',' << format_double(t.mean_loss) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace eat
