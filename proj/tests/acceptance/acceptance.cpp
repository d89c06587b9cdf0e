// Acceptance suite. Usage: eat_acceptance [criterion ...]; no arguments runs all nine.
// Prints one PASS/FAIL line per criterion and exits nonzero if any failed.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "eat/augment.hpp"
#include "eat/commands.hpp"
#include "eat/errors.hpp"
#include "eat/gradnoise.hpp"
#include "eat/losses.hpp"
#include "eat/metrics.hpp"
#include "eat/trainer.hpp"
#include "oracles.hpp"

using namespace eat;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double time_limit_s;  // 0 = no limit
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// ---- shared helpers -------------------------------------------------------------

constexpr double kKinkMargin = 1e-3;
constexpr double kFdFloor = 1e-6;

std::vector<double> normal_vector(std::mt19937_64& rng, std::size_t n, double sd) {
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Random small model with nonzero biases.
ModelParams random_model(std::mt19937_64& rng, std::size_t C, std::size_t k, std::size_t m) {
  std::uniform_int_distribution<std::size_t> dim(3, 6);
  Architecture a;
  a.input_dim = dim(rng);
  a.hidden_dim = dim(rng);
  a.num_classes = C;
  a.num_abstention = k;
  a.num_heads = m;
  auto p = init_params(a, rng());
  std::normal_distribution<double> b(0.0, 0.5);
  for (auto* t : {&p.b1, &p.b2}) {
    for (auto& v : t->data()) v = b(rng);
  }
  for (auto& h : p.heads) {
    for (auto& v : h.bias.data()) v = b(rng);
  }
  return p;
}

// True when every ReLU pre-activation for x is at least kKinkMargin away from zero,
// so central differences never straddle a kink.
bool clear_of_kinks(const ModelParams& p, std::span<const double> x) {
  const auto& a = p.arch;
  std::vector<double> h1(a.hidden_dim), h2(a.hidden_dim);
  for (std::size_t j = 0; j < a.hidden_dim; ++j) {
    double s = p.b1[j];
    for (std::size_t i = 0; i < a.input_dim; ++i) s += x[i] * p.w1.at(i, j);
    if (std::abs(s) < kKinkMargin) return false;
    h1[j] = std::max(s, 0.0);
  }
  for (std::size_t j = 0; j < a.hidden_dim; ++j) {
    double s = p.b2[j];
    for (std::size_t i = 0; i < a.hidden_dim; ++i) s += h1[i] * p.w2.at(i, j);
    if (std::abs(s) < kKinkMargin) return false;
  }
  return true;
}

// The virtual label must not flip under a finite-difference probe.
bool clear_abstention_margin(std::span<const Tensor> logits, std::size_t C) {
  for (const auto& z : logits) {
    std::vector<double> abst(z.data().begin() + static_cast<std::ptrdiff_t>(C), z.data().end());
    std::sort(abst.begin(), abst.end(), std::greater<>());
    if (abst.size() > 1 && abst[0] - abst[1] < kKinkMargin) return false;
  }
  return true;
}

// ---- criteria -------------------------------------------------------------------

Outcome noise_identities() {
  std::mt19937_64 rng(101);
  double worst_g = 0, worst_gp = 0, worst_g_fd = 0, worst_gp_fd = 0;
  int pairs = 0, redraws = 0;
  while (pairs < 100) {
    const std::size_t k = 1 + rng() % 3;
    auto p = random_model(rng, 2 + rng() % 3, k, 1 + rng() % 2);
    const auto x = normal_vector(rng, p.arch.input_dim, 1.0);
    const std::size_t head = rng() % p.arch.num_heads;
    const auto logits = forward(p, x);
    if (!clear_of_kinks(p, x) || !clear_abstention_margin(logits, p.arch.num_classes)) {
      ++redraws;
      continue;
    }
    SampleSet one(p.arch.input_dim);
    one.append(x, kUnlabeled);
    Prop1Options opt;
    opt.head = head;
    opt.fd_floor = kFdFloor;
    const auto s = verify_prop1(p, one, opt);
    worst_g = std::max(worst_g, s.worst_rel_err_g);
    worst_gp = std::max(worst_gp, s.worst_rel_err_gprime);
    worst_g_fd = std::max(worst_g_fd, s.worst_rel_err_g_fd);
    worst_gp_fd = std::max(worst_gp_fd, s.worst_rel_err_gprime_fd);
    ++pairs;
  }
  const bool pass = worst_g <= 1e-8 && worst_gp <= 1e-8 && worst_g_fd <= 1e-4 && worst_gp_fd <= 1e-4;
  return {pass, "100 pairs (" + std::to_string(redraws) + " redrawn near kinks); autodiff g " +
                    fmt("%.2e", worst_g) + ", g' " + fmt("%.2e", worst_gp) + " (tol 1e-8); FD g " +
                    fmt("%.2e", worst_g_fd) + ", g' " + fmt("%.2e", worst_gp_fd) + " (tol 1e-4)"};
}

Outcome n_correct_table() {
  struct Row {
    const char* dataset;
    const char* method;
    double acc95;          // percent
    double one_minus_fpr;  // percent
    long long published;
  };
  const std::vector<Row> rows = {
      {"Texture", "OE", 71.43, 31.72, 2266},        {"Texture", "PASCL", 73.11, 32.57, 2381},
      {"Texture", "Ours", 73.76, 32.47, 2395},      {"SVHN", "OE", 64.27, 41.96, 2697},
      {"SVHN", "PASCL", 64.50, 46.55, 3002},        {"SVHN", "Ours", 61.67, 52.22, 3220},
      {"CIFAR10", "OE", 82.67, 19.36, 1601},        {"CIFAR10", "PASCL", 82.30, 20.45, 1683},
      {"CIFAR10", "Ours", 82.61, 22.03, 1820},      {"TinyImageNet", "OE", 76.22, 23.34, 1779},
      {"TinyImageNet", "PASCL", 77.56, 23.89, 1853}, {"TinyImageNet", "Ours", 77.07, 25.11, 1935},
      {"LSUN", "OE", 65.64, 36.02, 2364},           {"LSUN", "PASCL", 68.05, 36.69, 2497},
      {"LSUN", "Ours", 62.07, 44.98, 2791},         {"Places365", "OE", 67.04, 34.28, 2298},
      {"Places365", "PASCL", 69.04, 35.19, 2430},   {"Places365", "Ours", 66.15, 39.15, 2590},
      {"Average", "OE", 71.21, 31.11, 2215},        {"Average", "PASCL", 72.43, 32.56, 2358},
      {"Average", "Ours", 70.55, 36.00, 2540},
  };
  int matched = 0;
  std::string misses;
  for (const auto& r : rows) {
    const double fpr95 = 1.0 - r.one_minus_fpr / 100.0;
    const long long got = n_correct(10000, fpr95, r.acc95 / 100.0);
    if (got == r.published) {
      ++matched;
    } else {
      misses += std::string(misses.empty() ? "" : ", ") + r.dataset + "/" + r.method + " " +
                std::to_string(got) + " vs " + std::to_string(r.published) + " (product " +
                fmt("%.4f", 10000.0 * (1.0 - fpr95) * r.acc95 / 100.0) + ")";
    }
  }
  return {matched == static_cast<int>(rows.size()),
          std::to_string(matched) + "/" + std::to_string(rows.size()) + " rows reproduce" +
              (misses.empty() ? "" : "; mismatches: " + misses)};
}

Outcome metric_oracles() {
  std::mt19937_64 rng(303);
  const OperatingPoints points;
  double worst = 0.0;
  int undefined_mismatch = 0;
  auto compare = [&](double a, double b) { worst = std::max(worst, std::abs(a - b)); };
  auto compare_opt = [&](const std::function<double()>& impl, std::optional<double> ref) {
    std::optional<double> got;
    try {
      got = impl();
    } catch (const UndefinedMetric&) {
    }
    if (got.has_value() != ref.has_value()) {
      ++undefined_mismatch;
    } else if (got) {
      compare(*got, *ref);
    }
  };
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n_in = 1 + rng() % 100;
    const std::size_t n_out = 1 + rng() % 100;
    const int levels = trial % 3 == 0 ? 1000000 : 2 + static_cast<int>(rng() % 20);
    const auto rs = oracle::random_records(rng, n_in, n_out, levels);
    compare(auroc(rs), oracle::auroc(rs));
    compare(aupr(rs), oracle::aupr(rs));
    for (double t : points.tpr) {
      compare(fpr_at_tpr(rs, t), oracle::fpr_at_tpr(rs, t));
      compare_opt([&] { return acc_at_tpr(rs, t); }, oracle::acc_at_tpr(rs, t));
    }
    for (double f : points.fpr) {
      compare_opt([&] { return acc_at_fpr(rs, f); }, oracle::acc_at_fpr(rs, f));
    }
  }
  return {worst <= 1e-12 && undefined_mismatch == 0,
          "500 record sets; max |impl - oracle| " + fmt("%.2e", worst) +
              " (tol 1e-12); undefined-case mismatches " + std::to_string(undefined_mismatch)};
}

Outcome loss_gradients() {
  std::mt19937_64 rng(404);
  double worst_ce = 0, worst_out = 0, worst_oe = 0, worst_la = 0, worst_total = 0;
  int redraws = 0;

  // Gradient of a graph loss with respect to a [1 x n] logit row, against FD of f.
  auto logit_check = [&](const std::vector<double>& z,
                         const std::function<Graph::Var(Graph&, Graph::Var)>& graph_loss,
                         const std::function<double(std::span<const double>)>& f) {
    Tensor leaf = Tensor::matrix(1, z.size(), z);
    Graph g;
    auto loss = graph_loss(g, g.leaf(leaf));
    leaf.zero_grad();
    g.backward(loss);
    const auto fd = finite_diff_grad([&](const Tensor& t) { return f(t.data()); },
                                     Tensor::matrix(1, z.size(), z));
    return max_relative_error(leaf.grad(), fd.data(), kFdFloor);
  };

  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t C = 2 + rng() % 5;
    const std::size_t k = 1 + rng() % 3;
    const std::size_t y = rng() % C;
    auto z = normal_vector(rng, C + k, 2.0);
    worst_ce = std::max(worst_ce, logit_check(
        z,
        [&](Graph& g, Graph::Var v) {
          Tensor t(std::vector<std::size_t>{1, C + k});
          t[y] = 1.0;
          return g.softmax_xent(v, t, {1.0});
        },
        [&](std::span<const double> s) { return ce_loss(s, y); }));

    while (!clear_abstention_margin(std::vector<Tensor>{Tensor::vector(z)}, C)) {
      ++redraws;
      z = normal_vector(rng, C + k, 2.0);
    }
    worst_out = std::max(worst_out, logit_check(
        z,
        [&](Graph& g, Graph::Var v) {
          return g.softmax_xent(v, outlier_targets(g.value(v), C, k, OutlierObjective::virtual_label),
                                {1.0});
        },
        [&](std::span<const double> s) { return outlier_loss(s, C, k); }));
    worst_oe = std::max(worst_oe, logit_check(
        z,
        [&](Graph& g, Graph::Var v) {
          return g.softmax_xent(v, outlier_targets(g.value(v), C, k, OutlierObjective::oe_uniform),
                                {1.0});
        },
        [&](std::span<const double> s) { return oe_uniform_loss(s, C); }));

    auto pi = normal_vector(rng, C, 1.0);
    double total = 0.0;
    for (auto& v : pi) total += (v = std::exp(v));
    for (auto& v : pi) v /= total;
    const ClassPriors priors(pi);
    const std::vector<int> label = {static_cast<int>(y)};
    const auto zc = std::vector<double>(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(C));
    worst_la = std::max(worst_la, logit_check(
        zc, [&](Graph& g, Graph::Var v) { return la_loss_batch(g, v, label, priors); },
        [&](std::span<const double> s) { return la_loss(s, y, priors); }));
  }

  // Weighted total objective through a full model, against FD over every parameter.
  int trials = 0;
  while (trials < 100) {
    const std::size_t C = 2 + rng() % 3;
    const std::size_t k = 1 + rng() % 3;
    auto p = random_model(rng, C, k, 1 + rng() % 3);
    const std::size_t d = p.arch.input_dim;
    const std::size_t n_in = 1 + rng() % 4, n_out = rng() % 3;
    std::vector<double> xin, xout;
    std::vector<int> labels;
    std::vector<double> weights;
    bool ok = true;
    for (std::size_t i = 0; i < n_in; ++i) {
      auto x = normal_vector(rng, d, 1.0);
      ok = ok && clear_of_kinks(p, x);
      xin.insert(xin.end(), x.begin(), x.end());
      labels.push_back(static_cast<int>(rng() % C));
      weights.push_back(rng() % 2 == 0 ? 1.0 : 0.05);
    }
    for (std::size_t i = 0; i < n_out; ++i) {
      auto x = normal_vector(rng, d, 1.0);
      ok = ok && clear_of_kinks(p, x) && clear_abstention_margin(forward(p, x), C);
      xout.insert(xout.end(), x.begin(), x.end());
    }
    if (!ok) {
      ++redraws;
      continue;
    }
    const double lambda = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto objective = trials % 2 == 0 ? OutlierObjective::virtual_label
                                           : OutlierObjective::oe_uniform;
    const Tensor Xin = Tensor::matrix(n_in, d, xin);
    Graph g;
    const auto fin = forward_graph(g, p, Xin);
    std::vector<Graph::Var> fout;
    if (n_out > 0) fout = forward_graph(g, p, Tensor::matrix(n_out, d, xout)).logits;
    const auto terms = total_loss(g, fin.logits, labels, weights, fout, lambda, C, k, objective);
    p.zero_grad();
    g.backward(terms.total);
    const auto analytic = flatten_grad(p);
    const auto fd = finite_diff_grad(
        [&](const Tensor& flat) {
          ModelParams q = p;
          unflatten(q, flat);
          const auto lin = forward_batch(q, Xin);
          std::vector<Tensor> lout;
          if (n_out > 0) lout = forward_batch(q, Tensor::matrix(n_out, d, xout));
          return total_loss_value(lin, labels, weights, lout, lambda, C, k, objective);
        },
        flatten(p));
    worst_total = std::max(worst_total, max_relative_error(analytic.data(), fd.data(), kFdFloor));
    ++trials;
  }

  const double worst = std::max({worst_ce, worst_out, worst_oe, worst_la, worst_total});
  return {worst <= 1e-4, "100 trials each; max rel err CE " + fmt("%.1e", worst_ce) + ", outlier " +
                             fmt("%.1e", worst_out) + ", OE " + fmt("%.1e", worst_oe) + ", LA " +
                             fmt("%.1e", worst_la) + ", weighted total " +
                             fmt("%.1e", worst_total) + " (tol 1e-4; " + std::to_string(redraws) +
                             " redraws)"};
}

Outcome la_identity() {
  std::mt19937_64 rng(505);
  double worst_uniform = 0.0, worst_shift = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t C = 2 + rng() % 9;
    const std::size_t y = rng() % C;
    auto z = normal_vector(rng, C, 3.0);
    worst_uniform = std::max(worst_uniform,
                             std::abs(la_loss(z, y, ClassPriors::uniform(C)) - ce_loss(z, y)));
    auto pi = normal_vector(rng, C, 1.5);
    double total = 0.0;
    for (auto& v : pi) total += (v = std::exp(v));
    for (auto& v : pi) v /= total;
    const ClassPriors priors(pi);
    auto shifted = z;
    for (std::size_t c = 0; c < C; ++c) shifted[c] += std::log(pi[c]);
    worst_shift = std::max(worst_shift, std::abs(la_loss(z, y, priors) - ce_loss(shifted, y)));
  }
  return {worst_uniform <= 1e-12 && worst_shift <= 1e-10,
          "1000 inputs; uniform-prior gap " + fmt("%.2e", worst_uniform) +
              " (tol 1e-12); prior-shift gap " + fmt("%.2e", worst_shift) + " (tol 1e-10)"};
}

Outcome cutmix_laws() {
  std::mt19937_64 rng(606);
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t w = 2 + rng() % 11, h = 2 + rng() % 11;
    const double frac = std::uniform_real_distribution<double>(0.01, 0.99)(rng);
    const auto mask = sample_mask(w, h, frac, rng);
    const auto b = normal_vector(rng, w * h, 1.0);
    const auto f = normal_vector(rng, w * h, 1.0);
    const auto bf = cutmix(b, f, mask);
    const auto fb = cutmix(f, b, mask);
    const auto ones = CutMixMask::from_cells(w, h, std::vector<double>(w * h, 1.0));
    const auto zeros = CutMixMask::from_cells(w, h, std::vector<double>(w * h, 0.0));
    if (cutmix(b, f, ones) != b || cutmix(b, f, zeros) != f) ++violations;
    for (std::size_t i = 0; i < w * h; ++i) {
      if (bf[i] + fb[i] != b[i] + f[i]) ++violations;
      if (bf[i] != (mask.cells()[i] == 1.0 ? b[i] : f[i])) ++violations;
    }
  }
  return {violations == 0, "1000 random masks and image pairs; " + std::to_string(violations) +
                               " violations of complementarity, limits or provenance"};
}

ExperimentConfig default_benchmark() { return ExperimentConfig{}; }

double tail_accuracy(const ModelParams& p, const SampleSet& test, const std::vector<int>& tail) {
  std::size_t n = 0, correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (std::find(tail.begin(), tail.end(), test.labels[i]) == tail.end()) continue;
    ++n;
    correct += static_cast<int>(predict_inlier(p, test.row(i))) == test.labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

Outcome stage2_freeze() {
  double before = 0.0, after = 0.0;
  bool frozen = true;
  const int seeds = 5;
  for (int s = 0; s < seeds; ++s) {
    const auto config = default_benchmark().with_seed(static_cast<std::uint64_t>(s));
    const auto data = synthesize(config);
    Stage1Options opt;
    opt.grid = config.grid();
    const auto stage1 =
        train_stage1(config.train, config.dataset.num_classes, data.train_in, data.train_ood, opt);
    const auto counts = longtail_counts(config.dataset);
    const auto tail = tail_classes(counts);
    const auto priors = ClassPriors::from_labels(data.train_in.labels, config.dataset.num_classes);
    const auto stage2 = finetune_stage2(config.train, stage1.params, data.train_in, priors);
    frozen = frozen && flatten_extractor(stage1.params) == flatten_extractor(stage2.params);
    before += tail_accuracy(stage1.params, data.test_in, tail);
    after += tail_accuracy(stage2.params, data.test_in, tail);
  }
  before /= seeds;
  after /= seeds;
  return {frozen && after >= before,
          std::string("extractor ") + (frozen ? "bit-identical" : "CHANGED") +
              "; mean tail accuracy over 5 seeds " + fmt("%.6f", before) + " -> " +
              fmt("%.6f", after)};
}

Outcome method_ordering() {
  double mean[3] = {0, 0, 0};
  const Method methods[3] = {Method::eat, Method::oe_baseline, Method::msp_baseline};
  for (int m = 0; m < 3; ++m) {
    for (int s = 0; s < 5; ++s) {
      auto config = default_benchmark();
      config.train = preset(methods[m]);
      mean[m] += run_experiment(config.with_seed(static_cast<std::uint64_t>(s))).report.auroc / 5;
    }
  }
  const bool pass = mean[0] > mean[1] && mean[1] > mean[2] && (mean[0] - mean[2]) * 100 >= 5.0;
  return {pass, "5-seed mean AUROC: EAT " + fmt("%.2f", 100 * mean[0]) + ", OE " +
                    fmt("%.2f", 100 * mean[1]) + ", MSP " + fmt("%.2f", 100 * mean[2]) +
                    " (need EAT > OE > MSP and EAT - MSP >= 5)"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const auto root = fs::temp_directory_path() / "eat_acceptance_determinism";
  fs::remove_all(root);
  std::string scores[2], checkpoints[2];
  for (int run = 0; run < 2; ++run) {
    const auto dir = root / ("run" + std::to_string(run));
    const auto config = default_benchmark();
    cmd_synth(config, dir);
    cmd_train(config, dir, dir);
    cmd_score({dir / files::checkpoint, dir / files::test_in, dir / files::test_ood, std::nullopt,
               dir / files::scores});
    scores[run] = slurp(dir / files::scores);
    checkpoints[run] = slurp(dir / files::checkpoint);
  }
  fs::remove_all(root);
  const bool same = !scores[0].empty() && scores[0] == scores[1];
  return {same && checkpoints[0] == checkpoints[1],
          "two synth/train/score runs: score CSVs " +
              std::string(same ? "byte-identical" : "DIFFER") + " (" +
              std::to_string(scores[0].size()) + " bytes); checkpoints " +
              (checkpoints[0] == checkpoints[1] ? "identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "noise-identities", 10.0, noise_identities},
      {2, "n-correct-table", 1.0, n_correct_table},
      {3, "metric-oracles", 30.0, metric_oracles},
      {4, "loss-gradients", 20.0, loss_gradients},
      {5, "la-identity", 0.0, la_identity},
      {6, "cutmix-laws", 0.0, cutmix_laws},
      {7, "stage2-freeze", 0.0, stage2_freeze},
      {8, "method-ordering", 300.0, method_ordering},
      {9, "determinism", 0.0, determinism},
  };
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt("%.2f s", secs);
    if (c.time_limit_s > 0) {
      timing += fmt(", limit %.0f s", c.time_limit_s);
      if (secs > c.time_limit_s) {
        o.pass = false;
        timing += " EXCEEDED";
      }
    }
    std::printf("[%s] %d %s: %s (%s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                timing.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
