// eat: synthesize data, train, score, report metrics, check gradients, sweep seeds.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "eat/commands.hpp"

namespace fs = std::filesystem;

namespace {

struct Common {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "configuration file (key = value lines)");
  cmd->add_option("-s,--seed", c.seed, "run seed; overrides the config");
  cmd->add_option("-o,--out", c.out,
                  std::string("output directory (default: config output_dir, then $") +
                      eat::kOutputRootEnv + ", then ./eat-out)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-tailed OOD detection experiments"};
  app.require_subcommand(1);

  Common synth_opts;
  auto* synth = app.add_subcommand("synth", "write train/test inlier and OOD sample files");
  add_common(synth, synth_opts);

  Common train_opts;
  std::optional<fs::path> train_data;
  auto* train = app.add_subcommand("train", "train a model from synthesized sample files");
  add_common(train, train_opts);
  train->add_option("-d,--data", train_data, "directory holding train_in.csv / train_ood.csv");

  eat::ScoreOptions score_opts;
  std::string detector = "auto";
  std::optional<fs::path> score_out;
  std::optional<fs::path> score_data;
  auto* score = app.add_subcommand("score", "score test inliers and OOD samples");
  score->add_option("-m,--model", score_opts.checkpoint, "checkpoint file")->required();
  score->add_option("-d,--data", score_data,
                    "directory holding test_in.csv / test_ood.csv (default: model directory)");
  score->add_option("--inliers", score_opts.inliers, "inlier sample file");
  score->add_option("--outliers", score_opts.outliers, "OOD sample file");
  score->add_option("--detector", detector, "auto, ensemble or msp")
      ->check(CLI::IsMember({"auto", "ensemble", "msp"}));
  score->add_option("-o,--out", score_out, "score CSV path (default: next to the model)");

  fs::path metrics_scores;
  Common metrics_opts;
  auto* metrics = app.add_subcommand("metrics", "compute the metric report from a score CSV");
  metrics->add_option("scores", metrics_scores, "score CSV")->required();
  add_common(metrics, metrics_opts);

  Common grad_opts;
  eat::GradcheckOptions grad;
  std::optional<fs::path> grad_model;
  bool no_fd = false;
  auto* gradcheck =
      app.add_subcommand("gradcheck", "compare analytic gradient noise with autodiff and FD");
  add_common(gradcheck, grad_opts);
  gradcheck->add_option("-m,--model", grad_model, "checkpoint (fresh init from config if absent)");
  gradcheck->add_option("--outliers", grad.outliers, "OOD sample file")->required();
  gradcheck->add_option("--head", grad.head, "head index");
  gradcheck->add_option("-n,--max-samples", grad.max_samples, "use at most this many rows");
  gradcheck->add_flag("--no-fd", no_fd, "skip finite differences");

  Common sweep_opts;
  std::optional<std::size_t> sweep_seeds;
  int threads = 0;
  auto* sweep = app.add_subcommand("sweep", "run the full experiment over consecutive seeds");
  add_common(sweep, sweep_opts);
  sweep->add_option("-n,--seeds", sweep_seeds, "number of seeds (default: config sweep_seeds)");
  sweep->add_option("-j,--threads", threads, "worker threads (0 = OpenMP default)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      const auto config = eat::resolve_config(synth_opts.config, synth_opts.seed);
      const auto out = eat::resolve_output_dir(synth_opts.out, config);
      eat::cmd_synth(config, out);
      std::cout << "wrote samples to " << out.string() << "\n";
    } else if (train->parsed()) {
      const auto config = eat::resolve_config(train_opts.config, train_opts.seed);
      const auto out = eat::resolve_output_dir(train_opts.out, config);
      eat::cmd_train(config, train_data.value_or(out), out);
      std::cout << "wrote " << (out / eat::files::checkpoint).string() << "\n";
    } else if (score->parsed()) {
      const fs::path dir = score_data.value_or(score_opts.checkpoint.parent_path());
      if (score_opts.inliers.empty()) score_opts.inliers = dir / eat::files::test_in;
      if (score_opts.outliers.empty()) score_opts.outliers = dir / eat::files::test_ood;
      if (detector != "auto") score_opts.detector = eat::parse_detector(detector);
      score_opts.out_file =
          score_out.value_or(score_opts.checkpoint.parent_path() / eat::files::scores);
      eat::cmd_score(score_opts);
      std::cout << "wrote " << score_opts.out_file.string() << "\n";
    } else if (metrics->parsed()) {
      const auto config = eat::resolve_config(metrics_opts.config, metrics_opts.seed);
      const fs::path out =
          metrics_opts.out ? *metrics_opts.out : metrics_scores.parent_path();
      const auto report = eat::cmd_metrics(metrics_scores, config.points, out);
      std::cout << report.to_text();
    } else if (gradcheck->parsed()) {
      const auto config = eat::resolve_config(grad_opts.config, grad_opts.seed);
      grad.checkpoint = grad_model;
      grad.finite_differences = !no_fd;
      grad.out_file = eat::resolve_output_dir(grad_opts.out, config) / eat::files::gradcheck;
      std::cout << eat::cmd_gradcheck(config, grad) << "\n";
    } else if (sweep->parsed()) {
      const auto config = eat::resolve_config(sweep_opts.config, sweep_opts.seed);
      const auto out = eat::resolve_output_dir(sweep_opts.out, config);
      const auto summary =
          eat::cmd_sweep(config, sweep_seeds.value_or(config.sweep_seeds), out, threads);
      std::cout << summary.to_text();
    }
  } catch (const eat::Error& e) {
    std::cerr << "error [" << eat::to_string(e.kind()) << "]: " << e.what() << "\n";
    return eat::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
