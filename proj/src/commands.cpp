#include "eat/commands.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace eat {
namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void require_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw IoError("missing file " + path.string());
}

void check_dataset_matches(const ExperimentConfig& config, const SampleSet& inliers) {
  if (inliers.dim != config.dataset.input_dim) {
    throw ConfigError("dataset has " + std::to_string(inliers.dim) +
                      " columns but the config says input_dim = " +
                      std::to_string(config.dataset.input_dim));
  }
  for (int label : inliers.labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= config.dataset.num_classes) {
      throw ConfigError("inlier label " + std::to_string(label) + " outside [0, num_classes)");
    }
  }
}

}  // namespace

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return 2;
    case ErrorKind::parse: return 3;
    case ErrorKind::config: return 4;
    case ErrorKind::training_failure: return 5;
    case ErrorKind::numeric_domain: return 6;
    case ErrorKind::contract: return 7;
    case ErrorKind::undefined_metric: return 8;
    case ErrorKind::oracle_failure: return 9;
  }
  return 1;
}

fs::path resolve_output_dir(const std::optional<fs::path>& flag, const ExperimentConfig& config) {
  if (flag) return *flag;
  if (!config.output_dir.empty()) return config.output_dir;
  if (const char* root = std::getenv(kOutputRootEnv); root != nullptr && *root != '\0') {
    return fs::path(root);
  }
  return fs::path("eat-out");
}

ExperimentConfig resolve_config(const std::optional<fs::path>& path,
                                std::optional<std::uint64_t> seed) {
  ExperimentConfig config = path ? load_config(*path) : ExperimentConfig{};
  if (seed) config = config.with_seed(*seed);
  config.validate();
  return config;
}

void cmd_synth(const ExperimentConfig& config, const fs::path& out) {
  const auto data = synthesize(config);
  ensure_dir(out);
  write_samples_csv(data.train_in, out / files::train_in);
  write_samples_csv(data.train_ood, out / files::train_ood);
  write_samples_csv(data.test_in, out / files::test_in);
  write_samples_csv(data.test_ood, out / files::test_ood);
  write_text(out / files::config, config_to_string(config));
}

void cmd_train(const ExperimentConfig& config, const fs::path& data_dir, const fs::path& out) {
  require_file(data_dir / files::train_in);
  ExperimentData data;
  data.train_in = read_samples_csv(data_dir / files::train_in);
  check_dataset_matches(config, data.train_in);
  if (outlier_objective(config.train.method) != OutlierObjective::none) {
    require_file(data_dir / files::train_ood);
    data.train_ood = read_samples_csv(data_dir / files::train_ood);
  } else {
    data.train_ood = SampleSet(data.train_in.dim);
  }
  const auto trained = train_model(config, data);
  ensure_dir(out);
  save_checkpoint(trained.params, out / files::checkpoint);
  write_loss_trace_csv(trained.trace, out / files::loss_trace);
}

void cmd_score(const ScoreOptions& options) {
  require_file(options.checkpoint);
  require_file(options.inliers);
  require_file(options.outliers);
  const auto params = load_checkpoint(options.checkpoint);
  const auto inliers = read_samples_csv(options.inliers);
  const auto outliers = read_samples_csv(options.outliers);
  const Detector detector = options.detector.value_or(
      params.arch.num_abstention > 0 ? Detector::ensemble : Detector::msp);
  const auto records =
      score_test_sets(params, inliers, outliers, detector, kernels::Execution::serial);
  write_scores_csv(records, options.out_file);
}

MetricsReport cmd_metrics(const fs::path& scores, const OperatingPoints& points,
                          const fs::path& out) {
  require_file(scores);
  const auto records = read_scores_csv(scores);
  auto report = compute_report(records, points);
  ensure_dir(out);
  write_text(out / files::report_text, report.to_text());
  write_text(out / files::report_json, report.to_json());
  return report;
}

std::string cmd_gradcheck(const ExperimentConfig& config, const GradcheckOptions& options) {
  require_file(options.outliers);
  auto outliers = read_samples_csv(options.outliers);
  if (outliers.empty()) throw ContractViolation("gradcheck needs at least one outlier row");
  if (outliers.size() > options.max_samples) {
    std::vector<std::size_t> first(options.max_samples);
    for (std::size_t i = 0; i < first.size(); ++i) first[i] = i;
    outliers = outliers.subset(first);
  }
  ModelParams params;
  if (options.checkpoint) {
    require_file(*options.checkpoint);
    params = load_checkpoint(*options.checkpoint);
  } else {
    params = initial_params(config.train, outliers.dim, config.dataset.num_classes);
  }
  if (params.arch.input_dim != outliers.dim) {
    throw ConfigError("outlier file has " + std::to_string(outliers.dim) +
                      " columns but the model expects " + std::to_string(params.arch.input_dim));
  }
  Prop1Options opt;
  opt.head = options.head;
  opt.finite_differences = options.finite_differences;
  const auto summary = verify_prop1(params, outliers, opt);

  std::ostringstream csv;
  csv << "head,sample,virtual_label,max_rel_err_g,max_rel_err_gprime,max_rel_err_g_fd,"
         "max_rel_err_gprime_fd\n";
  for (const auto& r : summary.reports) {
    csv << options.head << ',' << r.sample << ',' << r.virtual_label << ','
        << format_double(r.max_rel_err_g) << ',' << format_double(r.max_rel_err_gprime) << ','
        << format_double(r.max_rel_err_g_fd) << ',' << format_double(r.max_rel_err_gprime_fd)
        << '\n';
  }
  std::ostringstream line;
  line << "samples=" << summary.reports.size() << " pairs=" << summary.pairs
       << " diversity_g=" << format_double(summary.direction_diversity_g)
       << " diversity_gprime=" << format_double(summary.direction_diversity_gprime)
       << " worst_g=" << format_double(summary.worst_rel_err_g)
       << " worst_gprime=" << format_double(summary.worst_rel_err_gprime)
       << " worst_g_fd=" << format_double(summary.worst_rel_err_g_fd)
       << " worst_gprime_fd=" << format_double(summary.worst_rel_err_gprime_fd);
  csv << "# summary " << line.str() << '\n';
  write_text(options.out_file, csv.str());
  return line.str();
}

SweepSummary cmd_sweep(const ExperimentConfig& config, std::size_t seeds, const fs::path& out,
                       int threads) {
  auto summary = run_sweep(config, seeds, threads);
  ensure_dir(out);
  write_text(out / files::sweep_text, summary.to_text());
  write_text(out / files::sweep_json, summary.to_json());
  std::ostringstream runs;
  runs << "seed";
  for (const auto& key : summary.keys) runs << ',' << key;
  runs << '\n';
  for (std::size_t i = 0; i < summary.reports.size(); ++i) {
    runs << summary.seeds[i];
    for (const auto& [k, v] : summary.reports[i].entries()) runs << ',' << v;
    runs << '\n';
  }
  write_text(out / files::sweep_runs, runs.str());
  return summary;
}

}  // namespace eat
