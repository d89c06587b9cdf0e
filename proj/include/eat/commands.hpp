#pragma once

// File-level stages behind the `eat` command line tool. Each stage reads and writes
// plain files so the stages can be run separately or fed external data.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "eat/errors.hpp"
#include "eat/experiment.hpp"
#include "eat/gradnoise.hpp"

namespace eat {

namespace files {
inline constexpr const char* train_in = "train_in.csv";
inline constexpr const char* train_ood = "train_ood.csv";
inline constexpr const char* test_in = "test_in.csv";
inline constexpr const char* test_ood = "test_ood.csv";
inline constexpr const char* config = "config.txt";
inline constexpr const char* checkpoint = "model.ckpt";
inline constexpr const char* loss_trace = "loss_trace.csv";
inline constexpr const char* scores = "scores.csv";
inline constexpr const char* report_text = "report.txt";
inline constexpr const char* report_json = "report.json";
inline constexpr const char* gradcheck = "gradcheck.csv";
inline constexpr const char* sweep_text = "sweep.txt";
inline constexpr const char* sweep_json = "sweep.json";
inline constexpr const char* sweep_runs = "sweep_runs.csv";
}  // namespace files

inline constexpr const char* kOutputRootEnv = "EAT_OUTPUT_ROOT";

/// Process exit code for each error category; 0 is success, 1 anything uncategorized.
int exit_code(ErrorKind kind);

/// --out wins, then the config's output_dir, then $EAT_OUTPUT_ROOT, then ./eat-out.
std::filesystem::path resolve_output_dir(const std::optional<std::filesystem::path>& flag,
                                         const ExperimentConfig& config);

/// Default config, or the file at `path`, with the seed overridden when given.
ExperimentConfig resolve_config(const std::optional<std::filesystem::path>& path,
                                std::optional<std::uint64_t> seed);

/// Writes the four sample files and the resolved config into `out`.
void cmd_synth(const ExperimentConfig& config, const std::filesystem::path& out);

/// Trains on train_in.csv / train_ood.csv from `data_dir`; writes model.ckpt and
/// loss_trace.csv into `out`.
void cmd_train(const ExperimentConfig& config, const std::filesystem::path& data_dir,
               const std::filesystem::path& out);

struct ScoreOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path inliers;
  std::filesystem::path outliers;
  std::optional<Detector> detector;  // ensemble when the model has abstention classes
  std::filesystem::path out_file;
};

void cmd_score(const ScoreOptions& options);

/// Reads a score CSV and writes report.txt and report.json into `out`.
MetricsReport cmd_metrics(const std::filesystem::path& scores, const OperatingPoints& points,
                          const std::filesystem::path& out);

struct GradcheckOptions {
  std::optional<std::filesystem::path> checkpoint;  // fresh init from the config otherwise
  std::filesystem::path outliers;
  std::size_t head = 0;
  std::size_t max_samples = 100;
  bool finite_differences = true;
  std::filesystem::path out_file;
};

/// Writes one CSV row per sample plus a trailing `# summary` line; returns that line.
std::string cmd_gradcheck(const ExperimentConfig& config, const GradcheckOptions& options);

/// Writes sweep.txt, sweep.json and per-run rows into `out`.
SweepSummary cmd_sweep(const ExperimentConfig& config, std::size_t seeds,
                       const std::filesystem::path& out, int threads = 0);

}  // namespace eat
