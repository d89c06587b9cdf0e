#include "eat/experiment.hpp"

#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>
#include <omp.h>

#include "eat/errors.hpp"

namespace eat {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
  }
  if (pos != v.size() || x < 0) {
    throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
  }
  return static_cast<std::size_t>(x);
}

double to_real(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  if (pos != v.size() || !std::isfinite(x)) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return x;
}

std::vector<double> to_percent_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(to_real(key, trim(item)) / 100.0);
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::string join_percent(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += percent_label(values[i]);
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"num_classes", [](auto& c, auto& k, auto& v) { c.dataset.num_classes = to_size(k, v); }},
      {"imbalance_ratio", [](auto& c, auto& k, auto& v) { c.dataset.imbalance_ratio = to_real(k, v); }},
      {"head_count", [](auto& c, auto& k, auto& v) { c.dataset.head_count = to_size(k, v); }},
      {"geometry", [](auto& c, auto&, auto& v) { c.dataset.geometry = parse_geometry(v); }},
      {"input_dim", [](auto& c, auto& k, auto& v) { c.dataset.input_dim = to_size(k, v); }},
      {"grid_width", [](auto& c, auto& k, auto& v) { c.dataset.grid_width = to_size(k, v); }},
      {"grid_height", [](auto& c, auto& k, auto& v) { c.dataset.grid_height = to_size(k, v); }},
      {"noise", [](auto& c, auto& k, auto& v) { c.dataset.noise = to_real(k, v); }},
      {"pattern_seed", [](auto& c, auto& k, auto& v) { c.dataset.pattern_seed = to_size(k, v); }},
      {"test_per_class", [](auto& c, auto& k, auto& v) { c.test_per_class = to_size(k, v); }},
      {"ood_mode", [](auto& c, auto&, auto& v) { c.ood_mode = parse_ood_mode(v); }},
      {"ood_train_count", [](auto& c, auto& k, auto& v) { c.ood_train_count = to_size(k, v); }},
      {"ood_test_count", [](auto& c, auto& k, auto& v) { c.ood_test_count = to_size(k, v); }},
      {"ood_patterns", [](auto& c, auto& k, auto& v) { c.ood_patterns = to_size(k, v); }},
      {"method", [](auto& c, auto&, auto& v) { c.train.method = parse_method(v); }},
      {"lambda", [](auto& c, auto& k, auto& v) { c.train.lambda = to_real(k, v); }},
      {"k", [](auto& c, auto& k, auto& v) { c.train.num_abstention = to_size(k, v); }},
      {"m", [](auto& c, auto& k, auto& v) { c.train.num_heads = to_size(k, v); }},
      {"hidden_dim", [](auto& c, auto& k, auto& v) { c.train.hidden_dim = to_size(k, v); }},
      {"epochs_stage1", [](auto& c, auto& k, auto& v) { c.train.epochs_stage1 = to_size(k, v); }},
      {"epochs_stage2", [](auto& c, auto& k, auto& v) { c.train.epochs_stage2 = to_size(k, v); }},
      {"lr_stage1", [](auto& c, auto& k, auto& v) { c.train.lr_stage1 = to_real(k, v); }},
      {"lr_stage2", [](auto& c, auto& k, auto& v) { c.train.lr_stage2 = to_real(k, v); }},
      {"momentum", [](auto& c, auto& k, auto& v) { c.train.momentum = to_real(k, v); }},
      {"batch_size", [](auto& c, auto& k, auto& v) { c.train.batch_size = to_size(k, v); }},
      {"w_gen", [](auto& c, auto& k, auto& v) { c.train.generated_weight = to_real(k, v); }},
      {"augment_count_per_batch",
       [](auto& c, auto& k, auto& v) { c.train.augment_count_per_batch = to_size(k, v); }},
      {"seed", [](auto& c, auto& k, auto& v) { c.train.seed = to_size(k, v); c.dataset.seed = c.train.seed; }},
      {"tpr_points", [](auto& c, auto& k, auto& v) { c.points.tpr = to_percent_list(k, v); }},
      {"fpr_points", [](auto& c, auto& k, auto& v) { c.points.fpr = to_percent_list(k, v); }},
      {"output_dir", [](auto& c, auto&, auto& v) { c.output_dir = v; }},
      {"sweep_seeds", [](auto& c, auto& k, auto& v) { c.sweep_seeds = to_size(k, v); }},
  };
  return table;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return seed * 0x9e3779b97f4a7c15ULL + stream * 0xbf58476d1ce4e5b9ULL + 1;
}

}  // namespace

void ExperimentConfig::validate() const {
  dataset.validate();
  train.validate();
  if (test_per_class == 0) throw ConfigError("test_per_class must be positive");
  if (ood_test_count == 0) throw ConfigError("ood_test_count must be positive");
  if (train.method != Method::msp_baseline && ood_train_count == 0) {
    throw ConfigError("ood_train_count must be positive for methods that use outliers");
  }
  for (double t : points.tpr) {
    if (!(t > 0.0 && t <= 1.0)) throw ConfigError("tpr_points must lie in (0, 100]");
  }
  for (double f : points.fpr) {
    if (!(f >= 0.0 && f < 1.0)) throw ConfigError("fpr_points must lie in [0, 100)");
  }
}

std::optional<GridShape> ExperimentConfig::grid() const {
  if (dataset.geometry != Geometry::grid_image) return std::nullopt;
  return GridShape{dataset.grid_width, dataset.grid_height};
}

ExperimentConfig ExperimentConfig::with_seed(std::uint64_t seed) const {
  ExperimentConfig c = *this;
  c.train.seed = seed;
  c.dataset.seed = seed;
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (!setters().contains(key)) throw ConfigError("unknown config key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("duplicate config key '" + key + "'");
    entries.emplace_back(std::move(key), std::move(value));
  }
  ExperimentConfig config;
  for (const auto& [k, v] : entries) {
    if (k == "method") config.train = preset(parse_method(v));
  }
  bool explicit_dim = false;
  for (const auto& [k, v] : entries) {
    setters().at(k)(config, k, v);
    explicit_dim = explicit_dim || k == "input_dim";
  }
  if (config.dataset.geometry == Geometry::grid_image && !explicit_dim) {
    config.dataset.input_dim = config.dataset.grid_width * config.dataset.grid_height;
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string config_to_string(const ExperimentConfig& c) {
  std::ostringstream o;
  const auto& d = c.dataset;
  const auto& t = c.train;
  o << "method = " << to_string(t.method) << '\n'
    << "num_classes = " << d.num_classes << '\n'
    << "imbalance_ratio = " << format_double(d.imbalance_ratio) << '\n'
    << "head_count = " << d.head_count << '\n'
    << "geometry = " << to_string(d.geometry) << '\n'
    << "input_dim = " << d.input_dim << '\n'
    << "grid_width = " << d.grid_width << '\n'
    << "grid_height = " << d.grid_height << '\n'
    << "noise = " << format_double(d.noise) << '\n'
    << "pattern_seed = " << d.pattern_seed << '\n'
    << "test_per_class = " << c.test_per_class << '\n'
    << "ood_mode = " << to_string(c.ood_mode) << '\n'
    << "ood_train_count = " << c.ood_train_count << '\n'
    << "ood_test_count = " << c.ood_test_count << '\n'
    << "ood_patterns = " << c.ood_patterns << '\n'
    << "lambda = " << format_double(t.lambda) << '\n'
    << "k = " << t.num_abstention << '\n'
    << "m = " << t.num_heads << '\n'
    << "hidden_dim = " << t.hidden_dim << '\n'
    << "epochs_stage1 = " << t.epochs_stage1 << '\n'
    << "epochs_stage2 = " << t.epochs_stage2 << '\n'
    << "lr_stage1 = " << format_double(t.lr_stage1) << '\n'
    << "lr_stage2 = " << format_double(t.lr_stage2) << '\n'
    << "momentum = " << format_double(t.momentum) << '\n'
    << "batch_size = " << t.batch_size << '\n'
    << "w_gen = " << format_double(t.generated_weight) << '\n'
    << "augment_count_per_batch = " << t.augment_count_per_batch << '\n'
    << "seed = " << t.seed << '\n'
    << "tpr_points = " << join_percent(c.points.tpr) << '\n'
    << "fpr_points = " << join_percent(c.points.fpr) << '\n'
    << "sweep_seeds = " << c.sweep_seeds << '\n';
  if (!c.output_dir.empty()) o << "output_dir = " << c.output_dir.string() << '\n';
  return o.str();
}

ExperimentData synthesize(const ExperimentConfig& config) {
  config.validate();
  ExperimentData data;
  const std::uint64_t seed = config.dataset.seed;

  LongTailSpec train_spec = config.dataset;
  train_spec.seed = mix_seed(seed, 0);
  data.train_in = gen_longtail(train_spec);

  LongTailSpec test_spec = config.dataset;
  test_spec.imbalance_ratio = 1.0;
  test_spec.head_count = config.test_per_class;
  test_spec.seed = mix_seed(seed, 2);
  data.test_in = gen_longtail(test_spec);

  OodSpec ood;
  ood.dim = config.dataset.input_dim;
  ood.mode = config.ood_mode;
  ood.num_inlier_patterns = config.dataset.num_classes;
  ood.num_ood_patterns = config.ood_patterns;
  ood.noise = config.dataset.noise;
  ood.pattern_seed = config.dataset.pattern_seed;
  if (config.ood_train_count > 0) {
    ood.count = config.ood_train_count;
    ood.seed = mix_seed(seed, 1);
    data.train_ood = gen_ood(ood);
  } else {
    data.train_ood = SampleSet(config.dataset.input_dim);
  }
  ood.count = config.ood_test_count;
  ood.seed = mix_seed(seed, 3);
  data.test_ood = gen_ood(ood);
  return data;
}

TrainResult train_model(const ExperimentConfig& config, const ExperimentData& data) {
  Stage1Options options;
  options.grid = config.grid();
  const std::size_t C = config.dataset.num_classes;
  auto stage1 = train_stage1(config.train, C, data.train_in, data.train_ood, options);
  if (config.train.epochs_stage2 == 0) return stage1;
  const auto priors = ClassPriors::from_labels(data.train_in.labels, C);
  auto stage2 = finetune_stage2(config.train, std::move(stage1.params), data.train_in, priors);
  stage1.trace.insert(stage1.trace.end(), stage2.trace.begin(), stage2.trace.end());
  return TrainResult{std::move(stage2.params), std::move(stage1.trace)};
}

std::vector<ScoreRecord> score_test_sets(const ModelParams& params, const SampleSet& test_in,
                                         const SampleSet& test_ood, Detector detector,
                                         kernels::Execution exec) {
  auto records = score_samples(params, test_in, false, detector, exec);
  auto ood = score_samples(params, test_ood, true, detector, exec);
  records.insert(records.end(), ood.begin(), ood.end());
  return records;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const auto data = synthesize(config);
  ExperimentResult result;
  result.trained = train_model(config, data);
  result.records = score_test_sets(result.trained.params, data.test_in, data.test_ood,
                                   default_detector(config.train.method));
  result.report = compute_report(result.records, config.points);
  return result;
}

SweepSummary summarize(const std::vector<std::uint64_t>& seeds,
                       const std::vector<MetricsReport>& reports) {
  SweepSummary s;
  s.seeds = seeds;
  s.reports = reports;
  if (reports.empty()) return s;
  for (const auto& [k, v] : reports.front().entries()) s.keys.push_back(k);
  for (const auto& key : s.keys) {
    std::vector<double> xs;
    for (const auto& r : reports) {
      for (const auto& [k, v] : r.entries()) {
        if (k == key && v != "nan") xs.push_back(std::strtod(v.c_str(), nullptr));
      }
    }
    if (xs.empty()) {
      s.mean[key] = NAN;
      s.stddev[key] = NAN;
      continue;
    }
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    s.mean[key] = mean;
    s.stddev[key] = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
  }
  return s;
}

std::string SweepSummary::to_text() const {
  std::string out = "runs = " + std::to_string(reports.size()) + "\n";
  for (const auto& key : keys) {
    const double m = mean.at(key);
    const double sd = stddev.at(key);
    out += key + " = " + (std::isnan(m) ? std::string("nan") : format_double(m)) + " +- " +
           (std::isnan(sd) ? std::string("nan") : format_double(sd)) + "\n";
  }
  return out;
}

std::string SweepSummary::to_json() const {
  nlohmann::ordered_json j;
  j["runs"] = reports.size();
  j["seeds"] = seeds;
  for (const auto& key : keys) {
    const double m = mean.at(key);
    const double sd = stddev.at(key);
    j["mean"][key] = std::isnan(m) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(m);
    j["std"][key] = std::isnan(sd) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(sd);
  }
  return j.dump(2) + "\n";
}

SweepSummary run_sweep(const ExperimentConfig& config, std::size_t num_seeds, int threads) {
  if (num_seeds == 0) throw ConfigError("a sweep needs at least one seed");
  std::vector<std::uint64_t> seeds(num_seeds);
  for (std::size_t i = 0; i < num_seeds; ++i) seeds[i] = config.train.seed + i;
  std::vector<MetricsReport> reports(num_seeds);
  std::vector<std::exception_ptr> errors(num_seeds);
  const int n_threads = threads > 0 ? threads : omp_get_max_threads();
  const auto n = static_cast<std::ptrdiff_t>(num_seeds);
#pragma omp parallel for schedule(dynamic) num_threads(n_threads)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      reports[static_cast<std::size_t>(i)] =
          run_experiment(config.with_seed(seeds[static_cast<std::size_t>(i)])).report;
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return summarize(seeds, reports);
}

}  // namespace eat
