#include "eat/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "eat/errors.hpp"

namespace eat {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ tag));
}

constexpr std::uint64_t kPatternTag = 0x7061747465726e00ULL;
constexpr std::uint64_t kInlierTag = 0x696e6c6965720000ULL;
constexpr std::uint64_t kOodTag = 0x6f6f640000000000ULL;

// Binary grid prototype: each cell lit with probability 0.35, at least two cells lit.
std::vector<double> binary_pattern(std::uint64_t pattern_seed, std::size_t index,
                                   std::size_t dim) {
  auto rng = stream(pattern_seed ^ kPatternTag, index);
  std::bernoulli_distribution lit(0.35);
  std::vector<double> p(dim, 0.0);
  std::size_t count = 0;
  for (auto& v : p) {
    v = lit(rng) ? 1.0 : 0.0;
    count += v > 0.0;
  }
  std::uniform_int_distribution<std::size_t> cell(0, dim - 1);
  while (count < std::min<std::size_t>(2, dim)) {
    auto& v = p[cell(rng)];
    if (v == 0.0) {
      v = 1.0;
      ++count;
    }
  }
  return p;
}

// Gaussian cluster centre with expected norm 3.
std::vector<double> gaussian_mean(std::uint64_t pattern_seed, std::size_t index,
                                  std::size_t dim) {
  auto rng = stream(pattern_seed ^ kPatternTag ^ 0x6761757373ULL, index);
  std::normal_distribution<double> normal(0.0, 3.0 / std::sqrt(static_cast<double>(dim)));
  std::vector<double> m(dim);
  for (auto& v : m) v = normal(rng);
  return m;
}

void render(const std::vector<double>& prototype, double amplitude, double noise,
            std::mt19937_64& rng, std::vector<double>& out) {
  std::normal_distribution<double> normal(0.0, noise);
  out.resize(prototype.size());
  for (std::size_t i = 0; i < prototype.size(); ++i) {
    out[i] = amplitude * prototype[i] + (noise > 0.0 ? normal(rng) : 0.0);
  }
}

}  // namespace

Geometry parse_geometry(const std::string& text) {
  if (text == "gaussian-clusters") return Geometry::gaussian_clusters;
  if (text == "grid-image") return Geometry::grid_image;
  throw ConfigError("unknown geometry '" + text + "'");
}

std::string to_string(Geometry geometry) {
  return geometry == Geometry::grid_image ? "grid-image" : "gaussian-clusters";
}

OodMode parse_ood_mode(const std::string& text) {
  if (text == "uniform") return OodMode::uniform;
  if (text == "shifted-gaussian") return OodMode::shifted_gaussian;
  if (text == "held-out-patterns") return OodMode::held_out_patterns;
  throw ConfigError("unknown OOD mode '" + text + "'");
}

std::string to_string(OodMode mode) {
  switch (mode) {
    case OodMode::uniform: return "uniform";
    case OodMode::shifted_gaussian: return "shifted-gaussian";
    case OodMode::held_out_patterns: return "held-out-patterns";
  }
  return "unknown";
}

void LongTailSpec::validate() const {
  if (num_classes == 0) throw ConfigError("num_classes must be positive");
  if (!(imbalance_ratio >= 1.0)) throw ConfigError("imbalance_ratio must be >= 1");
  if (head_count == 0) throw ConfigError("head_count must be positive");
  if (input_dim == 0) throw ConfigError("input_dim must be positive");
  if (geometry == Geometry::grid_image && grid_width * grid_height != input_dim) {
    throw ConfigError("grid-image geometry requires input_dim == grid_width * grid_height");
  }
  if (!(noise >= 0.0)) throw ConfigError("noise must be nonnegative");
}

void SampleSet::append(std::span<const double> x, int label, double weight, std::int64_t id) {
  if (x.size() != dim) throw ContractViolation("append: row length differs from set dim");
  values.insert(values.end(), x.begin(), x.end());
  ids.push_back(id < 0 ? static_cast<std::int64_t>(labels.size()) : id);
  labels.push_back(label);
  weights.push_back(weight);
}

SampleSet SampleSet::subset(std::span<const std::size_t> indices) const {
  SampleSet out(dim);
  out.values.reserve(indices.size() * dim);
  for (auto i : indices) {
    if (i >= size()) throw ContractViolation("subset: index out of range");
    out.append(row(i), labels[i], weights[i], ids[i]);
  }
  return out;
}

Tensor SampleSet::matrix() const {
  if (empty()) throw ContractViolation("matrix() of an empty sample set");
  return Tensor::matrix(size(), dim, values);
}

void SampleSet::validate() const {
  if (values.size() != size() * dim || ids.size() != size() || weights.size() != size()) {
    throw ContractViolation("sample set arrays disagree in length");
  }
}

SampleSet concat(const SampleSet& a, const SampleSet& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.dim != b.dim) throw ContractViolation("concat: dimension mismatch");
  SampleSet out = a;
  out.values.insert(out.values.end(), b.values.begin(), b.values.end());
  out.ids.insert(out.ids.end(), b.ids.begin(), b.ids.end());
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.weights.insert(out.weights.end(), b.weights.begin(), b.weights.end());
  return out;
}

std::vector<std::size_t> longtail_counts(const LongTailSpec& spec) {
  spec.validate();
  const std::size_t C = spec.num_classes;
  std::vector<std::size_t> counts(C);
  for (std::size_t c = 0; c < C; ++c) {
    const double exponent = C == 1 ? 0.0 : -static_cast<double>(c) / static_cast<double>(C - 1);
    counts[c] = static_cast<std::size_t>(
        std::llround(static_cast<double>(spec.head_count) * std::pow(spec.imbalance_ratio, exponent)));
  }
  if (counts.back() < 1) {
    throw ConfigError("infeasible long-tail spec: the rarest class would receive no samples");
  }
  return counts;
}

SampleSet gen_longtail(const LongTailSpec& spec) {
  const auto counts = longtail_counts(spec);
  const std::size_t d = spec.input_dim;
  auto rng = stream(spec.seed, kInlierTag);
  std::uniform_real_distribution<double> amplitude(0.7, 1.3);
  SampleSet out(d);
  std::vector<double> x;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const auto prototype = spec.geometry == Geometry::grid_image
                               ? binary_pattern(spec.pattern_seed, c, d)
                               : gaussian_mean(spec.pattern_seed, c, d);
    for (std::size_t i = 0; i < counts[c]; ++i) {
      const double a = spec.geometry == Geometry::grid_image ? amplitude(rng) : 1.0;
      render(prototype, a, spec.noise, rng, x);
      out.append(x, static_cast<int>(c));
    }
  }
  return out;
}

std::vector<std::size_t> ood_pattern_indices(const OodSpec& spec) {
  std::vector<std::size_t> idx(spec.num_ood_patterns);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = spec.num_inlier_patterns + i;
  return idx;
}

SampleSet gen_ood(const OodSpec& spec) {
  if (spec.count == 0) throw ConfigError("OOD count must be positive");
  if (spec.dim == 0) throw ConfigError("OOD dim must be positive");
  if (spec.mode != OodMode::uniform && spec.num_ood_patterns == 0) {
    throw ConfigError("pattern-based OOD modes need at least one held-out pattern");
  }
  auto rng = stream(spec.seed, kOodTag);
  SampleSet out(spec.dim);
  std::vector<double> x(spec.dim);
  const auto patterns = ood_pattern_indices(spec);
  std::uniform_int_distribution<std::size_t> pick(0, patterns.empty() ? 0 : patterns.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> amplitude(0.7, 1.3);
  for (std::size_t i = 0; i < spec.count; ++i) {
    switch (spec.mode) {
      case OodMode::uniform:
        for (auto& v : x) v = unit(rng);
        break;
      case OodMode::shifted_gaussian:
        render(gaussian_mean(spec.pattern_seed, patterns[pick(rng)], spec.dim), 1.0, spec.noise,
               rng, x);
        break;
      case OodMode::held_out_patterns:
        render(binary_pattern(spec.pattern_seed, patterns[pick(rng)], spec.dim), amplitude(rng),
               spec.noise, rng, x);
        break;
    }
    out.append(x, kUnlabeled);
  }
  return out;
}

std::vector<double> class_frequencies(const SampleSet& set, std::size_t num_classes) {
  std::vector<double> freq(num_classes, 0.0);
  std::size_t labeled = 0;
  for (int y : set.labels) {
    if (y < 0) continue;
    if (static_cast<std::size_t>(y) >= num_classes) {
      throw ContractViolation("class_frequencies: label out of range");
    }
    freq[static_cast<std::size_t>(y)] += 1.0;
    ++labeled;
  }
  if (labeled == 0) throw ContractViolation("class_frequencies: no labeled samples");
  for (auto& f : freq) f /= static_cast<double>(labeled);
  return freq;
}

std::uint64_t sample_hash(const SampleSet& set) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  mix(&set.dim, sizeof(set.dim));
  mix(set.ids.data(), set.ids.size() * sizeof(std::int64_t));
  mix(set.labels.data(), set.labels.size() * sizeof(int));
  mix(set.values.data(), set.values.size() * sizeof(double));
  return h;
}

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string samples_to_csv(const SampleSet& set) {
  set.validate();
  std::string out = "id,label";
  for (std::size_t j = 0; j < set.dim; ++j) out += ",w" + std::to_string(j);
  out += '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    out += std::to_string(set.ids[i]);
    out += ',';
    out += std::to_string(set.labels[i]);
    for (double v : set.row(i)) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_real(const std::string& cell, std::size_t line) {
  if (cell.empty()) throw ParseError("empty numeric cell", line);
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size()) throw ParseError("non-numeric cell '" + cell + "'", line);
  return v;
}

std::int64_t parse_int(const std::string& cell, std::size_t line) {
  std::int64_t v = 0;
  const auto* first = cell.data();
  const auto* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw ParseError("non-integer cell '" + cell + "'", line);
  }
  return v;
}

}  // namespace

SampleSet samples_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "id" || header[1] != "label") {
    throw ParseError("missing header (expected id,label,w0,...)", line_no);
  }
  for (std::size_t j = 2; j < header.size(); ++j) {
    if (header[j] != "w" + std::to_string(j - 2)) {
      throw ParseError("unexpected header column '" + header[j] + "'", line_no);
    }
  }
  SampleSet set(header.size() - 2);
  std::vector<double> x(set.dim);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " columns, found " +
                           std::to_string(cells.size()),
                       line_no);
    }
    const auto id = parse_int(cells[0], line_no);
    const auto label = parse_int(cells[1], line_no);
    if (label < kUnlabeled) throw ParseError("label must be >= -1", line_no);
    for (std::size_t j = 0; j < set.dim; ++j) x[j] = parse_real(cells[j + 2], line_no);
    set.append(x, static_cast<int>(label), 1.0, id);
  }
  return set;
}

void write_samples_csv(const SampleSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << samples_to_csv(set);
  if (!out) throw IoError("failed writing " + path.string());
}

SampleSet read_samples_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return samples_from_csv(buf.str());
}

}  // namespace eat
