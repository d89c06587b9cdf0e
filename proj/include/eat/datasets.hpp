#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eat/tensor.hpp"

namespace eat {

/// Label value carried by unlabeled (OOD) samples.
inline constexpr int kUnlabeled = -1;

enum class Geometry { gaussian_clusters, grid_image };

Geometry parse_geometry(const std::string& text);
std::string to_string(Geometry geometry);

/// Description of a synthetic long-tailed inlier set.
///
/// Class c receives round(head_count * rho^(-c/(C-1))) samples. In grid-image mode
/// input_dim must equal grid_width * grid_height. `pattern_seed` fixes the class
/// prototypes, `seed` the per-sample noise; train and test sets share a pattern_seed.
struct LongTailSpec {
  std::size_t num_classes = 10;
  double imbalance_ratio = 100.0;
  std::size_t head_count = 500;
  std::size_t input_dim = 64;
  Geometry geometry = Geometry::grid_image;
  std::size_t grid_width = 8;
  std::size_t grid_height = 8;
  double noise = 0.35;
  std::uint64_t pattern_seed = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Rows of samples with labels and per-sample loss weights.
struct SampleSet {
  std::size_t dim = 0;
  std::vector<double> values;  // row-major, size() * dim entries
  std::vector<std::int64_t> ids;
  std::vector<int> labels;
  std::vector<double> weights;

  SampleSet() = default;
  explicit SampleSet(std::size_t input_dim) : dim(input_dim) {}

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * dim, dim);
  }

  /// Appends one row. A negative id is replaced by the row index.
  void append(std::span<const double> x, int label, double weight = 1.0,
              std::int64_t id = -1);
  /// Rows `indices` in the given order.
  SampleSet subset(std::span<const std::size_t> indices) const;
  /// Inputs as an [n x d] tensor; requires a nonempty set.
  Tensor matrix() const;
  /// Throws ContractViolation if the parallel arrays disagree in length.
  void validate() const;

  bool operator==(const SampleSet& other) const {
    return dim == other.dim && ids == other.ids && labels == other.labels &&
           values == other.values;
  }
};

using Batch = SampleSet;

SampleSet concat(const SampleSet& a, const SampleSet& b);

/// Per-class sample counts of the exponential long-tail profile.
std::vector<std::size_t> longtail_counts(const LongTailSpec& spec);

/// Class-ordered labeled samples; identical specs give identical output.
SampleSet gen_longtail(const LongTailSpec& spec);

enum class OodMode { uniform, shifted_gaussian, held_out_patterns };

OodMode parse_ood_mode(const std::string& text);
std::string to_string(OodMode mode);

struct OodSpec {
  std::size_t count = 1000;
  std::size_t dim = 64;
  OodMode mode = OodMode::held_out_patterns;
  /// Inlier pattern indices are [0, num_inlier_patterns); held-out patterns start after.
  std::size_t num_inlier_patterns = 10;
  std::size_t num_ood_patterns = 20;
  double noise = 0.35;
  std::uint64_t pattern_seed = 0;
  std::uint64_t seed = 1;
};

SampleSet gen_ood(const OodSpec& spec);

/// Index set of the pattern prototypes a held-out-pattern OOD generator draws from.
std::vector<std::size_t> ood_pattern_indices(const OodSpec& spec);

/// Fraction of samples per class; entries for absent classes are zero.
std::vector<double> class_frequencies(const SampleSet& set, std::size_t num_classes);

/// FNV-1a over ids, labels and the raw bytes of the inputs.
std::uint64_t sample_hash(const SampleSet& set);

/// CSV with header `id,label,w0,...,w{d-1}`; label -1 marks unlabeled rows.
void write_samples_csv(const SampleSet& set, const std::filesystem::path& path);
SampleSet read_samples_csv(const std::filesystem::path& path);
std::string samples_to_csv(const SampleSet& set);
SampleSet samples_from_csv(const std::string& text);

/// Formats a double with 17 significant digits.
std::string format_double(double value);

}  // namespace eat
