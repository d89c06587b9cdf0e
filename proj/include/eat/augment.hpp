#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "eat/datasets.hpp"
#include "eat/tensor.hpp"

namespace eat {

struct Box {
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open [x0, x1) x [y0, y1)

  std::size_t area() const noexcept { return (x1 - x0) * (y1 - y0); }
  bool contains(std::size_t x, std::size_t y) const noexcept {
    return x >= x0 && x < x1 && y >= y0 && y < y1;
  }
};

/// Binary W x H mask: 1 keeps the background, 0 takes the foreground.
/// Cells are stored row-major with index y * W + x.
class CutMixMask {
 public:
  /// Mask that is 0 inside `box` and 1 elsewhere.
  CutMixMask(std::size_t width, std::size_t height, Box box);
  /// Arbitrary 0/1 mask, for tests and limit cases. Throws on values other than 0 or 1.
  static CutMixMask from_cells(std::size_t width, std::size_t height, std::vector<double> cells);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  const Box& box() const noexcept { return box_; }
  std::span<const double> cells() const noexcept { return cells_; }
  double operator()(std::size_t x, std::size_t y) const noexcept { return cells_[y * width_ + x]; }
  /// Number of cells equal to 1.
  std::size_t kept() const noexcept;

 private:
  CutMixMask() = default;
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  Box box_;
  std::vector<double> cells_;
};

/// Box of area ~ area_fraction * W * H placed uniformly inside the grid.
///
/// Box width is round(W * sqrt(area_fraction)), height round(area / width), both
/// clamped so the box is nonempty and smaller than the grid.
CutMixMask sample_mask(std::size_t width, std::size_t height, double area_fraction,
                       std::mt19937_64& rng);

/// M * background + (1 - M) * foreground, cell by cell.
std::vector<double> cutmix(std::span<const double> background, std::span<const double> foreground,
                           const CutMixMask& mask);

/// Where CutMix backgrounds come from; either pool may be empty but not both.
struct BackgroundPool {
  const SampleSet* head = nullptr;
  const SampleSet* ood = nullptr;
};

struct GridShape {
  std::size_t width = 8;
  std::size_t height = 8;
};

/// `count` composites of a uniformly drawn tail foreground onto a background drawn
/// from the head or OOD pool (each with probability 1/2). Labels follow the
/// foreground, weights are `generated_weight`, and the foreground area fraction is
/// uniform on (0, 1).
Batch make_tail_augmented_batch(const SampleSet& tail, const BackgroundPool& pool,
                                std::size_t count, double generated_weight, GridShape grid,
                                std::mt19937_64& rng);

/// Classes whose count is strictly below the median class count.
std::vector<int> tail_classes(std::span<const std::size_t> class_counts);

}  // namespace eat
