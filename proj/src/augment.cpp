#include "eat/augment.hpp"

#include <algorithm>
#include <cmath>

#include "eat/errors.hpp"

namespace eat {

CutMixMask::CutMixMask(std::size_t width, std::size_t height, Box box)
    : width_(width), height_(height), box_(box), cells_(width * height, 1.0) {
  if (width == 0 || height == 0) throw ContractViolation("mask dimensions must be positive");
  if (box.x0 > box.x1 || box.y0 > box.y1 || box.x1 > width || box.y1 > height) {
    throw ContractViolation("mask box lies outside the grid");
  }
  for (std::size_t y = box.y0; y < box.y1; ++y) {
    for (std::size_t x = box.x0; x < box.x1; ++x) cells_[y * width + x] = 0.0;
  }
}

CutMixMask CutMixMask::from_cells(std::size_t width, std::size_t height,
                                  std::vector<double> cells) {
  if (cells.size() != width * height) throw ContractViolation("mask cell count");
  for (double v : cells) {
    if (v != 0.0 && v != 1.0) throw ContractViolation("mask cells must be 0 or 1");
  }
  CutMixMask m;
  m.width_ = width;
  m.height_ = height;
  m.cells_ = std::move(cells);
  return m;
}

std::size_t CutMixMask::kept() const noexcept {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), 1.0));
}

CutMixMask sample_mask(std::size_t width, std::size_t height, double area_fraction,
                       std::mt19937_64& rng) {
  if (width < 2 || height < 2) throw ContractViolation("sample_mask needs W, H >= 2");
  if (!(area_fraction > 0.0 && area_fraction < 1.0)) {
    throw ConfigError("CutMix area fraction must lie in (0, 1)");
  }
  const double target = area_fraction * static_cast<double>(width * height);
  auto box_w = static_cast<std::size_t>(
      std::llround(static_cast<double>(width) * std::sqrt(area_fraction)));
  box_w = std::clamp<std::size_t>(box_w, 1, width);
  auto box_h = static_cast<std::size_t>(std::llround(target / static_cast<double>(box_w)));
  box_h = std::clamp<std::size_t>(box_h, 1, height);
  if (box_w * box_h == width * height) --box_h;

  std::uniform_int_distribution<std::size_t> px(0, width - box_w);
  std::uniform_int_distribution<std::size_t> py(0, height - box_h);
  const std::size_t x0 = px(rng);
  const std::size_t y0 = py(rng);
  return CutMixMask(width, height, Box{x0, y0, x0 + box_w, y0 + box_h});
}

std::vector<double> cutmix(std::span<const double> background, std::span<const double> foreground,
                           const CutMixMask& mask) {
  const auto m = mask.cells();
  if (background.size() != m.size() || foreground.size() != m.size()) {
    throw ContractViolation("cutmix: image and mask shapes disagree");
  }
  std::vector<double> out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    out[i] = m[i] == 1.0 ? background[i] : foreground[i];
  }
  return out;
}

std::vector<int> tail_classes(std::span<const std::size_t> class_counts) {
  if (class_counts.empty()) return {};
  std::vector<std::size_t> sorted(class_counts.begin(), class_counts.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 == 1 ? static_cast<double>(sorted[n / 2])
                                   : 0.5 * static_cast<double>(sorted[n / 2 - 1] + sorted[n / 2]);
  std::vector<int> tail;
  for (std::size_t c = 0; c < class_counts.size(); ++c) {
    if (static_cast<double>(class_counts[c]) < median) tail.push_back(static_cast<int>(c));
  }
  return tail;
}

Batch make_tail_augmented_batch(const SampleSet& tail, const BackgroundPool& pool,
                                std::size_t count, double generated_weight, GridShape grid,
                                std::mt19937_64& rng) {
  if (!(generated_weight > 0.0 && generated_weight <= 1.0)) {
    throw ConfigError("generated-sample weight must lie in (0, 1]");
  }
  const bool has_head = pool.head != nullptr && !pool.head->empty();
  const bool has_ood = pool.ood != nullptr && !pool.ood->empty();
  if (!has_head && !has_ood) throw ConfigError("CutMix background pool is empty");
  if (tail.empty()) throw ConfigError("CutMix needs at least one tail sample");
  if (tail.dim != grid.width * grid.height) {
    throw ContractViolation("CutMix grid shape does not match sample dimension");
  }

  Batch out(tail.dim);
  if (count == 0) return out;
  std::uniform_int_distribution<std::size_t> pick_tail(0, tail.size() - 1);
  std::bernoulli_distribution from_head(0.5);
  std::uniform_real_distribution<double> fraction(0.0, 1.0);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t f = pick_tail(rng);
    const SampleSet& bg_set =
        has_head && has_ood ? (from_head(rng) ? *pool.head : *pool.ood) : (has_head ? *pool.head : *pool.ood);
    if (bg_set.dim != tail.dim) throw ContractViolation("background dimension mismatch");
    std::uniform_int_distribution<std::size_t> pick_bg(0, bg_set.size() - 1);
    const std::size_t b = pick_bg(rng);
    double lam = 0.0;
    while (lam <= 0.0) lam = fraction(rng);
    const auto mask = sample_mask(grid.width, grid.height, lam, rng);
    const auto composite = cutmix(bg_set.row(b), tail.row(f), mask);
    out.append(composite, tail.labels[f], generated_weight);
  }
  return out;
}

}  // namespace eat
