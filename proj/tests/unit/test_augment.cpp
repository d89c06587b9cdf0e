#include <random>

#include <gtest/gtest.h>

#include "eat/augment.hpp"
#include "eat/errors.hpp"

using namespace eat;

namespace {

SampleSet constant_rows(std::size_t dim, std::initializer_list<std::pair<double, int>> rows) {
  SampleSet s(dim);
  for (auto [v, y] : rows) s.append(std::vector<double>(dim, v), y);
  return s;
}

}  // namespace

TEST(Mask, BoxCellsAreZero) {
  const CutMixMask m(4, 3, Box{1, 0, 3, 2});
  EXPECT_EQ(m.kept(), 12u - 4u);
  EXPECT_EQ(m(1, 0), 0.0);
  EXPECT_EQ(m(2, 1), 0.0);
  EXPECT_EQ(m(0, 0), 1.0);
  EXPECT_EQ(m(3, 2), 1.0);
  EXPECT_EQ(m.cells()[1 * 4 + 2], 0.0);
  EXPECT_THROW(CutMixMask(4, 3, Box{0, 0, 5, 1}), ContractViolation);
  EXPECT_THROW(CutMixMask::from_cells(2, 1, {0.0, 0.5}), ContractViolation);
}

TEST(Mask, QuarterAreaOnEightByEight) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto m = sample_mask(8, 8, 0.25, rng);
    const auto area = m.box().area();
    EXPECT_GE(area, 12u);
    EXPECT_LE(area, 20u);
    EXPECT_EQ(64 - m.kept(), area);
  }
}

TEST(Mask, BoxAlwaysInsideGridAndNonTrivial) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(1e-6, 1.0 - 1e-6);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t w = 2 + static_cast<std::size_t>(i % 9);
    const std::size_t h = 2 + static_cast<std::size_t>((i / 9) % 7);
    const auto m = sample_mask(w, h, u(rng), rng);
    const auto& b = m.box();
    EXPECT_LE(b.x1, w);
    EXPECT_LE(b.y1, h);
    EXPECT_GT(b.area(), 0u);
    EXPECT_LT(b.area(), w * h);
  }
}

TEST(Mask, PositionCoversWholeGrid) {
  std::mt19937_64 rng(3);
  std::vector<int> hits(64, 0);
  for (int i = 0; i < 2000; ++i) {
    const auto m = sample_mask(8, 8, 0.1, rng);
    for (std::size_t c = 0; c < 64; ++c) hits[c] += m.cells()[c] == 0.0;
  }
  for (int h : hits) EXPECT_GT(h, 0);
}

TEST(Mask, DeterministicPerSeedAndValidatesFraction) {
  std::mt19937_64 a(7), b(7);
  const auto ma = sample_mask(8, 8, 0.4, a);
  const auto mb = sample_mask(8, 8, 0.4, b);
  EXPECT_TRUE(std::equal(ma.cells().begin(), ma.cells().end(), mb.cells().begin()));
  EXPECT_THROW(sample_mask(8, 8, 0.0, a), ConfigError);
  EXPECT_THROW(sample_mask(8, 8, 1.0, a), ConfigError);
  EXPECT_THROW(sample_mask(1, 8, 0.5, a), ContractViolation);
}

TEST(CutMix, LimitMasks) {
  const std::vector<double> bg = {1, 2, 3, 4}, fg = {5, 6, 7, 8};
  EXPECT_EQ(cutmix(bg, fg, CutMixMask::from_cells(2, 2, {1, 1, 1, 1})), bg);
  EXPECT_EQ(cutmix(bg, fg, CutMixMask::from_cells(2, 2, {0, 0, 0, 0})), fg);
  EXPECT_THROW(cutmix(bg, std::vector<double>{1, 2}, CutMixMask::from_cells(2, 2, {1, 1, 1, 1})),
               ContractViolation);
}

TEST(CutMix, CheckerboardProvenance) {
  std::vector<double> cells(16);
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 4; ++x) cells[y * 4 + x] = (x + y) % 2 == 0 ? 1.0 : 0.0;
  }
  const auto m = CutMixMask::from_cells(4, 4, cells);
  const std::vector<double> bg(16, -1.0), fg(16, 2.0);
  const auto out = cutmix(bg, fg, m);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(out[i], cells[i] == 1.0 ? -1.0 : 2.0);
}

TEST(TailClasses, BelowMedian) {
  const std::vector<std::size_t> counts = {500, 300, 180, 108, 65, 39, 23, 14, 8, 5};
  EXPECT_EQ(tail_classes(counts), (std::vector<int>{5, 6, 7, 8, 9}));
  const std::vector<std::size_t> flat = {4, 4, 4};
  EXPECT_TRUE(tail_classes(flat).empty());
}

TEST(TailBatch, WeightsLabelsAndProvenance) {
  const auto tail = constant_rows(16, {{7.0, 8}, {9.0, 9}});
  const auto head = constant_rows(16, {{-1.0, 0}});
  const auto ood = constant_rows(16, {{-2.0, kUnlabeled}});
  std::mt19937_64 rng(4);
  const auto batch = make_tail_augmented_batch(tail, {&head, &ood}, 300, 0.05, {4, 4}, rng);
  ASSERT_EQ(batch.size(), 300u);
  std::size_t from_head = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    EXPECT_EQ(batch.weights[i], 0.05);
    const double fg = batch.labels[i] == 8 ? 7.0 : 9.0;
    EXPECT_TRUE(batch.labels[i] == 8 || batch.labels[i] == 9);
    double bg = 0.0;
    std::size_t fg_cells = 0;
    for (double v : batch.row(i)) {
      if (v == fg) {
        ++fg_cells;
      } else {
        EXPECT_TRUE(v == -1.0 || v == -2.0);
        if (bg != 0.0) EXPECT_EQ(v, bg);
        bg = v;
      }
    }
    EXPECT_GT(fg_cells, 0u);
    EXPECT_LT(fg_cells, 16u);
    from_head += bg == -1.0;
  }
  // Backgrounds come from both pools at roughly even odds.
  EXPECT_GT(from_head, 100u);
  EXPECT_LT(from_head, 200u);
}

TEST(TailBatch, EmptyCountAndEmptyPool) {
  const auto tail = constant_rows(4, {{1.0, 1}});
  const auto head = constant_rows(4, {{0.0, 0}});
  std::mt19937_64 rng(5);
  EXPECT_TRUE(make_tail_augmented_batch(tail, {&head, nullptr}, 0, 0.05, {2, 2}, rng).empty());
  EXPECT_THROW(make_tail_augmented_batch(tail, {nullptr, nullptr}, 3, 0.05, {2, 2}, rng),
               ConfigError);
}
