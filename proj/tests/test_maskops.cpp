#include <gtest/gtest.h>

#include "outline_forge/maskops.hpp"
#include "oracles.hpp"
#include "toy.hpp"

using namespace outline_forge;
using oracle::max_filter;
using oracle::min_filter;

namespace {

BinaryMask square(int w, int h, int x0, int y0, int side) {
  BinaryMask m(w, h);
  for (int y = y0; y < y0 + side; ++y)
    for (int x = x0; x < x0 + side; ++x) m.set(x, y);
  return m;
}

}  // namespace

TEST(Erode, MatchesMinFilterOnRandomMasks) {
  Rng rng(11);
  for (int i = 0; i < 120; ++i) {
    const int w = 1 + static_cast<int>(rng.below(40));
    const int h = 1 + static_cast<int>(rng.below(40));
    const BinaryMask m = i % 2 ? toy::random_mask(rng, w, h) : toy::blob_mask(rng, w, h);
    for (int side : {0, 1, 2, 3, 4, 5, 6, 7, 12, 13}) ASSERT_EQ(erode(m, {side}), min_filter(m, side)) << i << " " << side;
  }
}

TEST(Dilate, MatchesMaxFilterOnRandomMasks) {
  Rng rng(12);
  for (int i = 0; i < 60; ++i) {
    const BinaryMask m = toy::random_mask(rng, 1 + static_cast<int>(rng.below(30)), 1 + static_cast<int>(rng.below(30)));
    for (int side : {0, 1, 2, 3, 6, 12}) ASSERT_EQ(dilate(m, {side}), max_filter(m, side)) << i << " " << side;
  }
}

TEST(Erode, SquareTwentyWithKernelTwelve) {
  const BinaryMask m = square(32, 32, 6, 6, 20);
  const OutlineBand b = split_outline(m, {12});
  ASSERT_EQ(b.inner, square(32, 32, 11, 11, 9));
  EXPECT_EQ(b.inner.popcount(), 81u);
  EXPECT_EQ(b.ring.popcount(), 400u - 81u);
  // ring thickness 5 on the top/left, 6 on the bottom/right
  EXPECT_TRUE(b.ring.get(10, 15));
  EXPECT_FALSE(b.ring.get(11, 15));
  EXPECT_TRUE(b.ring.get(20, 15));
  EXPECT_FALSE(b.ring.get(19, 15));
}

TEST(Erode, OddKernelIsCentered) {
  const BinaryMask b = erode(square(20, 20, 2, 2, 10), {3});
  EXPECT_EQ(b, square(20, 20, 3, 3, 8));
}

TEST(Erode, IdentityForSideZeroAndOne) {
  Rng rng(3);
  const BinaryMask m = toy::random_mask(rng, 17, 9);
  EXPECT_EQ(erode(m, {0}), m);
  EXPECT_EQ(erode(m, {1}), m);
  EXPECT_EQ(split_outline(m, {0}).ring.popcount(), 0u);
}

TEST(Erode, ObjectTouchingBorderShrinksFromBorder) {
  BinaryMask m(10, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) m.set(x, y);
  EXPECT_EQ(erode(m, {3}), square(10, 10, 1, 1, 8));
}

TEST(Erode, ThinObjectVanishes) {
  const BinaryMask m = square(30, 30, 4, 4, 5);
  const auto b = split_outline(m, {6});
  EXPECT_TRUE(is_vanished(b.inner));
  EXPECT_EQ(b.ring, m);
  EXPECT_FALSE(is_vanished(m));
  EXPECT_TRUE(is_vanished(m, 26));
}

TEST(Erode, EmptyMaskStaysEmpty) {
  const BinaryMask m(8, 8);
  EXPECT_EQ(erode(m, {6}).popcount(), 0u);
  EXPECT_EQ(dilate(m, {6}).popcount(), 0u);
  EXPECT_FALSE(bbox_of(m).has_value());
}

TEST(Erode, NegativeSideRejected) {
  EXPECT_THROW(erode(BinaryMask(4, 4), {-1}), Error);
}

TEST(Erode, Properties) {
  Rng rng(21);
  for (int i = 0; i < 80; ++i) {
    const BinaryMask m = toy::blob_mask(rng, 2 + static_cast<int>(rng.below(40)), 2 + static_cast<int>(rng.below(40)));
    BinaryMask prev = m;
    for (int side = 1; side <= 13; ++side) {
      const BinaryMask e = erode(m, {side});
      EXPECT_TRUE(mask_subset(e, m));
      EXPECT_TRUE(mask_subset(e, prev)) << side;
      prev = e;
      const OutlineBand b = split_outline(m, {side});
      EXPECT_EQ(mask_union(b.inner, b.ring), m);
      EXPECT_EQ(mask_and_not(b.inner, mask_and_not(b.inner, b.ring)).popcount(), 0u);
      // opening is anti-extensive
      EXPECT_TRUE(mask_subset(dilate(e, {side}), m));
    }
  }
}

TEST(BBoxOf, TightBox) {
  BinaryMask m(10, 8);
  m.set(2, 3);
  m.set(7, 5);
  EXPECT_EQ(*bbox_of(m), (BBox{2, 3, 6, 3}));
}

TEST(Noise, KeepsMaskedPixelsAndIsSeeded) {
  Image img(16, 16, Rgb{10, 20, 30});
  const BinaryMask keep = square(16, 16, 4, 4, 6);
  const Image a = replace_background_with_noise(img, keep, 5);
  const Image b = replace_background_with_noise(img, keep, 5);
  const Image c = replace_background_with_noise(img, keep, 6);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  int changed = 0;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      if (keep.get(x, y)) EXPECT_EQ(a.get(x, y), img.get(x, y));
      else changed += a.get(x, y) != img.get(x, y);
    }
  EXPECT_GT(changed, 200);
}

TEST(MaskSetOps, DimensionMismatchThrows) {
  EXPECT_THROW(mask_union(BinaryMask(3, 3), BinaryMask(3, 4)), Error);
}
