#include "outline_forge/maskops.hpp"

#include <algorithm>
#include <vector>

#include "outline_forge/random.hpp"

namespace outline_forge {

namespace {

void require_same(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_dims(b)) throw Error(ErrorKind::DimensionMismatch, "mask dimensions differ");
}

// One separable pass. For every line position p, the window is
// [p - lo, p + hi]. With `all` the output is set iff the window lies inside
// the line and is fully set; otherwise iff any in-line pixel is set.
void filter_line(const std::uint8_t* in, std::size_t stride, int n, int lo, int hi, bool all,
                 std::vector<int>& prefix, std::uint8_t* out) {
  prefix.assign(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + in[static_cast<std::size_t>(i) * stride];
  for (int p = 0; p < n; ++p) {
    const int a = p - lo;
    const int b = p + hi;
    std::uint8_t v;
    if (all) {
      v = (a >= 0 && b < n && prefix[b + 1] - prefix[a] == b - a + 1) ? 1 : 0;
    } else {
      const int ca = std::max(a, 0);
      const int cb = std::min(b, n - 1);
      v = (ca <= cb && prefix[cb + 1] - prefix[ca] > 0) ? 1 : 0;
    }
    out[static_cast<std::size_t>(p) * stride] = v;
  }
}

BinaryMask box_filter(const BinaryMask& mask, int lo, int hi, bool all) {
  const int w = mask.width();
  const int h = mask.height();
  BinaryMask tmp(w, h), out(w, h);
  std::vector<int> prefix;
  for (int y = 0; y < h; ++y)
    filter_line(mask.data().data() + static_cast<std::size_t>(y) * w, 1, w, lo, hi, all, prefix,
                tmp.data().data() + static_cast<std::size_t>(y) * w);
  for (int x = 0; x < w; ++x)
    filter_line(tmp.data().data() + x, static_cast<std::size_t>(w), h, lo, hi, all, prefix,
                out.data().data() + x);
  return out;
}

}  // namespace

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b) {
  require_same(a, b);
  BinaryMask out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] |= b.data()[i];
  return out;
}

BinaryMask mask_and_not(const BinaryMask& a, const BinaryMask& b) {
  require_same(a, b);
  BinaryMask out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] &= static_cast<std::uint8_t>(!b.data()[i]);
  return out;
}

bool mask_subset(const BinaryMask& a, const BinaryMask& b) {
  require_same(a, b);
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.data()[i] && !b.data()[i]) return false;
  return true;
}

BinaryMask erode(const BinaryMask& mask, SquareKernel kernel) {
  if (kernel.side < 0) throw Error(ErrorKind::InvalidArgument, "kernel side must be >= 0");
  if (kernel.side <= 1) return mask;
  const int lo = kernel.anchor();
  return box_filter(mask, lo, kernel.side - 1 - lo, true);
}

BinaryMask dilate(const BinaryMask& mask, SquareKernel kernel) {
  if (kernel.side < 0) throw Error(ErrorKind::InvalidArgument, "kernel side must be >= 0");
  if (kernel.side <= 1) return mask;
  const int hi = kernel.anchor();
  return box_filter(mask, kernel.side - 1 - hi, hi, false);
}

OutlineBand split_outline(const BinaryMask& mask, SquareKernel kernel) {
  OutlineBand band;
  band.inner = erode(mask, kernel);
  band.ring = mask_and_not(mask, band.inner);
  band.original = mask;
  return band;
}

bool is_vanished(const BinaryMask& mask, std::size_t min_pixels) {
  if (min_pixels < 1) throw Error(ErrorKind::InvalidArgument, "min_pixels must be >= 1");
  return mask.popcount() < min_pixels;
}

std::optional<BBox> bbox_of(const BinaryMask& mask) {
  int x0 = mask.width(), y0 = mask.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask.get(x, y)) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) return std::nullopt;
  return BBox{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

Image replace_background_with_noise(const Image& image, const BinaryMask& keep, std::uint64_t seed) {
  if (!image.same_dims(keep))
    throw Error(ErrorKind::DimensionMismatch, "image and keep mask differ in size");
  Image out = image;
  Rng rng(seed);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      if (keep.get(x, y)) continue;
      auto* p = out.px(x, y);
      p[0] = rng.byte();
      p[1] = rng.byte();
      p[2] = rng.byte();
    }
  return out;
}

}  // namespace outline_forge
