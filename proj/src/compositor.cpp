#include "outline_forge/compositor.hpp"

#include <algorithm>
#include <cmath>

#include "outline_forge/error.hpp"

namespace outline_forge {

namespace {
constexpr std::uint32_t kKernelOne = 1u << 16;
}

int BlendParams::radius() const {
  if (!(sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "blend sigma must be > 0");
  return std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
}

std::vector<std::uint32_t> blend_kernel(const BlendParams& params) {
  const int r = params.radius();
  std::vector<double> g(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    g[i + r] = std::exp(-(i * i) / (2.0 * params.sigma * params.sigma));
    sum += g[i + r];
  }
  std::vector<std::uint32_t> q(g.size());
  std::uint32_t total = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    q[i] = static_cast<std::uint32_t>(std::lround(g[i] / sum * kKernelOne));
    total += q[i];
  }
  // Absorb the quantization residue in the center tap so the sum is exact.
  q[r] = q[r] + kKernelOne - total;
  return q;
}

std::vector<std::uint64_t> blend_alpha(const BinaryMask& mask, const BlendParams& params) {
  const auto k = blend_kernel(params);
  const int r = params.radius();
  const int w = mask.width();
  const int h = mask.height();
  std::vector<std::uint64_t> horiz(static_cast<std::size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::uint64_t acc = 0;
      for (int d = -r; d <= r; ++d)
        if (mask.at_or_unset(x + d, y)) acc += k[d + r];
      horiz[static_cast<std::size_t>(y) * w + x] = acc;
    }
  std::vector<std::uint64_t> alpha(horiz.size(), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::uint64_t acc = 0;
      for (int d = -r; d <= r; ++d) {
        const int yy = y + d;
        if (yy >= 0 && yy < h) acc += k[d + r] * horiz[static_cast<std::size_t>(yy) * w + x];
      }
      alpha[static_cast<std::size_t>(y) * w + x] = acc;
    }
  return alpha;
}

Image compose(const Image& original, const Image& generated, const BinaryMask& inpaint_mask,
              const BlendParams& params) {
  if (!original.same_dims(generated) || !original.same_dims(inpaint_mask))
    throw Error(ErrorKind::DimensionMismatch, "compose inputs differ in size");
  const auto alpha = blend_alpha(inpaint_mask, params);
  Image out = original;
  auto& o = out.data();
  const auto& g = generated.data();
  constexpr std::uint64_t kHalf = kAlphaOne / 2;
  for (std::size_t p = 0; p < alpha.size(); ++p) {
    const std::uint64_t a = alpha[p];
    if (a == 0) continue;
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t i = 3 * p + c;
      o[i] = static_cast<std::uint8_t>((a * g[i] + (kAlphaOne - a) * o[i] + kHalf) >> 32);
    }
  }
  return out;
}

}  // namespace outline_forge
