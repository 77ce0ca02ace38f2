#pragma once

#include <cstdint>
#include <vector>

#include "outline_forge/image.hpp"
#include "outline_forge/mask.hpp"

namespace outline_forge {

// Gaussian feathering of the inpaint mask. The kernel is truncated at
// radius = ceil(3 sigma).
struct BlendParams {
  double sigma = 2.0;

  int radius() const;
};

// Alpha is stored in fixed point: 1.0 == kAlphaOne.
inline constexpr std::uint64_t kAlphaOne = std::uint64_t{1} << 32;

// Truncated, renormalized 1-D Gaussian quantized to integers that sum to
// exactly 65536. Index i is offset i - radius.
std::vector<std::uint32_t> blend_kernel(const BlendParams& params);

// Separable fixed-point blur of the mask; values in [0, kAlphaOne].
std::vector<std::uint64_t> blend_alpha(const BinaryMask& mask, const BlendParams& params);

// out = round(alpha * generated + (1 - alpha) * original), half rounded up.
// Pixels farther than radius (Chebyshev) from the mask keep the original
// bytes; pixels whose full kernel support is inside the mask take the
// generated bytes.
Image compose(const Image& original, const Image& generated, const BinaryMask& inpaint_mask,
              const BlendParams& params = {});

}  // namespace outline_forge
