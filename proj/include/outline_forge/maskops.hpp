#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "outline_forge/image.hpp"
#include "outline_forge/mask.hpp"

namespace outline_forge {

// Square structuring element. Side 0 and 1 are the identity. For even sides
// the anchor sits at offset (side-1)/2 inside the window, so a side-12 window
// spans [x-5, x+6].
struct SquareKernel {
  int side = 0;

  constexpr int anchor() const { return side > 0 ? (side - 1) / 2 : 0; }
};

struct OutlineBand {
  BinaryMask inner;     // eroded mask, the region handed to the inpainter
  BinaryMask ring;      // original AND NOT inner, left visible as guidance
  BinaryMask original;
};

// Off-image pixels count as unset.
BinaryMask erode(const BinaryMask& mask, SquareKernel kernel);
// Dual of erode with the reflected window.
BinaryMask dilate(const BinaryMask& mask, SquareKernel kernel);

OutlineBand split_outline(const BinaryMask& mask, SquareKernel kernel);

bool is_vanished(const BinaryMask& mask, std::size_t min_pixels = 1);

std::optional<BBox> bbox_of(const BinaryMask& mask);

// Pixels outside `keep` become i.i.d. uniform bytes drawn from a generator
// seeded with `seed`.
Image replace_background_with_noise(const Image& image, const BinaryMask& keep, std::uint64_t seed);

}  // namespace outline_forge
