#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>

#include "outline_forge/image.hpp"
#include "outline_forge/mask.hpp"

namespace outline_forge {

struct Size {
  int w = 0;
  int h = 0;
  friend bool operator==(const Size&, const Size&) = default;
};

inline constexpr Size kModelResolution{512, 512};

struct Padding {
  int left = 0;
  int top = 0;
  int right = 0;
  int bottom = 0;
  friend bool operator==(const Padding&, const Padding&) = default;
};

// Pad the source up to at least `target`, then crop a target-sized window
// out of the padded canvas.
struct CanvasPlan {
  Size source;
  Padding pad;
  BBox crop;  // in padded-canvas coordinates
  Size target = kModelResolution;
  bool object_cut = false;  // focus box larger than target along some axis

  Size padded() const { return {source.w + pad.left + pad.right, source.h + pad.top + pad.bottom}; }
  bool is_identity() const {
    return pad == Padding{} && crop.x == 0 && crop.y == 0 && source == target;
  }
};

enum class PadFill { EdgeReplicate, Black };

CanvasPlan plan_canvas(Size image, BBox focus, Size target = kModelResolution);

std::pair<Image, BinaryMask> apply_canvas(const Image& image, const BinaryMask& mask, const CanvasPlan& plan,
                                          PadFill fill = PadFill::EdgeReplicate);
Image apply_canvas(const Image& image, const CanvasPlan& plan, PadFill fill = PadFill::EdgeReplicate);
BinaryMask apply_canvas(const BinaryMask& mask, const CanvasPlan& plan);

// Pastes a target-sized result back into the source geometry. Padding in the
// result is dropped.
Image invert_canvas(const Image& result, const CanvasPlan& plan, const Image& original);

enum class TransformKind { HFlip, VFlip, Rot90, Rot180, Rot270, Grayscale, Invert, ChannelShuffle };

struct Transform {
  TransformKind kind = TransformKind::HFlip;
  // Output channel c takes input channel permutation[c]. Drawn from the seed
  // when absent.
  std::optional<std::array<int, 3>> permutation;

  bool geometric() const {
    return kind == TransformKind::HFlip || kind == TransformKind::VFlip || kind == TransformKind::Rot90 ||
           kind == TransformKind::Rot180 || kind == TransformKind::Rot270;
  }
};

std::optional<TransformKind> parse_transform_kind(std::string_view name);
std::string_view to_string(TransformKind kind);

// Rot90 turns clockwise.
std::pair<Image, BinaryMask> apply_transform(const Image& image, const BinaryMask& mask, const Transform& t,
                                             std::uint64_t seed = 0);

enum class ResizeMode { Bilinear, Nearest };

// Half-pixel-center sampling.
Image resize(const Image& image, Size target, ResizeMode mode = ResizeMode::Bilinear);
BinaryMask resize(const BinaryMask& mask, Size target);

Image crop(const Image& image, BBox box);
BinaryMask crop(const BinaryMask& mask, BBox box);

}  // namespace outline_forge
