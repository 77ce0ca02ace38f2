#include "outline_forge/imageops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "outline_forge/random.hpp"

namespace outline_forge {

namespace {

void split_padding(int source, int target, int& before, int& after) {
  const int total = std::max(0, target - source);
  before = total / 2;
  after = total - before;
}

void check_plan(Size source, const CanvasPlan& plan) {
  if (source != plan.source)
    throw Error(ErrorKind::DimensionMismatch, "canvas plan was made for a different image size");
}

}  // namespace

CanvasPlan plan_canvas(Size image, BBox focus, Size target) {
  if (image.w <= 0 || image.h <= 0 || target.w <= 0 || target.h <= 0)
    throw Error(ErrorKind::InvalidArgument, "canvas sizes must be positive");
  if (focus.x < 0 || focus.y < 0 || focus.w < 0 || focus.h < 0 || focus.x + focus.w > image.w ||
      focus.y + focus.h > image.h)
    throw Error(ErrorKind::InvalidArgument, "focus box lies outside the image");

  CanvasPlan plan;
  plan.source = image;
  plan.target = target;
  split_padding(image.w, target.w, plan.pad.left, plan.pad.right);
  split_padding(image.h, target.h, plan.pad.top, plan.pad.bottom);
  const Size padded = plan.padded();
  const int cx = plan.pad.left + focus.x + focus.w / 2;
  const int cy = plan.pad.top + focus.y + focus.h / 2;
  plan.crop = {std::clamp(cx - target.w / 2, 0, padded.w - target.w),
               std::clamp(cy - target.h / 2, 0, padded.h - target.h), target.w, target.h};
  plan.object_cut = focus.w > target.w || focus.h > target.h;
  return plan;
}

Image apply_canvas(const Image& image, const CanvasPlan& plan, PadFill fill) {
  check_plan({image.width(), image.height()}, plan);
  Image out(plan.target.w, plan.target.h);
  for (int y = 0; y < plan.target.h; ++y) {
    const int sy = plan.crop.y + y - plan.pad.top;
    for (int x = 0; x < plan.target.w; ++x) {
      const int sx = plan.crop.x + x - plan.pad.left;
      const bool inside = sx >= 0 && sy >= 0 && sx < image.width() && sy < image.height();
      if (inside) {
        out.set(x, y, image.get(sx, sy));
      } else if (fill == PadFill::EdgeReplicate) {
        out.set(x, y, image.get(std::clamp(sx, 0, image.width() - 1), std::clamp(sy, 0, image.height() - 1)));
      }
    }
  }
  return out;
}

BinaryMask apply_canvas(const BinaryMask& mask, const CanvasPlan& plan) {
  check_plan({mask.width(), mask.height()}, plan);
  BinaryMask out(plan.target.w, plan.target.h);
  for (int y = 0; y < plan.target.h; ++y)
    for (int x = 0; x < plan.target.w; ++x)
      if (mask.at_or_unset(plan.crop.x + x - plan.pad.left, plan.crop.y + y - plan.pad.top)) out.set(x, y);
  return out;
}

std::pair<Image, BinaryMask> apply_canvas(const Image& image, const BinaryMask& mask, const CanvasPlan& plan,
                                          PadFill fill) {
  if (!image.same_dims(mask)) throw Error(ErrorKind::DimensionMismatch, "image and mask differ in size");
  return {apply_canvas(image, plan, fill), apply_canvas(mask, plan)};
}

Image invert_canvas(const Image& result, const CanvasPlan& plan, const Image& original) {
  check_plan({original.width(), original.height()}, plan);
  if (result.width() != plan.target.w || result.height() != plan.target.h)
    throw Error(ErrorKind::DimensionMismatch, "result is not target-sized");
  Image out = original;
  for (int y = 0; y < plan.target.h; ++y) {
    const int sy = plan.crop.y + y - plan.pad.top;
    if (sy < 0 || sy >= original.height()) continue;
    for (int x = 0; x < plan.target.w; ++x) {
      const int sx = plan.crop.x + x - plan.pad.left;
      if (sx < 0 || sx >= original.width()) continue;
      out.set(sx, sy, result.get(x, y));
    }
  }
  return out;
}

std::optional<TransformKind> parse_transform_kind(std::string_view name) {
  static constexpr std::pair<std::string_view, TransformKind> kNames[] = {
      {"hflip", TransformKind::HFlip},         {"vflip", TransformKind::VFlip},
      {"rot90", TransformKind::Rot90},         {"rot180", TransformKind::Rot180},
      {"rot270", TransformKind::Rot270},       {"grayscale", TransformKind::Grayscale},
      {"invert", TransformKind::Invert},       {"channel_shuffle", TransformKind::ChannelShuffle},
  };
  for (const auto& [n, k] : kNames)
    if (n == name) return k;
  return std::nullopt;
}

std::string_view to_string(TransformKind kind) {
  switch (kind) {
    case TransformKind::HFlip: return "hflip";
    case TransformKind::VFlip: return "vflip";
    case TransformKind::Rot90: return "rot90";
    case TransformKind::Rot180: return "rot180";
    case TransformKind::Rot270: return "rot270";
    case TransformKind::Grayscale: return "grayscale";
    case TransformKind::Invert: return "invert";
    case TransformKind::ChannelShuffle: return "channel_shuffle";
  }
  return "?";
}

namespace {

// Maps an output coordinate to its source coordinate for a geometric kind.
template <class Fn>
void remap(int w, int h, TransformKind kind, Fn&& fn) {
  const bool swap = kind == TransformKind::Rot90 || kind == TransformKind::Rot270;
  const int ow = swap ? h : w;
  const int oh = swap ? w : h;
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      int sx = x, sy = y;
      switch (kind) {
        case TransformKind::HFlip: sx = w - 1 - x; break;
        case TransformKind::VFlip: sy = h - 1 - y; break;
        case TransformKind::Rot180: sx = w - 1 - x; sy = h - 1 - y; break;
        // clockwise: source (sx, sy) lands at (h-1-sy, sx)
        case TransformKind::Rot90: sx = y; sy = h - 1 - x; break;
        case TransformKind::Rot270: sx = w - 1 - y; sy = x; break;
        default: break;
      }
      fn(x, y, sx, sy);
    }
}

std::array<int, 3> seeded_permutation(std::uint64_t seed) {
  std::array<int, 3> p{0, 1, 2};
  Rng rng(seed);
  for (int i = 2; i > 0; --i) std::swap(p[i], p[rng.below(static_cast<std::uint64_t>(i) + 1)]);
  return p;
}

}  // namespace

std::pair<Image, BinaryMask> apply_transform(const Image& image, const BinaryMask& mask, const Transform& t,
                                             std::uint64_t seed) {
  if (!image.same_dims(mask)) throw Error(ErrorKind::DimensionMismatch, "image and mask differ in size");
  const int w = image.width();
  const int h = image.height();

  if (t.geometric()) {
    const bool swap = t.kind == TransformKind::Rot90 || t.kind == TransformKind::Rot270;
    Image out_img(swap ? h : w, swap ? w : h);
    BinaryMask out_mask(swap ? h : w, swap ? w : h);
    remap(w, h, t.kind, [&](int x, int y, int sx, int sy) {
      out_img.set(x, y, image.get(sx, sy));
      out_mask.set(x, y, mask.get(sx, sy));
    });
    return {std::move(out_img), std::move(out_mask)};
  }

  Image out = image;
  auto& d = out.data();
  switch (t.kind) {
    case TransformKind::Grayscale:
      for (std::size_t i = 0; i < d.size(); i += 3) {
        const unsigned luma = (77u * d[i] + 150u * d[i + 1] + 29u * d[i + 2] + 128u) >> 8;
        d[i] = d[i + 1] = d[i + 2] = static_cast<std::uint8_t>(luma);
      }
      break;
    case TransformKind::Invert:
      for (auto& v : d) v = static_cast<std::uint8_t>(255 - v);
      break;
    case TransformKind::ChannelShuffle: {
      const auto p = t.permutation.value_or(seeded_permutation(seed));
      std::array<bool, 3> seen{};
      for (int c : p) {
        if (c < 0 || c > 2 || seen[c]) throw Error(ErrorKind::InvalidArgument, "invalid channel permutation");
        seen[c] = true;
      }
      const auto& src = image.data();
      for (std::size_t i = 0; i < d.size(); i += 3)
        for (int c = 0; c < 3; ++c) d[i + c] = src[i + p[c]];
      break;
    }
    default: break;
  }
  return {std::move(out), mask};
}

Image resize(const Image& image, Size target, ResizeMode mode) {
  if (target.w < 1 || target.h < 1) throw Error(ErrorKind::InvalidArgument, "resize target must be >= 1x1");
  const int sw = image.width();
  const int sh = image.height();
  if (sw == target.w && sh == target.h) return image;
  if (sw < 1 || sh < 1) throw Error(ErrorKind::InvalidArgument, "cannot resize an empty image");
  Image out(target.w, target.h);

  if (mode == ResizeMode::Nearest) {
    for (int y = 0; y < target.h; ++y) {
      const int sy = static_cast<int>((2LL * y + 1) * sh / (2LL * target.h));
      for (int x = 0; x < target.w; ++x) {
        const int sx = static_cast<int>((2LL * x + 1) * sw / (2LL * target.w));
        out.set(x, y, image.get(sx, sy));
      }
    }
    return out;
  }

  const double scale_x = static_cast<double>(sw) / target.w;
  const double scale_y = static_cast<double>(sh) / target.h;
  for (int y = 0; y < target.h; ++y) {
    const double fy = std::clamp((y + 0.5) * scale_y - 0.5, 0.0, static_cast<double>(sh - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, sh - 1);
    const double wy = fy - y0;
    for (int x = 0; x < target.w; ++x) {
      const double fx = std::clamp((x + 0.5) * scale_x - 0.5, 0.0, static_cast<double>(sw - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, sw - 1);
      const double wx = fx - x0;
      const auto* p00 = image.px(x0, y0);
      const auto* p01 = image.px(x1, y0);
      const auto* p10 = image.px(x0, y1);
      const auto* p11 = image.px(x1, y1);
      auto* q = out.px(x, y);
      for (int c = 0; c < 3; ++c) {
        const double top = p00[c] * (1.0 - wx) + p01[c] * wx;
        const double bottom = p10[c] * (1.0 - wx) + p11[c] * wx;
        const double v = top * (1.0 - wy) + bottom * wy;
        q[c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

BinaryMask resize(const BinaryMask& mask, Size target) {
  if (target.w < 1 || target.h < 1) throw Error(ErrorKind::InvalidArgument, "resize target must be >= 1x1");
  const int sw = mask.width();
  const int sh = mask.height();
  if (sw == target.w && sh == target.h) return mask;
  BinaryMask out(target.w, target.h);
  for (int y = 0; y < target.h; ++y) {
    const int sy = static_cast<int>((2LL * y + 1) * sh / (2LL * target.h));
    for (int x = 0; x < target.w; ++x) {
      const int sx = static_cast<int>((2LL * x + 1) * sw / (2LL * target.w));
      if (mask.get(sx, sy)) out.set(x, y);
    }
  }
  return out;
}

namespace {
void check_crop(int w, int h, BBox box) {
  if (box.empty() || box.x < 0 || box.y < 0 || box.x + box.w > w || box.y + box.h > h)
    throw Error(ErrorKind::InvalidArgument, "crop box outside the frame");
}
}  // namespace

Image crop(const Image& image, BBox box) {
  check_crop(image.width(), image.height(), box);
  Image out(box.w, box.h);
  for (int y = 0; y < box.h; ++y)
    for (int x = 0; x < box.w; ++x) out.set(x, y, image.get(box.x + x, box.y + y));
  return out;
}

BinaryMask crop(const BinaryMask& mask, BBox box) {
  check_crop(mask.width(), mask.height(), box);
  BinaryMask out(box.w, box.h);
  for (int y = 0; y < box.h; ++y)
    for (int x = 0; x < box.w; ++x)
      if (mask.get(box.x + x, box.y + y)) out.set(x, y);
  return out;
}

}  // namespace outline_forge
