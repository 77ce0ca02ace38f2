#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "outline_forge/error.hpp"

namespace outline_forge {

// Axis-aligned integer box in pixels.
struct BBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool empty() const { return w <= 0 || h <= 0; }
  friend bool operator==(const BBox&, const BBox&) = default;
};

// Row-major binary grid, one byte per pixel holding 0 or 1.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height)
      : width_(width), height_(height),
        bits_(static_cast<std::size_t>(checked(width, height)), 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }

  bool get(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool v = true) { bits_[index(x, y)] = v ? 1 : 0; }

  // Out-of-range coordinates read as unset.
  bool at_or_unset(int x, int y) const {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) return false;
    return get(x, y);
  }

  std::size_t popcount() const {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
  }

  bool any() const {
    for (auto b : bits_)
      if (b) return true;
    return false;
  }

  const std::vector<std::uint8_t>& data() const { return bits_; }
  std::vector<std::uint8_t>& data() { return bits_; }

  bool same_dims(const BinaryMask& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  static long long checked(int w, int h) {
    if (w < 0 || h < 0)
      throw Error(ErrorKind::InvalidArgument, "negative mask dimensions");
    return static_cast<long long>(w) * h;
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_and_not(const BinaryMask& a, const BinaryMask& b);
// True iff every set pixel of a is also set in b.
bool mask_subset(const BinaryMask& a, const BinaryMask& b);

}  // namespace outline_forge
