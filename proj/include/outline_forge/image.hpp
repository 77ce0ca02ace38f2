#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "outline_forge/error.hpp"

namespace outline_forge {

using Rgb = std::array<std::uint8_t, 3>;

// 8-bit RGB, row-major, interleaved.
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int width, int height, Rgb fill = {0, 0, 0})
      : width_(width), height_(height) {
    if (width < 0 || height < 0)
      throw Error(ErrorKind::InvalidArgument, "negative image dimensions");
    data_.resize(static_cast<std::size_t>(width) * height * kChannels);
    for (std::size_t i = 0; i < data_.size(); i += kChannels) {
      data_[i] = fill[0];
      data_[i + 1] = fill[1];
      data_[i + 2] = fill[2];
    }
  }
  Image(int width, int height, std::vector<std::uint8_t> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(width) * height * kChannels)
      throw Error(ErrorKind::DimensionMismatch, "image buffer size");
  }

  int width() const { return width_; }
  int height() const { return height_; }

  std::uint8_t* px(int x, int y) { return &data_[offset(x, y)]; }
  const std::uint8_t* px(int x, int y) const { return &data_[offset(x, y)]; }

  Rgb get(int x, int y) const {
    const auto* p = px(x, y);
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb v) {
    auto* p = px(x, y);
    p[0] = v[0];
    p[1] = v[1];
    p[2] = v[2];
  }

  const std::vector<std::uint8_t>& data() const { return data_; }
  std::vector<std::uint8_t>& data() { return data_; }

  template <class Other>
  bool same_dims(const Other& o) const {
    return width_ == o.width() && height_ == o.height();
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * kChannels;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

}  // namespace outline_forge
