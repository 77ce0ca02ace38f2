#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "outline_forge/image.hpp"
#include "outline_forge/mask.hpp"

namespace outline_forge {

using Bytes = std::vector<std::uint8_t>;

// PNG or JPEG, detected from the file signature. Alpha and gray inputs are
// converted to RGB; dropping alpha logs a warning to stderr.
Image read_image(const std::filesystem::path& path);
Image decode_image(std::span<const std::uint8_t> bytes);

Bytes encode_png(const Image& image);
void write_png(const std::filesystem::path& path, const Image& image);

// 8-bit grayscale PNG, 255 for set pixels.
Bytes encode_mask_png(const BinaryMask& mask);
// Any PNG; a pixel is set iff any sample is nonzero.
BinaryMask decode_mask_png(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file(const std::filesystem::path& path, std::string_view text);

std::string base64_encode(std::span<const std::uint8_t> bytes);
Bytes base64_decode(std::string_view text);

// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);

}  // namespace outline_forge
