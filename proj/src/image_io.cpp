#include "outline_forge/image_io.hpp"

#include <png.h>
#include <jpeglib.h>
#include <openssl/evp.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>

namespace outline_forge {

namespace {

bool is_png(std::span<const std::uint8_t> b) {
  static constexpr std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  return b.size() >= 8 && std::memcmp(b.data(), kSig, 8) == 0;
}

bool is_jpeg(std::span<const std::uint8_t> b) { return b.size() >= 3 && b[0] == 0xff && b[1] == 0xd8 && b[2] == 0xff; }

struct PngImage {
  png_image img;
  PngImage() {
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&img); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

Image decode_png(std::span<const std::uint8_t> bytes) {
  PngImage p;
  if (!png_image_begin_read_from_memory(&p.img, bytes.data(), bytes.size()))
    throw Error(ErrorKind::Io, std::string("PNG decode: ") + p.img.message);
  if (p.img.format & PNG_FORMAT_FLAG_ALPHA)
    std::cerr << "warning: dropping alpha channel from PNG input\n";
  p.img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(p.img));
  // Composite over black so transparent pixels keep deterministic values.
  png_color black{0, 0, 0};
  if (!png_image_finish_read(&p.img, &black, data.data(), 0, nullptr))
    throw Error(ErrorKind::Io, std::string("PNG decode: ") + p.img.message);
  return Image(static_cast<int>(p.img.width), static_cast<int>(p.img.height), std::move(data));
}

struct JpegErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
};

[[noreturn]] void jpeg_error_exit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  std::longjmp(mgr->jump, 1);
}

Image decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit;
  std::vector<std::uint8_t> data;
  int width = 0, height = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorKind::Io, "JPEG decode failed");
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = static_cast<int>(cinfo.output_width);
  height = static_cast<int>(cinfo.output_height);
  data.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = data.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return Image(width, height, std::move(data));
}

Bytes encode_png_raw(const std::uint8_t* data, int width, int height, png_uint_32 format) {
  PngImage p;
  p.img.width = static_cast<png_uint_32>(width);
  p.img.height = static_cast<png_uint_32>(height);
  p.img.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&p.img, nullptr, &size, 0, data, 0, nullptr))
    throw Error(ErrorKind::Io, std::string("PNG encode: ") + p.img.message);
  Bytes out(size);
  if (!png_image_write_to_memory(&p.img, out.data(), &size, 0, data, 0, nullptr))
    throw Error(ErrorKind::Io, std::string("PNG encode: ") + p.img.message);
  out.resize(size);
  return out;
}

}  // namespace

Image decode_image(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (is_jpeg(bytes)) return decode_jpeg(bytes);
  throw Error(ErrorKind::Io, "unrecognized image format");
}

Image read_image(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  try {
    return decode_image(bytes);
  } catch (const Error& e) {
    throw Error(ErrorKind::Io, path.string() + ": " + e.what());
  }
}

Bytes encode_png(const Image& image) {
  return encode_png_raw(image.data().data(), image.width(), image.height(), PNG_FORMAT_RGB);
}

void write_png(const std::filesystem::path& path, const Image& image) { write_file(path, encode_png(image)); }

Bytes encode_mask_png(const BinaryMask& mask) {
  std::vector<std::uint8_t> gray(mask.size());
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = mask.data()[i] ? 255 : 0;
  return encode_png_raw(gray.data(), mask.width(), mask.height(), PNG_FORMAT_GRAY);
}

BinaryMask decode_mask_png(std::span<const std::uint8_t> bytes) {
  if (!is_png(bytes)) throw Error(ErrorKind::Io, "mask payload is not a PNG");
  PngImage p;
  if (!png_image_begin_read_from_memory(&p.img, bytes.data(), bytes.size()))
    throw Error(ErrorKind::Io, std::string("PNG decode: ") + p.img.message);
  p.img.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(p.img));
  if (!png_image_finish_read(&p.img, nullptr, data.data(), 0, nullptr))
    throw Error(ErrorKind::Io, std::string("PNG decode: ") + p.img.message);
  BinaryMask mask(static_cast<int>(p.img.width), static_cast<int>(p.img.height));
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask.data()[i] = (data[4 * i] | data[4 * i + 1] | data[4 * i + 2]) ? 1 : 0;
  return mask;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "short write to " + path.string());
}

void write_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Bytes base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(ErrorKind::ProtocolViolation, "base64 length not a multiple of 4");
  Bytes out(3 * (text.size() / 4));
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorKind::ProtocolViolation, "invalid base64 payload");
  std::size_t padding = 0;
  if (!text.empty() && text.back() == '=') ++padding;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr))
    throw Error(ErrorKind::Io, "sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

}  // namespace outline_forge
