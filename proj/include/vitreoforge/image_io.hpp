#pragma once

#include <png.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "vitreoforge/error.hpp"
#include "vitreoforge/image.hpp"

namespace vitreoforge {

// Lossless float format: "OCTF", u32 height, u32 width, u32 reserved (0), then
// height*width little-endian IEEE-754 float32 values, row-major.
inline constexpr std::array<char, 4> kFloatMagic = {'O', 'C', 'T', 'F'};
inline constexpr std::size_t kFloatHeaderBytes = 16;

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace detail

template <typename T>
std::vector<std::uint8_t> encode_float_raw(const Image<T>& img) {
  std::vector<std::uint8_t> out;
  out.reserve(kFloatHeaderBytes + 4 * img.size());
  out.insert(out.end(), kFloatMagic.begin(), kFloatMagic.end());
  detail::put_u32(out, static_cast<std::uint32_t>(img.height()));
  detail::put_u32(out, static_cast<std::uint32_t>(img.width()));
  detail::put_u32(out, 0);
  for (T v : img.values()) detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

inline ImageTensor decode_float_raw(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kFloatHeaderBytes) throw MalformedInput("float raw: truncated header");
  if (std::memcmp(bytes.data(), kFloatMagic.data(), 4) != 0) throw MalformedInput("float raw: bad magic");
  const std::size_t h = detail::get_u32(bytes.data() + 4);
  const std::size_t w = detail::get_u32(bytes.data() + 8);
  if (detail::get_u32(bytes.data() + 12) != 0) throw MalformedInput("float raw: reserved field not zero");
  if (bytes.size() != kFloatHeaderBytes + 4 * h * w)
    throw MalformedInput("float raw: payload is " + std::to_string(bytes.size() - kFloatHeaderBytes) +
                         " bytes, expected " + std::to_string(4 * h * w));
  ImageTensor img(h, w);
  const std::uint8_t* p = bytes.data() + kFloatHeaderBytes;
  for (std::size_t i = 0; i < h * w; ++i, p += 4) {
    const float v = std::bit_cast<float>(detail::get_u32(p));
    if (!std::isfinite(v)) throw MalformedInput("float raw: non-finite pixel");
    img[i] = v;
  }
  return img;
}

// 8-bit quantization with round-half-up; values outside [0,1] saturate.
inline std::uint8_t quantize_u8(double v) {
  const double q = std::floor(v * 255.0 + 0.5);
  return static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
}

template <typename T>
std::vector<std::uint8_t> encode_png(const Image<T>& img) {
  if (img.empty()) throw InvalidInput("encode_png: empty image");
  std::vector<std::uint8_t> gray(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) gray[i] = quantize_u8(static_cast<double>(img[i]));

  png_image desc;
  std::memset(&desc, 0, sizeof desc);
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(img.width());
  desc.height = static_cast<png_uint_32>(img.height());
  desc.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&desc, nullptr, &size, 0, gray.data(), 0, nullptr))
    throw IoError(std::string("png encode: ") + desc.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&desc, out.data(), &size, 0, gray.data(), 0, nullptr))
    throw IoError(std::string("png encode: ") + desc.message);
  out.resize(size);
  return out;
}

inline ImageTensor decode_png(const std::vector<std::uint8_t>& bytes) {
  png_image desc;
  std::memset(&desc, 0, sizeof desc);
  desc.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&desc, bytes.data(), bytes.size()))
    throw MalformedInput(std::string("png: ") + desc.message);
  if ((desc.format & PNG_FORMAT_FLAG_COLOR) != 0 || PNG_IMAGE_SAMPLE_COMPONENT_SIZE(desc.format) != 1) {
    png_image_free(&desc);
    throw MalformedInput("png: only 8-bit grayscale is supported");
  }
  desc.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> gray(PNG_IMAGE_SIZE(desc));
  if (!png_image_finish_read(&desc, nullptr, gray.data(), 0, nullptr))
    throw MalformedInput(std::string("png: ") + desc.message);
  ImageTensor img(desc.height, desc.width);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = gray[i] / 255.0;
  return img;
}

inline bool is_png_path(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png";
}

// The format is chosen by content: "OCTF" magic or a PNG signature.
inline ImageTensor load_image(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  if (bytes.empty()) throw MalformedInput(path.string() + ": empty file");
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kFloatMagic.data(), 4) == 0) return decode_float_raw(bytes);
  static constexpr std::uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) return decode_png(bytes);
  throw MalformedInput(path.string() + ": unrecognized image header");
}

// .png -> 8-bit raster, anything else -> float raw.
template <typename T>
void save_image(const Image<T>& img, const std::filesystem::path& path) {
  detail::write_file(path, is_png_path(path) ? encode_png(img) : encode_float_raw(img));
}

}  // namespace vitreoforge
