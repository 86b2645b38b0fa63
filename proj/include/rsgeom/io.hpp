#pragma once

// Readers and writers for Middlebury .flo flows, PFM depth maps and 8-bit PNG
// images / masks.

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <png.h>

#include "rsgeom/error.hpp"
#include "rsgeom/geometry.hpp"
#include "rsgeom/raster.hpp"

namespace rsgeom::io {

inline constexpr float kFloMagic = 202021.25f;
/// Middlebury convention: components above this magnitude mark unknown flow.
inline constexpr float kFloUnknownThreshold = 1e9f;
inline constexpr float kFloUnknownValue = 1e10f;

namespace detail {

inline std::vector<char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_all(const std::filesystem::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot create " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoError, "write failed: " + path.string());
}

template <typename T>
T load(const char* p, bool little_endian) {
  std::uint32_t raw;
  static_assert(sizeof(T) == sizeof(raw));
  std::memcpy(&raw, p, sizeof(raw));
  if (little_endian != (std::endian::native == std::endian::little)) raw = __builtin_bswap32(raw);
  return std::bit_cast<T>(raw);
}

template <typename T>
void store_le(std::vector<char>& out, T value) {
  auto raw = std::bit_cast<std::uint32_t>(value);
  if constexpr (std::endian::native != std::endian::little) raw = __builtin_bswap32(raw);
  const char* p = reinterpret_cast<const char*>(&raw);
  out.insert(out.end(), p, p + sizeof(raw));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// .flo: float32 magic 202021.25, int32 width, int32 height, then row-major
// interleaved (u, v) float32, all little-endian.

inline std::vector<char> encode_flo(const FlowField& flow) {
  std::vector<char> out;
  out.reserve(12 + 8 * flow.data.size());
  detail::store_le(out, kFloMagic);
  detail::store_le(out, static_cast<std::int32_t>(flow.width()));
  detail::store_le(out, static_cast<std::int32_t>(flow.height()));
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) {
      const bool ok = flow.valid(x, y);
      detail::store_le(out, ok ? static_cast<float>(flow.data(x, y).x()) : kFloUnknownValue);
      detail::store_le(out, ok ? static_cast<float>(flow.data(x, y).y()) : kFloUnknownValue);
    }
  }
  return out;
}

/// Decodes a .flo payload into an optical flow with the given direction.
inline FlowField decode_flo(const std::vector<char>& bytes, Direction direction = Direction::Forward) {
  if (bytes.size() < 12) fail(ErrorCode::TruncatedFile, "flo header");
  if (detail::load<float>(bytes.data(), true) != kFloMagic) fail(ErrorCode::BadMagic, "not a .flo file");
  const auto w = detail::load<std::int32_t>(bytes.data() + 4, true);
  const auto h = detail::load<std::int32_t>(bytes.data() + 8, true);
  if (w <= 0 || h <= 0 || w > (1 << 16) || h > (1 << 16)) fail(ErrorCode::DecodeError, "flo dimensions");
  const std::size_t need = 12 + 8 * static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() < need) fail(ErrorCode::TruncatedFile, "flo payload");
  if (bytes.size() > need) fail(ErrorCode::DecodeError, "trailing bytes after flo payload");
  FlowField flow(w, h, std::nullopt, direction);
  const char* p = bytes.data() + 12;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x, p += 8) {
      const float u = detail::load<float>(p, true);
      const float v = detail::load<float>(p + 4, true);
      const bool known = std::isfinite(u) && std::isfinite(v) && std::abs(u) <= kFloUnknownThreshold &&
                         std::abs(v) <= kFloUnknownThreshold;
      flow.valid(x, y) = known ? 1 : 0;
      flow.data(x, y) = known ? Eigen::Vector2d(u, v) : Eigen::Vector2d::Zero();
    }
  }
  return flow;
}

inline void write_flo(const std::filesystem::path& path, const FlowField& flow) {
  detail::write_all(path, encode_flo(flow));
}

inline FlowField read_flo(const std::filesystem::path& path, Direction direction = Direction::Forward) {
  return decode_flo(detail::read_all(path), direction);
}

// ---------------------------------------------------------------------------
// PFM, grayscale ("Pf") only. Rows are stored bottom to top; a negative scale
// means little-endian samples. Invalid depths are written as +inf.

inline std::vector<char> encode_pfm(const DepthMap& depth) {
  const std::string header = "Pf\n" + std::to_string(depth.width()) + " " + std::to_string(depth.height()) + "\n-1\n";
  std::vector<char> out(header.begin(), header.end());
  for (int y = depth.height() - 1; y >= 0; --y) {
    for (int x = 0; x < depth.width(); ++x) {
      const float z = depth.valid(x, y) ? static_cast<float>(depth.z(x, y)) : std::numeric_limits<float>::infinity();
      detail::store_le(out, z);
    }
  }
  return out;
}

inline DepthMap decode_pfm(const std::vector<char>& bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) fail(ErrorCode::TruncatedFile, "pfm header");
    return std::string(bytes.data() + start, pos - start);
  };
  const std::string magic = token();
  if (magic == "PF") fail(ErrorCode::UnsupportedVariant, "colour PFM is not a depth map");
  if (magic != "Pf") fail(ErrorCode::BadMagic, "not a PFM file");
  int w = 0;
  int h = 0;
  double scale = 0.0;
  try {
    std::size_t used = 0;
    const std::string ws = token();
    w = std::stoi(ws, &used);
    if (used != ws.size()) throw std::invalid_argument(ws);
    const std::string hs = token();
    h = std::stoi(hs, &used);
    if (used != hs.size()) throw std::invalid_argument(hs);
    const std::string ss = token();
    scale = std::stod(ss, &used);
    if (used != ss.size()) throw std::invalid_argument(ss);
  } catch (const std::logic_error&) {
    fail(ErrorCode::DecodeError, "malformed PFM header");
  }
  if (w <= 0 || h <= 0 || scale == 0.0 || !std::isfinite(scale)) fail(ErrorCode::DecodeError, "PFM header values");
  if (pos >= bytes.size()) fail(ErrorCode::TruncatedFile, "pfm header");
  ++pos;  // the single whitespace byte ending the header
  const bool little = scale < 0.0;
  const std::size_t need = pos + 4 * static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() < need) fail(ErrorCode::TruncatedFile, "pfm payload");
  if (bytes.size() > need) fail(ErrorCode::DecodeError, "trailing bytes after PFM payload");
  DepthMap depth(w, h);
  const char* p = bytes.data() + pos;
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x, p += 4) {
      const float z = detail::load<float>(p, little);
      depth.z(x, y) = z;
      depth.valid(x, y) = (std::isfinite(z) && z > 0.0f) ? 1 : 0;
    }
  }
  return depth;
}

inline void write_pfm(const std::filesystem::path& path, const DepthMap& depth) {
  detail::write_all(path, encode_pfm(depth));
}

inline DepthMap read_pfm(const std::filesystem::path& path) { return decode_pfm(detail::read_all(path)); }

// ---------------------------------------------------------------------------
// PNG (8 bit). Images are RGB, masks gray with 0 / 255.

inline std::uint8_t to_u8(float v) {
  if (!(v > 0.0f)) return 0;
  if (v >= 1.0f) return 255;
  return static_cast<std::uint8_t>(std::lround(v * 255.0f));
}

inline void write_png(const std::filesystem::path& path, const Image& img) {
  if (img.channels() != 1 && img.channels() != 3) fail(ErrorCode::UnsupportedVariant, "png needs 1 or 3 channels");
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  pi.width = static_cast<png_uint_32>(img.width());
  pi.height = static_cast<png_uint_32>(img.height());
  pi.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(img.data().size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = to_u8(img.data()[i]);
  if (!png_image_write_to_file(&pi, path.string().c_str(), 0, buf.data(), 0, nullptr)) {
    fail(ErrorCode::IoError, "png write " + path.string() + ": " + pi.message);
  }
}

/// Reads an 8-bit PNG as a 3-channel image in [0, 1]. Gray and palette files
/// are expanded; 16-bit files are rejected.
inline Image read_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::IoError, "missing " + path.string());
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&pi, path.string().c_str())) {
    fail(ErrorCode::DecodeError, path.string() + ": " + pi.message);
  }
  if (pi.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&pi);
    fail(ErrorCode::UnsupportedVariant, "16-bit PNG: " + path.string());
  }
  pi.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(pi));
  if (!png_image_finish_read(&pi, nullptr, buf.data(), 0, nullptr)) {
    fail(ErrorCode::DecodeError, path.string() + ": " + pi.message);
  }
  Image img(static_cast<int>(pi.width), static_cast<int>(pi.height), 3);
  for (std::size_t i = 0; i < buf.size(); ++i) img.data()[i] = buf[i] / 255.0f;
  return img;
}

inline void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  Image img(mask.width(), mask.height(), 1);
  for (std::size_t i = 0; i < mask.size(); ++i) img.data()[i] = mask.data()[i] ? 1.0f : 0.0f;
  write_png(path, img);
}

inline Mask read_mask_png(const std::filesystem::path& path) {
  const Image img = read_png(path);
  Mask m(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) m(x, y) = img.at(x, y, 0) >= 0.5f ? 1 : 0;
  return m;
}

}  // namespace rsgeom::io
