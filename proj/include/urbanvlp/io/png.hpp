#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "urbanvlp/numerics/tensor.hpp"

namespace urbanvlp::io {

namespace detail {

inline std::vector<std::uint8_t> to_bytes(const Tensor& image) {
  if (image.rank() != 3 || (image.dim(2) != 1 && image.dim(2) != 3)) {
    throw DimensionError("PNG export expects [H x W x 1|3], got " + shape_string(image.shape()));
  }
  std::vector<std::uint8_t> bytes(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::clamp(image[i], 0.0, 1.0);
    bytes[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return bytes;
}

inline png_image make_header(const Tensor& image) {
  png_image header{};
  header.version = PNG_IMAGE_VERSION;
  header.width = static_cast<png_uint_32>(image.dim(1));
  header.height = static_cast<png_uint_32>(image.dim(0));
  header.format = image.dim(2) == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  return header;
}

inline Tensor finish_read(png_image& header, std::size_t channels) {
  header.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(header));
  if (!png_image_finish_read(&header, nullptr, bytes.data(), 0, nullptr)) {
    std::string msg = header.message;
    png_image_free(&header);
    throw DataError("PNG decode failed: " + msg);
  }
  Tensor out(Shape{header.height, header.width, channels});
  for (std::size_t i = 0; i < bytes.size(); ++i) out[i] = bytes[i] / 255.0;
  return out;
}

}  // namespace detail

/// Values are clamped to [0, 1] and rounded to 8 bits; images already on the
/// k/255 grid round-trip exactly.
inline void write_png(const std::filesystem::path& path, const Tensor& image) {
  auto bytes = detail::to_bytes(image);
  png_image header = detail::make_header(image);
  if (!png_image_write_to_file(&header, path.string().c_str(), 0, bytes.data(), 0, nullptr)) {
    throw DataError("cannot write PNG " + path.string() + ": " + header.message);
  }
}

inline std::vector<std::uint8_t> encode_png(const Tensor& image) {
  auto bytes = detail::to_bytes(image);
  png_image header = detail::make_header(image);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&header, nullptr, &size, 0, bytes.data(), 0, nullptr)) {
    throw DataError(std::string("PNG encode failed: ") + header.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&header, out.data(), &size, 0, bytes.data(), 0, nullptr)) {
    throw DataError(std::string("PNG encode failed: ") + header.message);
  }
  out.resize(size);
  return out;
}

inline Tensor read_png(const std::filesystem::path& path, std::size_t channels = 3) {
  png_image header{};
  header.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&header, path.string().c_str())) {
    throw DataError("cannot read PNG " + path.string() + ": " + header.message);
  }
  return detail::finish_read(header, channels);
}

inline Tensor decode_png(const std::vector<std::uint8_t>& data, std::size_t channels = 3) {
  png_image header{};
  header.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&header, data.data(), data.size())) {
    throw DataError(std::string("PNG decode failed: ") + header.message);
  }
  return detail::finish_read(header, channels);
}

}  // namespace urbanvlp::io
