#include "svbrdf/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>

namespace svbrdf {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::string& path, const char* what) {
  throw std::runtime_error("png: " + path + ": " + what);
}

}  // namespace

PngImage read_png(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) fail(path, "cannot open for reading");

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(path, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(path, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "decode error");
  }

  png_init_io(png, file.get());
  png_read_info(png, info);

  png_uint_32 width = png_get_image_width(png, info);
  png_uint_32 height = png_get_image_height(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  int color_type = png_get_color_type(png, info);

  // Normalize exotic layouts to gray/rgb at 8 or 16 bits.
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  if (bit_depth == 16) png_set_swap(png);  // files are big-endian on disk
  png_read_update_info(png, info);

  bit_depth = png_get_bit_depth(png, info);
  color_type = png_get_color_type(png, info);
  int channels = (color_type == PNG_COLOR_TYPE_GRAY) ? 1 : 3;
  if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_RGB) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "unsupported color type");
  }

  PngImage out;
  out.width = static_cast<int>(width);
  out.height = static_cast<int>(height);
  out.channels = channels;
  out.bit_depth = bit_depth;
  out.samples.resize(static_cast<size_t>(width) * height * channels);

  std::vector<png_bytep> rows(height);
  if (bit_depth == 16) {
    for (png_uint_32 y = 0; y < height; ++y)
      rows[y] = reinterpret_cast<png_bytep>(
          out.samples.data() + static_cast<size_t>(y) * width * channels);
    png_read_image(png, rows.data());
  } else {
    std::vector<uint8_t> bytes(static_cast<size_t>(width) * height * channels);
    for (png_uint_32 y = 0; y < height; ++y)
      rows[y] = bytes.data() + static_cast<size_t>(y) * width * channels;
    png_read_image(png, rows.data());
    for (size_t i = 0; i < bytes.size(); ++i) out.samples[i] = bytes[i];
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

namespace {

png_structp begin_write(const std::string& path, FilePtr& file, png_infop& info,
                        int width, int height, int channels, int bit_depth) {
  file.reset(std::fopen(path.c_str(), "wb"));
  if (!file) fail(path, "cannot open for writing");

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(path, "png_create_write_struct failed");
  info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(path, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(path, "encode error");
  }

  png_init_io(png, file.get());
  // Pin encoder settings: byte-identical output for identical pixels.
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  int color_type =
      (channels == 1) ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, width, height, bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  return png;
}

}  // namespace

void write_png16(const std::string& path, int width, int height, int channels,
                 const std::vector<uint16_t>& samples) {
  if (channels != 1 && channels != 3)
    fail(path, "write_png16 expects 1 or 3 channels");
  if (samples.size() != static_cast<size_t>(width) * height * channels)
    fail(path, "sample count mismatch");

  FilePtr file;
  png_infop info = nullptr;
  png_structp png = begin_write(path, file, info, width, height, channels, 16);
  png_set_swap(png);  // in-memory samples are host little-endian
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y)
    rows[y] = reinterpret_cast<png_bytep>(const_cast<uint16_t*>(
        samples.data() + static_cast<size_t>(y) * width * channels));
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_png8(const std::string& path, int width, int height, int channels,
                const std::vector<uint8_t>& samples) {
  if (channels != 1 && channels != 3)
    fail(path, "write_png8 expects 1 or 3 channels");
  if (samples.size() != static_cast<size_t>(width) * height * channels)
    fail(path, "sample count mismatch");

  FilePtr file;
  png_infop info = nullptr;
  png_structp png = begin_write(path, file, info, width, height, channels, 8);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y)
    rows[y] = const_cast<uint8_t*>(samples.data() +
                                   static_cast<size_t>(y) * width * channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace svbrdf
