#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace svbrdf {

// Raw decoded PNG. Samples are row-major, interleaved, top row first.
// 16-bit files decode to the full 0..65535 range; 8-bit files to 0..255.
struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 0;   // 1 (gray) or 3 (rgb)
  int bit_depth = 0;  // 8 or 16
  std::vector<uint16_t> samples;
};

PngImage read_png(const std::string& path);

// Writers use fixed settings (compression level, filter strategy) so the
// emitted byte stream is reproducible for identical pixel input.
void write_png16(const std::string& path, int width, int height, int channels,
                 const std::vector<uint16_t>& samples);
void write_png8(const std::string& path, int width, int height, int channels,
                const std::vector<uint8_t>& samples);

}  // namespace svbrdf
