#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace deguv {

// Minimal 8-bit PNG writer (grayscale or RGB, filter 0, zlib-compressed).
// pixels are row-major, channels interleaved. IoError on write failure.
void write_png(const std::string& path, const std::uint8_t* pixels, int h, int w, int channels);

std::vector<std::uint8_t> encode_png(const std::uint8_t* pixels, int h, int w, int channels);

}  // namespace deguv
