#include "deguv/png.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "deguv/common.hpp"

namespace deguv {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v >> 24));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4], const std::uint8_t* data,
               std::size_t n) {
    put_u32(out, std::uint32_t(n));
    std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    if (n) out.insert(out.end(), data, data + n);
    std::uint32_t crc = ::crc32(0, out.data() + start, uInt(4 + n));
    put_u32(out, crc);
}

}  // namespace

std::vector<std::uint8_t> encode_png(const std::uint8_t* pixels, int h, int w, int channels) {
    if (h < 1 || w < 1 || (channels != 1 && channels != 3))
        throw DataError("png: expected positive size with 1 or 3 channels");

    // each scanline gets a leading filter byte (0 = none)
    const std::size_t stride = std::size_t(w) * channels;
    std::vector<std::uint8_t> raw((stride + 1) * h);
    for (int y = 0; y < h; ++y) {
        raw[std::size_t(y) * (stride + 1)] = 0;
        std::memcpy(raw.data() + std::size_t(y) * (stride + 1) + 1, pixels + std::size_t(y) * stride,
                    stride);
    }

    uLongf bound = ::compressBound(uLong(raw.size()));
    std::vector<std::uint8_t> packed(bound);
    if (::compress2(packed.data(), &bound, raw.data(), uLong(raw.size()), 6) != Z_OK)
        throw IoError("png: zlib compression failed");
    packed.resize(bound);

    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::uint8_t ihdr[13];
    ihdr[0] = std::uint8_t(std::uint32_t(w) >> 24);
    ihdr[1] = std::uint8_t(std::uint32_t(w) >> 16);
    ihdr[2] = std::uint8_t(std::uint32_t(w) >> 8);
    ihdr[3] = std::uint8_t(w);
    ihdr[4] = std::uint8_t(std::uint32_t(h) >> 24);
    ihdr[5] = std::uint8_t(std::uint32_t(h) >> 16);
    ihdr[6] = std::uint8_t(std::uint32_t(h) >> 8);
    ihdr[7] = std::uint8_t(h);
    ihdr[8] = 8;                                  // bit depth
    ihdr[9] = channels == 1 ? 0 : 2;              // grayscale / truecolor
    ihdr[10] = ihdr[11] = ihdr[12] = 0;           // deflate, filter 0, no interlace
    put_chunk(out, "IHDR", ihdr, sizeof ihdr);
    put_chunk(out, "IDAT", packed.data(), packed.size());
    put_chunk(out, "IEND", nullptr, 0);
    return out;
}

void write_png(const std::string& path, const std::uint8_t* pixels, int h, int w, int channels) {
    std::vector<std::uint8_t> bytes = encode_png(pixels, h, w, channels);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f) throw IoError("short write: " + path);
}

}  // namespace deguv
