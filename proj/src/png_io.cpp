#include "cmdiff/png_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

namespace cmdiff {

namespace {

void put_u32(std::vector<unsigned char>& out, uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

uint32_t get_u32(const unsigned char* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | p[3];
}

void append_chunk(std::vector<unsigned char>& out, const char type[4],
                  const unsigned char* data, size_t len) {
    put_u32(out, static_cast<uint32_t>(len));
    size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    if (len) out.insert(out.end(), data, data + len);
    uint32_t crc = static_cast<uint32_t>(
        ::crc32(0, out.data() + start, static_cast<uInt>(4 + len)));
    put_u32(out, crc);
}

const unsigned char kSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

}  // namespace

void write_png_u8(const std::string& path, const Tensor& img_u8) {
    if (img_u8.n != 1 || (img_u8.c != 1 && img_u8.c != 3)) {
        throw ArgumentError("write_png_u8: expected a single gray or RGB image");
    }
    int h = img_u8.h, w = img_u8.w, ch = img_u8.c;

    // filter byte 0 per scanline, interleaved samples
    std::vector<unsigned char> raw(static_cast<size_t>(h) * (1 + static_cast<size_t>(w) * ch));
    size_t pos = 0;
    for (int y = 0; y < h; ++y) {
        raw[pos++] = 0;
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                double v = img_u8.at(0, c, y, x);
                v = std::floor(std::min(255.0, std::max(0.0, v)) + 0.5);
                raw[pos++] = static_cast<unsigned char>(v);
            }
        }
    }

    uLongf comp_cap = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> comp(comp_cap);
    if (compress2(comp.data(), &comp_cap, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
        throw DataError("png deflate failed: " + path);
    }
    comp.resize(comp_cap);

    std::vector<unsigned char> out;
    out.insert(out.end(), kSig, kSig + 8);
    unsigned char ihdr[13];
    ihdr[0] = static_cast<unsigned char>(w >> 24);
    ihdr[1] = static_cast<unsigned char>(w >> 16);
    ihdr[2] = static_cast<unsigned char>(w >> 8);
    ihdr[3] = static_cast<unsigned char>(w);
    ihdr[4] = static_cast<unsigned char>(h >> 24);
    ihdr[5] = static_cast<unsigned char>(h >> 16);
    ihdr[6] = static_cast<unsigned char>(h >> 8);
    ihdr[7] = static_cast<unsigned char>(h);
    ihdr[8] = 8;                                  // bit depth
    ihdr[9] = (ch == 1) ? 0 : 2;                  // color type
    ihdr[10] = ihdr[11] = ihdr[12] = 0;           // deflate, adaptive, no interlace
    append_chunk(out, "IHDR", ihdr, 13);
    append_chunk(out, "IDAT", comp.data(), comp.size());
    append_chunk(out, "IEND", nullptr, 0);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for write: " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("write failed: " + path);
}

void write_png_u8_atomic(const std::string& path, const Tensor& img_u8) {
    std::string tmp = path + ".tmp";
    write_png_u8(tmp, img_u8);
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw DataError("atomic rename failed for " + path + ": " + ec.message());
}

namespace {

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace

Tensor read_png_u8(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 8 || std::memcmp(buf.data(), kSig, 8) != 0) {
        throw DataError("not a PNG file: " + path);
    }

    size_t pos = 8;
    int w = 0, h = 0, bit_depth = 0, color_type = 0, interlace = 0;
    std::vector<unsigned char> idat;
    bool saw_ihdr = false;
    while (pos + 8 <= buf.size()) {
        uint32_t len = get_u32(buf.data() + pos);
        if (pos + 12 + len > buf.size()) throw DataError("truncated PNG: " + path);
        const char* type = reinterpret_cast<const char*>(buf.data() + pos + 4);
        const unsigned char* data = buf.data() + pos + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw DataError("bad IHDR: " + path);
            w = static_cast<int>(get_u32(data));
            h = static_cast<int>(get_u32(data + 4));
            bit_depth = data[8];
            color_type = data[9];
            interlace = data[12];
            saw_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (!saw_ihdr || w <= 0 || h <= 0) throw DataError("missing IHDR: " + path);
    if (bit_depth != 8) throw DataError("unsupported PNG bit depth (need 8): " + path);
    if (color_type != 0 && color_type != 2) {
        throw DataError("unsupported PNG color type (need gray or RGB): " + path);
    }
    if (interlace != 0) throw DataError("interlaced PNG not supported: " + path);

    int ch = (color_type == 0) ? 1 : 3;
    size_t stride = static_cast<size_t>(w) * ch;
    std::vector<unsigned char> raw(static_cast<size_t>(h) * (stride + 1));
    uLongf raw_len = static_cast<uLongf>(raw.size());
    int zr = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
    if (zr != Z_OK || raw_len != raw.size()) throw DataError("png inflate failed: " + path);

    // undo per-scanline filters
    std::vector<unsigned char> px(static_cast<size_t>(h) * stride);
    for (int y = 0; y < h; ++y) {
        unsigned char filter = raw[static_cast<size_t>(y) * (stride + 1)];
        const unsigned char* src = raw.data() + static_cast<size_t>(y) * (stride + 1) + 1;
        unsigned char* dst = px.data() + static_cast<size_t>(y) * stride;
        const unsigned char* prev = (y > 0) ? px.data() + static_cast<size_t>(y - 1) * stride : nullptr;
        for (size_t i = 0; i < stride; ++i) {
            int a = (i >= static_cast<size_t>(ch)) ? dst[i - ch] : 0;
            int b = prev ? prev[i] : 0;
            int c = (prev && i >= static_cast<size_t>(ch)) ? prev[i - ch] : 0;
            int x = src[i];
            switch (filter) {
                case 0: break;
                case 1: x += a; break;
                case 2: x += b; break;
                case 3: x += (a + b) / 2; break;
                case 4: x += paeth(a, b, c); break;
                default: throw DataError("bad PNG filter type: " + path);
            }
            dst[i] = static_cast<unsigned char>(x & 0xff);
        }
    }

    Tensor img(1, ch, h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                img.at(0, c, y, x) =
                    static_cast<double>(px[static_cast<size_t>(y) * stride + x * ch + c]);
            }
        }
    }
    return img;
}

}  // namespace cmdiff
