#include "invtag/png_io.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>

#include "invtag/error.hpp"

namespace invtag {

namespace {

void push_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back((unsigned char)(v >> 24));
    out.push_back((unsigned char)(v >> 16));
    out.push_back((unsigned char)(v >> 8));
    out.push_back((unsigned char)v);
}

void push_chunk(std::vector<unsigned char>& out, const char type[4],
                const std::vector<unsigned char>& payload) {
    push_u32(out, std::uint32_t(payload.size()));
    const size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    const std::uint32_t crc =
        std::uint32_t(crc32(0, out.data() + start, uInt(out.size() - start)));
    push_u32(out, crc);
}

}  // namespace

void write_png_gray8(const std::string& path, int width, int height,
                     const std::vector<unsigned char>& pixels) {
    check(width > 0 && height > 0 && pixels.size() == size_t(width) * size_t(height),
          "write_png_gray8: bad dimensions for '%s'", path.c_str());

    // filter byte 0 per scanline
    std::vector<unsigned char> raw;
    raw.reserve(size_t(height) * (size_t(width) + 1));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), pixels.begin() + size_t(y) * width,
                   pixels.begin() + size_t(y + 1) * width);
    }
    uLongf bound = compressBound(uLong(raw.size()));
    std::vector<unsigned char> deflated(bound);
    check(compress2(deflated.data(), &bound, raw.data(), uLong(raw.size()), 9) == Z_OK,
          "PNG deflate failed for '%s'", path.c_str());
    deflated.resize(bound);

    std::vector<unsigned char> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<unsigned char> ihdr;
    push_u32(ihdr, std::uint32_t(width));
    push_u32(ihdr, std::uint32_t(height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);  // deflate
    ihdr.push_back(0);  // filter method
    ihdr.push_back(0);  // no interlace
    push_chunk(out, "IHDR", ihdr);
    push_chunk(out, "IDAT", deflated);
    push_chunk(out, "IEND", {});

    std::FILE* f = std::fopen(path.c_str(), "wb");
    check(f != nullptr, "cannot open '%s'", path.c_str());
    const size_t written = std::fwrite(out.data(), 1, out.size(), f);
    std::fclose(f);
    check(written == out.size(), "short write to '%s'", path.c_str());
}

void write_slice_png(const std::string& path, const Volume& v, int plane) {
    const GridSpec& g = v.grid;
    int w, h;
    if (plane == 0) {
        w = g.nx, h = g.ny;
    } else if (plane == 1) {
        w = g.nx, h = g.nz;
    } else {
        w = g.ny, h = g.nz;
    }
    float lo = v.data[0], hi = v.data[0];
    for (float x : v.data) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    const double scale = hi > lo ? 255.0 / (double(hi) - double(lo)) : 0.0;
    std::vector<unsigned char> px(size_t(w) * size_t(h));
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            float val;
            if (plane == 0)
                val = v.at(c, r, g.nz / 2);
            else if (plane == 1)
                val = v.at(c, g.ny / 2, r);
            else
                val = v.at(g.nx / 2, c, r);
            px[size_t(r) * w + c] = (unsigned char)((double(val) - lo) * scale + 0.5);
        }
    write_png_gray8(path, w, h, px);
}

}  // namespace invtag
