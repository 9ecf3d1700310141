#include "invtag/ivt_io.hpp"

#include <cstdio>
#include <cstring>
#include <memory>

#include "invtag/error.hpp"

namespace invtag {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    check(f != nullptr, "cannot open '%s' (mode %s)", path.c_str(), mode);
    return f;
}

void write_raw(std::FILE* f, const void* p, size_t n, const std::string& path) {
    check(std::fwrite(p, 1, n, f) == n, "short write to '%s'", path.c_str());
}

void read_raw(std::FILE* f, void* p, size_t n, const std::string& path) {
    check(std::fread(p, 1, n, f) == n, "short read from '%s'", path.c_str());
}

void write_u32(std::FILE* f, std::uint32_t v, const std::string& path) {
    unsigned char b[4] = {(unsigned char)(v & 0xff), (unsigned char)((v >> 8) & 0xff),
                          (unsigned char)((v >> 16) & 0xff), (unsigned char)((v >> 24) & 0xff)};
    write_raw(f, b, 4, path);
}

std::uint32_t read_u32(std::FILE* f, const std::string& path) {
    unsigned char b[4];
    read_raw(f, b, 4, path);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

// Host is little-endian on every target this project supports; assert once.
static_assert(sizeof(float) == 4, "f32 payloads assume 4-byte float");

void write_f32_block(std::FILE* f, const float* p, size_t n, const std::string& path) {
    write_raw(f, p, n * 4, path);
}

void read_f32_block(std::FILE* f, float* p, size_t n, const std::string& path) {
    read_raw(f, p, n * 4, path);
}

void write_header(std::FILE* f, std::uint8_t rank, const std::uint32_t* dims, const std::string& path) {
    write_raw(f, "IVT1", 4, path);
    write_raw(f, &rank, 1, path);
    for (int i = 0; i < rank; ++i) write_u32(f, dims[i], path);
}

std::vector<std::uint32_t> read_header(std::FILE* f, const std::string& path) {
    char magic[4];
    read_raw(f, magic, 4, path);
    check(std::memcmp(magic, "IVT1", 4) == 0, "'%s' is not an IVT file", path.c_str());
    std::uint8_t rank = 0;
    read_raw(f, &rank, 1, path);
    check(rank == 3 || rank == 4, "'%s': unsupported IVT rank %d", path.c_str(), int(rank));
    std::vector<std::uint32_t> dims(rank);
    for (auto& d : dims) d = read_u32(f, path);
    return dims;
}

GridSpec grid_from_dims(const std::vector<std::uint32_t>& dims, const std::string& path) {
    GridSpec g{int(dims[0]), int(dims[1]), int(dims[2])};
    check(g.count() > 0 && g.count() <= GridSpec::kMaxVoxels, "'%s': bad dims", path.c_str());
    return g;
}

}  // namespace

void write_ivt(const std::string& path, const Volume& v) {
    auto f = open_file(path, "wb");
    const std::uint32_t dims[3] = {std::uint32_t(v.grid.nx), std::uint32_t(v.grid.ny),
                                   std::uint32_t(v.grid.nz)};
    write_header(f.get(), 3, dims, path);
    write_f32_block(f.get(), v.data.data(), v.data.size(), path);
}

void write_ivt(const std::string& path, const VectorField& fld) {
    auto f = open_file(path, "wb");
    const std::uint32_t dims[4] = {std::uint32_t(fld.grid.nx), std::uint32_t(fld.grid.ny),
                                   std::uint32_t(fld.grid.nz), 3u};
    write_header(f.get(), 4, dims, path);
    for (const auto& c : fld.comp) write_f32_block(f.get(), c.data(), c.size(), path);
}

void write_ivt_stack(const std::string& path, const std::vector<Volume>& frames) {
    check(!frames.empty(), "cannot write empty IVT stack '%s'", path.c_str());
    auto f = open_file(path, "wb");
    const GridSpec g = frames[0].grid;
    const std::uint32_t dims[4] = {std::uint32_t(g.nx), std::uint32_t(g.ny), std::uint32_t(g.nz),
                                   std::uint32_t(frames.size())};
    write_header(f.get(), 4, dims, path);
    for (const auto& v : frames) {
        check(v.grid == g, "IVT stack '%s': mixed grids", path.c_str());
        write_f32_block(f.get(), v.data.data(), v.data.size(), path);
    }
}

Volume read_ivt_volume(const std::string& path) {
    auto f = open_file(path, "rb");
    auto dims = read_header(f.get(), path);
    check(dims.size() == 3, "'%s': expected rank-3 IVT", path.c_str());
    Volume v(grid_from_dims(dims, path));
    read_f32_block(f.get(), v.data.data(), v.data.size(), path);
    return v;
}

VectorField read_ivt_field(const std::string& path) {
    auto f = open_file(path, "rb");
    auto dims = read_header(f.get(), path);
    check(dims.size() == 4 && dims[3] == 3, "'%s': expected rank-4 IVT with last dim 3",
          path.c_str());
    VectorField fld(grid_from_dims(dims, path));
    for (auto& c : fld.comp) read_f32_block(f.get(), c.data(), c.size(), path);
    return fld;
}

std::vector<Volume> read_ivt_stack(const std::string& path) {
    auto f = open_file(path, "rb");
    auto dims = read_header(f.get(), path);
    check(dims.size() == 4, "'%s': expected rank-4 IVT", path.c_str());
    const GridSpec g = grid_from_dims(dims, path);
    std::vector<Volume> frames(dims[3], Volume(g));
    for (auto& v : frames) read_f32_block(f.get(), v.data.data(), v.data.size(), path);
    return frames;
}

void write_ivtw(const std::string& path, const WeightsBlob& blob) {
    auto f = open_file(path, "wb");
    write_raw(f.get(), "IVTW", 4, path);
    write_u32(f.get(), std::uint32_t(blob.layers.size()), path);
    for (const auto& l : blob.layers) {
        check(l.w.size() == size_t(l.rows) * l.cols && l.b.size() == l.rows,
              "IVTW layer shape mismatch writing '%s'", path.c_str());
        write_u32(f.get(), l.rows, path);
        write_u32(f.get(), l.cols, path);
        write_f32_block(f.get(), l.w.data(), l.w.size(), path);
        write_f32_block(f.get(), l.b.data(), l.b.size(), path);
    }
}

WeightsBlob read_ivtw(const std::string& path) {
    auto f = open_file(path, "rb");
    char magic[4];
    read_raw(f.get(), magic, 4, path);
    check(std::memcmp(magic, "IVTW", 4) == 0, "'%s' is not an IVTW file", path.c_str());
    WeightsBlob blob;
    blob.layers.resize(read_u32(f.get(), path));
    for (auto& l : blob.layers) {
        l.rows = read_u32(f.get(), path);
        l.cols = read_u32(f.get(), path);
        check(std::uint64_t(l.rows) * l.cols <= (1u << 28), "'%s': absurd layer size", path.c_str());
        l.w.resize(size_t(l.rows) * l.cols);
        l.b.resize(l.rows);
        read_f32_block(f.get(), l.w.data(), l.w.size(), path);
        read_f32_block(f.get(), l.b.data(), l.b.size(), path);
    }
    return blob;
}

std::string read_text_file(const std::string& path) {
    auto f = open_file(path, "rb");
    std::fseek(f.get(), 0, SEEK_END);
    long n = std::ftell(f.get());
    check(n >= 0, "cannot stat '%s'", path.c_str());
    std::fseek(f.get(), 0, SEEK_SET);
    std::string s(size_t(n), '\0');
    if (n > 0) read_raw(f.get(), s.data(), size_t(n), path);
    return s;
}

void write_text_file(const std::string& path, const std::string& content) {
    auto f = open_file(path, "wb");
    write_raw(f.get(), content.data(), content.size(), path);
}

std::uint64_t fnv1a64(const void* data, size_t n, std::uint64_t seed) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t hash_file(const std::string& path) {
    const std::string bytes = read_text_file(path);
    return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace invtag
