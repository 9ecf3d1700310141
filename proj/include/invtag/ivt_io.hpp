#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "invtag/grid.hpp"

namespace invtag {

// IVT binary volume container:
//   magic "IVT1" | u8 rank (3 or 4) | rank x u32 dims (LE) | f32 payload (LE),
//   first dim fastest-varying. Rank 4 carries either a VectorField (last dim
//   3) or a stack of volumes (templates, time frames).
void write_ivt(const std::string& path, const Volume& v);
void write_ivt(const std::string& path, const VectorField& f);
void write_ivt_stack(const std::string& path, const std::vector<Volume>& frames);

Volume read_ivt_volume(const std::string& path);
VectorField read_ivt_field(const std::string& path);
std::vector<Volume> read_ivt_stack(const std::string& path);

// Network weights blob:
//   magic "IVTW" | u32 layer count | per layer: u32 rows, u32 cols,
//   rows*cols f32 weights (row-major), rows f32 biases. All little-endian.
struct WeightsBlob {
    struct Layer {
        std::uint32_t rows = 0, cols = 0;
        std::vector<float> w, b;
    };
    std::vector<Layer> layers;
};

void write_ivtw(const std::string& path, const WeightsBlob& blob);
WeightsBlob read_ivtw(const std::string& path);

// Small helpers shared by the CLI.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::uint64_t fnv1a64(const void* data, size_t n, std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t hash_file(const std::string& path);

}  // namespace invtag
