#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "vci/errors.hpp"
#include "vci/sample.hpp"

namespace vci {

// VCT1 tensor file: magic "VCT1", u32 LE rank, rank x u64 LE dims, then a
// row-major payload of 64-bit LE IEEE-754 doubles. Bit-exact round trips.

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline bool get_u32(std::istream& is, std::uint32_t& v) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return true;
}

inline bool get_u64(std::istream& is, std::uint64_t& v) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return true;
}

} // namespace detail

inline void store_tensor(const std::string& path, const Sample& s) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw format_error("store_tensor: cannot open " + path);

    std::vector<std::size_t> shape = s.shape.empty() ? std::vector<std::size_t>{s.dim()} : s.shape;
    std::size_t product = 1;
    for (std::size_t d : shape) product *= d;
    if (product != s.dim()) throw format_error("store_tensor: shape product != data length");

    os.write("VCT1", 4);
    detail::put_u32(os, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) detail::put_u64(os, static_cast<std::uint64_t>(d));
    for (double v : s.data) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        detail::put_u64(os, bits);
    }
    if (!os) throw format_error("store_tensor: write failed for " + path);
}

inline Sample load_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw format_error("load_tensor: cannot open " + path);

    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "VCT1", 4) != 0)
        throw format_error("load_tensor: bad magic in " + path);

    std::uint32_t rank = 0;
    if (!detail::get_u32(is, rank)) throw format_error("load_tensor: truncated header in " + path);
    if (rank == 0 || rank > 32) throw format_error("load_tensor: unreasonable rank in " + path);

    std::vector<std::size_t> shape(rank);
    std::uint64_t product = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        std::uint64_t d = 0;
        if (!detail::get_u64(is, d)) throw format_error("load_tensor: truncated dims in " + path);
        if (d == 0 || (product != 0 && d > std::numeric_limits<std::uint64_t>::max() / product))
            throw format_error("load_tensor: dimension overflow in " + path);
        product *= d;
        shape[i] = static_cast<std::size_t>(d);
    }
    if (product > (1ULL << 32))
        throw format_error("load_tensor: payload too large in " + path);

    Sample s;
    s.shape = std::move(shape);
    s.data.resize(static_cast<std::size_t>(product));
    for (std::size_t i = 0; i < s.data.size(); ++i) {
        std::uint64_t bits = 0;
        if (!detail::get_u64(is, bits))
            throw format_error("load_tensor: payload shorter than header dims in " + path);
        std::memcpy(&s.data[i], &bits, 8);
    }
    char extra;
    if (is.read(&extra, 1))
        throw format_error("load_tensor: trailing bytes beyond header dims in " + path);
    return s;
}

// Load a set of vectors: either a directory of .vct files (sorted by name),
// a rank-2 tensor (rows are vectors), or a rank-1 tensor (singleton set).
inline std::vector<Vec> load_tensor_set(const std::string& path) {
    namespace fs = std::filesystem;
    std::vector<Vec> out;
    if (fs::is_directory(path)) {
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(path))
            if (entry.is_regular_file() && entry.path().extension() == ".vct")
                files.push_back(entry.path().string());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw format_error("load_tensor_set: no .vct files in " + path);
        for (const auto& f : files) out.push_back(load_tensor(f).data);
        return out;
    }
    Sample s = load_tensor(path);
    if (s.shape.size() == 2) {
        const std::size_t rows = s.shape[0], cols = s.shape[1];
        for (std::size_t r = 0; r < rows; ++r)
            out.emplace_back(s.data.begin() + r * cols, s.data.begin() + (r + 1) * cols);
        return out;
    }
    out.push_back(std::move(s.data));
    return out;
}

} // namespace vci
