#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "bss/hsi.hpp"

namespace bss {

inline constexpr int kEntropyBins = 256;  // 8-bit convention over [0, 1]

namespace detail {

inline void check_band(const HsiCube& cube, int band, const char* op) {
    if (band < 0 || static_cast<std::uint32_t>(band) >= cube.num_bands)
        throw std::invalid_argument(std::string(op) + ": band index " + std::to_string(band) +
                                    " out of range for N=" + std::to_string(cube.num_bands));
}

}  // namespace detail

// Shannon entropy (base 2) of one band image, histogrammed into 256 uniform
// bins over [0, 1]. Empty bins contribute 0; the value 1.0 falls in the last
// bin. Range is [0, 8] bits.
inline double band_entropy(const HsiCube& cube, int band) {
    detail::check_band(cube, band, "band_entropy");
    std::array<std::uint64_t, kEntropyBins> hist{};
    const float* plane = cube.band_plane(static_cast<std::uint32_t>(band));
    const std::size_t n = cube.plane_size();
    for (std::size_t i = 0; i < n; ++i) {
        int bin = static_cast<int>(static_cast<double>(plane[i]) * kEntropyBins);
        bin = std::clamp(bin, 0, kEntropyBins - 1);
        ++hist[static_cast<std::size_t>(bin)];
    }
    double h = 0.0;
    for (std::uint64_t count : hist) {
        if (count == 0) continue;
        const double p = static_cast<double>(count) / static_cast<double>(n);
        h -= p * std::log2(p);
    }
    return h;
}

// Spectral angle between two flattened band images: arccos of their cosine
// similarity, with the cosine clamped to [-1, 1] before arccos.
inline double sam(const HsiCube& cube, int band_i, int band_j) {
    detail::check_band(cube, band_i, "sam");
    detail::check_band(cube, band_j, "sam");
    const float* a = cube.band_plane(static_cast<std::uint32_t>(band_i));
    const float* b = cube.band_plane(static_cast<std::uint32_t>(band_j));
    const std::size_t n = cube.plane_size();
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = a[i], y = b[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0)
        throw std::invalid_argument("sam: band " + std::to_string(band_i) + " has zero norm");
    if (nb == 0.0)
        throw std::invalid_argument("sam: band " + std::to_string(band_j) + " has zero norm");
    const double c = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
    return std::acos(c);
}

// Mean band entropy over the combination's members.
inline double bc_entropy(const HsiCube& cube, const BandCombination& bc) {
    bc.validate(static_cast<int>(cube.num_bands));
    double acc = 0.0;
    for (int b : bc.indices) acc += band_entropy(cube, b);
    return acc / static_cast<double>(bc.indices.size());
}

// Mean SAM over all unordered band pairs of the combination. Needs K >= 2.
inline double bc_sam(const HsiCube& cube, const BandCombination& bc) {
    bc.validate(static_cast<int>(cube.num_bands));
    if (bc.k() < 2) throw std::invalid_argument("bc_sam: needs K >= 2");
    double acc = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < bc.indices.size(); ++i) {
        for (std::size_t j = i + 1; j < bc.indices.size(); ++j) {
            acc += sam(cube, bc.indices[i], bc.indices[j]);
            ++pairs;
        }
    }
    return acc / static_cast<double>(pairs);
}

}  // namespace bss
