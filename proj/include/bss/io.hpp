#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "bss/error.hpp"
#include "bss/hsi.hpp"

// BSSC cube file:  magic "BSSC", u32 LE version=1, u32 H, u32 W, u32 N,
//                  N x f64 LE wavelengths, H*W*N x f32 LE values band-major.
// BSSL label file: magic "BSSL", u32 LE version=1, u32 H, u32 W,
//                  u32 num_classes, H*W x u16 LE labels.

namespace bss {

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

// Cursor over a loaded byte buffer; all read_* throw format_error naming the
// offset where data ran out.
struct Reader {
    const unsigned char* data;
    std::size_t size;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) const {
        if (pos + n > size)
            throw format_error(std::string("truncated file: expected ") + what, pos);
    }
    std::uint16_t read_u16(const char* what) {
        need(2, what);
        std::uint16_t v = static_cast<std::uint16_t>(data[pos] | (data[pos + 1] << 8));
        pos += 2;
        return v;
    }
    std::uint32_t read_u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t read_u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    float read_f32(const char* what) { return std::bit_cast<float>(read_u32(what)); }
    double read_f64(const char* what) { return std::bit_cast<double>(read_u64(what)); }
};

inline std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open '" + path + "' for reading");
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (in.bad()) throw io_error("read failure on '" + path + "'");
    return buf;
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw io_error("write failure on '" + path + "'");
}

}  // namespace detail

inline constexpr std::uint32_t kBsscVersion = 1;
inline constexpr std::uint32_t kBsslVersion = 1;

inline void save_cube(const HsiCube& cube, const std::string& path) {
    cube.validate();  // rejects NaN / out-of-range values before anything hits disk
    std::string out;
    out.reserve(16 + cube.wavelengths.size() * 8 + cube.values.size() * 4);
    out += "BSSC";
    detail::put_u32(out, kBsscVersion);
    detail::put_u32(out, cube.height);
    detail::put_u32(out, cube.width);
    detail::put_u32(out, cube.num_bands);
    for (double w : cube.wavelengths) detail::put_f64(out, w);
    for (float v : cube.values) detail::put_f32(out, v);
    detail::write_file(path, out);
}

// Result of load_cube. `rescaled` is set when the stored values fell outside
// [0, 1] and min-max normalization was applied at ingest.
struct LoadedCube {
    HsiCube cube;
    bool rescaled = false;
};

inline LoadedCube load_cube(const std::string& path) {
    const auto buf = detail::read_file(path);
    detail::Reader r{buf.data(), buf.size()};

    r.need(4, "magic");
    if (std::memcmp(buf.data(), "BSSC", 4) != 0)
        throw format_error("bad magic, expected \"BSSC\"", 0);
    r.pos = 4;
    const std::uint32_t version = r.read_u32("version");
    if (version != kBsscVersion)
        throw format_error("unsupported BSSC version " + std::to_string(version), 4);

    LoadedCube out;
    HsiCube& cube = out.cube;
    cube.height = r.read_u32("height");
    cube.width = r.read_u32("width");
    cube.num_bands = r.read_u32("band count");
    if (cube.height == 0 || cube.width == 0 || cube.num_bands == 0)
        throw format_error("zero dimension in header", 8);

    cube.wavelengths.resize(cube.num_bands);
    for (std::uint32_t i = 0; i < cube.num_bands; ++i)
        cube.wavelengths[i] = r.read_f64("wavelength");

    cube.values.resize(cube.size());
    for (std::size_t i = 0; i < cube.values.size(); ++i) cube.values[i] = r.read_f32("value");
    if (r.pos != buf.size())
        throw format_error("trailing bytes after value block", r.pos);

    float lo = cube.values.empty() ? 0.0f : cube.values[0];
    float hi = lo;
    for (float v : cube.values) {
        if (!std::isfinite(v)) throw format_error("non-finite value in cube", 0);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (lo < 0.0f || hi > 1.0f) {
        out.rescaled = true;
        if (hi > lo) {
            const float span = hi - lo;
            for (float& v : cube.values) v = (v - lo) / span;
        } else {
            // Degenerate constant cube out of range: clamp into [0, 1].
            for (float& v : cube.values) v = std::clamp(v, 0.0f, 1.0f);
        }
    }
    cube.validate();
    return out;
}

inline void save_labels(const LabelMap& labels, const std::string& path) {
    labels.validate();
    std::string out;
    out.reserve(16 + labels.labels.size() * 2);
    out += "BSSL";
    detail::put_u32(out, kBsslVersion);
    detail::put_u32(out, labels.height);
    detail::put_u32(out, labels.width);
    detail::put_u32(out, labels.num_classes);
    for (std::uint16_t l : labels.labels) detail::put_u16(out, l);
    detail::write_file(path, out);
}

inline LabelMap load_labels(const std::string& path) {
    const auto buf = detail::read_file(path);
    detail::Reader r{buf.data(), buf.size()};

    r.need(4, "magic");
    if (std::memcmp(buf.data(), "BSSL", 4) != 0)
        throw format_error("bad magic, expected \"BSSL\"", 0);
    r.pos = 4;
    const std::uint32_t version = r.read_u32("version");
    if (version != kBsslVersion)
        throw format_error("unsupported BSSL version " + std::to_string(version), 4);

    LabelMap out;
    out.height = r.read_u32("height");
    out.width = r.read_u32("width");
    out.num_classes = r.read_u32("class count");
    out.labels.resize(out.size());
    for (std::size_t i = 0; i < out.labels.size(); ++i) out.labels[i] = r.read_u16("label");
    if (r.pos != buf.size())
        throw format_error("trailing bytes after label block", r.pos);
    out.validate();
    return out;
}

}  // namespace bss
