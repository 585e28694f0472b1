#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "bss/combinatorics.hpp"
#include "bss/error.hpp"

namespace bss {

// A K-subset of band indices, kept strictly increasing. The canonical string
// form is "i-j-k".
struct BandCombination {
    std::vector<int> indices;

    BandCombination() = default;
    explicit BandCombination(std::vector<int> idx) : indices(std::move(idx)) { validate_order(); }

    int k() const { return static_cast<int>(indices.size()); }

    void validate_order() const {
        if (indices.empty())
            throw std::invalid_argument("BandCombination: needs at least one band");
        for (std::size_t i = 0; i < indices.size(); ++i) {
            if (indices[i] < 0)
                throw std::invalid_argument("BandCombination: negative band index");
            if (i > 0 && indices[i] <= indices[i - 1])
                throw std::invalid_argument("BandCombination: indices must be strictly increasing");
        }
    }

    // Validity against a cube with num_bands bands. Strictly increasing
    // indices below N imply K <= N; the K = N case is the identity selection
    // and stays legal for the mechanical ops.
    void validate(int num_bands) const {
        validate_order();
        if (indices.back() >= num_bands)
            throw std::invalid_argument("BandCombination: band index " +
                                        std::to_string(indices.back()) + " out of range for N=" +
                                        std::to_string(num_bands));
    }

    std::string to_string() const {
        std::string s;
        for (std::size_t i = 0; i < indices.size(); ++i) {
            if (i) s += '-';
            s += std::to_string(indices[i]);
        }
        return s;
    }

    static BandCombination parse(const std::string& s) {
        std::vector<int> idx;
        std::size_t pos = 0;
        while (pos < s.size()) {
            std::size_t next = s.find('-', pos);
            if (next == std::string::npos) next = s.size();
            if (next == pos) throw std::invalid_argument("BandCombination: empty field in '" + s + "'");
            idx.push_back(std::stoi(s.substr(pos, next - pos)));
            pos = next + 1;
        }
        return BandCombination(std::move(idx));
    }

    friend bool operator==(const BandCombination& a, const BandCombination& b) {
        return a.indices == b.indices;
    }
    friend bool operator!=(const BandCombination& a, const BandCombination& b) {
        return !(a == b);
    }
    friend bool operator<(const BandCombination& a, const BandCombination& b) {
        return a.indices < b.indices;
    }
};

// FNV-1a over the index sequence; used to derive per-combination RNG streams.
inline std::uint64_t hash_bands(const BandCombination& bc) {
    std::uint64_t h = 1469598103934665603ULL;
    for (int i : bc.indices) {
        h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(i));
        h *= 1099511628211ULL;
    }
    return h;
}

// An H x W x N reflectance volume in band-major layout: N planes, each a
// row-major H x W image. All values live in [0, 1] after construction.
struct HsiCube {
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::uint32_t num_bands = 0;
    std::vector<double> wavelengths;  // nanometers, strictly increasing, length N
    std::vector<float> values;        // H*W*N scalars, band-major

    std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
    std::size_t size() const { return plane_size() * num_bands; }

    float& at(std::uint32_t band, std::uint32_t row, std::uint32_t col) {
        return values[static_cast<std::size_t>(band) * plane_size() +
                      static_cast<std::size_t>(row) * width + col];
    }
    float at(std::uint32_t band, std::uint32_t row, std::uint32_t col) const {
        return values[static_cast<std::size_t>(band) * plane_size() +
                      static_cast<std::size_t>(row) * width + col];
    }

    const float* band_plane(std::uint32_t band) const {
        return values.data() + static_cast<std::size_t>(band) * plane_size();
    }

    void validate() const {
        if (height == 0 || width == 0 || num_bands == 0)
            throw std::invalid_argument("HsiCube: empty dimensions");
        if (wavelengths.size() != num_bands)
            throw std::invalid_argument("HsiCube: wavelength count " +
                                        std::to_string(wavelengths.size()) +
                                        " does not match N=" + std::to_string(num_bands));
        for (std::size_t i = 0; i < wavelengths.size(); ++i) {
            if (!std::isfinite(wavelengths[i]))
                throw std::invalid_argument("HsiCube: non-finite wavelength");
            if (i > 0 && wavelengths[i] <= wavelengths[i - 1])
                throw std::invalid_argument("HsiCube: wavelengths must be strictly increasing");
        }
        if (values.size() != size())
            throw std::invalid_argument("HsiCube: value count " + std::to_string(values.size()) +
                                        " does not match H*W*N=" + std::to_string(size()));
        for (float v : values) {
            if (!std::isfinite(v) || v < 0.0f || v > 1.0f)
                throw std::invalid_argument("HsiCube: values must be finite and within [0, 1]");
        }
    }
};

// Per-pixel class labels for a cube. Label 0 is background and is excluded
// from every metric.
struct LabelMap {
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::uint32_t num_classes = 0;     // count of non-background classes
    std::vector<std::uint16_t> labels; // H*W entries, each <= num_classes

    std::size_t size() const { return static_cast<std::size_t>(height) * width; }

    void validate() const {
        if (height == 0 || width == 0)
            throw std::invalid_argument("LabelMap: empty dimensions");
        if (labels.size() != size())
            throw std::invalid_argument("LabelMap: label count does not match H*W");
        bool any = false;
        for (std::uint16_t l : labels) {
            if (l > num_classes)
                throw std::invalid_argument("LabelMap: label " + std::to_string(l) +
                                            " exceeds num_classes=" + std::to_string(num_classes));
            if (l != 0) any = true;
        }
        if (!any) throw std::invalid_argument("LabelMap: no non-background pixel");
    }
};

enum class TaskKind { Classification, Reconstruction };

enum class MetricDirection { HigherBetter, LowerBetter };

inline std::string task_kind_name(TaskKind t) {
    return t == TaskKind::Classification ? "classification" : "reconstruction";
}

inline TaskKind parse_task_kind(const std::string& s) {
    if (s == "classification" || s == "cls") return TaskKind::Classification;
    if (s == "reconstruction" || s == "rec") return TaskKind::Reconstruction;
    throw std::invalid_argument("unknown task kind '" + s + "'");
}

// Task identity: which metrics exist, which is primary, and each metric's
// improvement direction.
struct TaskSpec {
    TaskKind kind = TaskKind::Classification;
    std::string primary_metric;
    std::map<std::string, MetricDirection> metric_directions;

    static TaskSpec classification() {
        TaskSpec t;
        t.kind = TaskKind::Classification;
        t.primary_metric = "OA";
        t.metric_directions = {{"OA", MetricDirection::HigherBetter},
                               {"AA", MetricDirection::HigherBetter},
                               {"Kappa", MetricDirection::HigherBetter}};
        return t;
    }

    static TaskSpec reconstruction() {
        TaskSpec t;
        t.kind = TaskKind::Reconstruction;
        t.primary_metric = "PSNR";
        t.metric_directions = {{"MRAE", MetricDirection::LowerBetter},
                               {"PSNR", MetricDirection::HigherBetter}};
        return t;
    }

    static TaskSpec for_kind(TaskKind k) {
        return k == TaskKind::Classification ? classification() : reconstruction();
    }

    MetricDirection direction(const std::string& metric) const {
        auto it = metric_directions.find(metric);
        if (it == metric_directions.end())
            throw std::invalid_argument("metric '" + metric + "' not part of task " +
                                        task_kind_name(kind));
        return it->second;
    }

    bool has_metric(const std::string& metric) const {
        return metric_directions.count(metric) != 0;
    }

    friend bool operator==(const TaskSpec& a, const TaskSpec& b) {
        return a.kind == b.kind && a.primary_metric == b.primary_metric &&
               a.metric_directions == b.metric_directions;
    }
};

// Returns true when `value` improves on `best` under the direction.
inline bool improves(double value, double best, MetricDirection dir) {
    return dir == MetricDirection::HigherBetter ? value > best : value < best;
}

inline double worst_value(MetricDirection dir) {
    return dir == MetricDirection::HigherBetter ? -std::numeric_limits<double>::infinity()
                                                : std::numeric_limits<double>::infinity();
}

// Configuration of the synthetic task generators.
struct SynthConfig {
    std::uint32_t num_bands = 16;
    std::uint32_t side = 24;          // spatial side length; H = W = side
    std::uint32_t num_classes = 3;    // classification only
    std::uint32_t basis_rank = 3;     // reconstruction only
    std::uint32_t informative = 3;    // informative band subset size (classification)
    std::vector<int> informative_bands;  // optional explicit subset; sampled from seed when empty
    double noise_sigma = 0.05;
    std::uint64_t seed = 0;
};

// New cube containing exactly the bands of `bc`, in order. Output band i is
// input band bc.indices[i]; wavelengths are subset the same way.
inline HsiCube select_bands(const HsiCube& cube, const BandCombination& bc) {
    for (int i : bc.indices) {
        if (i < 0 || static_cast<std::uint32_t>(i) >= cube.num_bands)
            throw std::invalid_argument("select_bands: band index " + std::to_string(i) +
                                        " out of range for N=" + std::to_string(cube.num_bands));
    }
    HsiCube out;
    out.height = cube.height;
    out.width = cube.width;
    out.num_bands = static_cast<std::uint32_t>(bc.indices.size());
    out.wavelengths.reserve(bc.indices.size());
    out.values.resize(out.size());
    const std::size_t plane = cube.plane_size();
    for (std::size_t i = 0; i < bc.indices.size(); ++i) {
        const auto src = static_cast<std::size_t>(bc.indices[i]);
        out.wavelengths.push_back(cube.wavelengths[src]);
        std::copy(cube.values.begin() + static_cast<std::ptrdiff_t>(src * plane),
                  cube.values.begin() + static_cast<std::ptrdiff_t>((src + 1) * plane),
                  out.values.begin() + static_cast<std::ptrdiff_t>(i * plane));
    }
    return out;
}

}  // namespace bss
