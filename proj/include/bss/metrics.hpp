#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bss/hsi.hpp"

namespace bss {

using MetricMap = std::map<std::string, double>;

inline constexpr double kMraeEpsilon = 1e-8;  // denominator guard for dark pixels

// Mean relative absolute error: mean over entries of |rec - ref| / (ref + eps).
inline double mrae(std::span<const double> reconstructed, std::span<const double> reference) {
    if (reconstructed.size() != reference.size())
        throw std::invalid_argument("mrae: shape mismatch (" +
                                    std::to_string(reconstructed.size()) + " vs " +
                                    std::to_string(reference.size()) + " entries)");
    if (reconstructed.empty()) throw std::invalid_argument("mrae: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < reconstructed.size(); ++i) {
        if (reference[i] < 0.0) throw std::invalid_argument("mrae: reference entries must be >= 0");
        acc += std::abs(reconstructed[i] - reference[i]) / (reference[i] + kMraeEpsilon);
    }
    return acc / static_cast<double>(reconstructed.size());
}

// Peak signal-to-noise ratio in decibels with peak fixed at 1.0 (all data is
// normalized to [0, 1] at ingest). Returns +infinity when MSE is exactly 0.
inline double psnr(std::span<const double> reconstructed, std::span<const double> reference) {
    if (reconstructed.size() != reference.size())
        throw std::invalid_argument("psnr: shape mismatch (" +
                                    std::to_string(reconstructed.size()) + " vs " +
                                    std::to_string(reference.size()) + " entries)");
    if (reconstructed.empty()) throw std::invalid_argument("psnr: empty input");
    double mse = 0.0;
    for (std::size_t i = 0; i < reconstructed.size(); ++i) {
        const double d = reconstructed[i] - reference[i];
        mse += d * d;
    }
    mse /= static_cast<double>(reconstructed.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

namespace detail {

inline std::vector<double> cube_as_doubles(const HsiCube& c) {
    std::vector<double> v(c.values.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(c.values[i]);
    return v;
}

inline void check_same_shape(const HsiCube& a, const HsiCube& b, const char* op) {
    if (a.height != b.height || a.width != b.width || a.num_bands != b.num_bands)
        throw std::invalid_argument(std::string(op) + ": cube shape mismatch");
}

}  // namespace detail

inline double mrae(const HsiCube& reconstructed, const HsiCube& reference) {
    detail::check_same_shape(reconstructed, reference, "mrae");
    const auto a = detail::cube_as_doubles(reconstructed);
    const auto b = detail::cube_as_doubles(reference);
    return mrae(std::span<const double>(a), std::span<const double>(b));
}

inline double psnr(const HsiCube& reconstructed, const HsiCube& reference) {
    detail::check_same_shape(reconstructed, reference, "psnr");
    const auto a = detail::cube_as_doubles(reconstructed);
    const auto b = detail::cube_as_doubles(reference);
    return psnr(std::span<const double>(a), std::span<const double>(b));
}

struct ClassificationMetrics {
    double oa = 0.0;
    double aa = 0.0;
    double kappa = 0.0;

    MetricMap as_map() const { return {{"OA", oa}, {"AA", aa}, {"Kappa", kappa}}; }
};

// OA / AA / Kappa from predicted labels against a reference map. Background
// pixels (reference label 0) are excluded from every count. Predictions may
// use label 0; for a non-background reference pixel that simply counts as a
// miss (category 0 participates in the marginals with reference count 0).
//
// Kappa = (p_o - p_e) / (1 - p_e) with p_e from the confusion-matrix
// marginals. Degenerate p_e = 1 is pinned: 1.0 when p_o = 1, else 0.0.
inline ClassificationMetrics classification_metrics(std::span<const std::uint16_t> predicted,
                                                    const LabelMap& reference) {
    if (predicted.size() != reference.size())
        throw std::invalid_argument("classification_metrics: prediction count " +
                                    std::to_string(predicted.size()) + " does not match H*W=" +
                                    std::to_string(reference.size()));
    const std::size_t num_cats = static_cast<std::size_t>(reference.num_classes) + 1;  // incl. 0
    std::vector<std::uint64_t> confusion(num_cats * num_cats, 0);  // [ref][pred]
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const std::uint16_t ref = reference.labels[i];
        if (ref == 0) continue;
        const std::uint16_t pred = predicted[i];
        if (pred >= num_cats)
            throw std::invalid_argument("classification_metrics: predicted label " +
                                        std::to_string(pred) + " exceeds num_classes");
        confusion[ref * num_cats + pred] += 1;
        ++total;
    }
    if (total == 0)
        throw std::invalid_argument("classification_metrics: no non-background pixels");

    std::uint64_t correct = 0;
    double recall_sum = 0.0;
    std::size_t classes_present = 0;
    for (std::size_t c = 1; c < num_cats; ++c) {
        std::uint64_t row = 0;
        for (std::size_t p = 0; p < num_cats; ++p) row += confusion[c * num_cats + p];
        if (row == 0) continue;
        ++classes_present;
        correct += confusion[c * num_cats + c];
        recall_sum += static_cast<double>(confusion[c * num_cats + c]) / static_cast<double>(row);
    }

    ClassificationMetrics m;
    m.oa = static_cast<double>(correct) / static_cast<double>(total);
    m.aa = recall_sum / static_cast<double>(classes_present);

    double pe = 0.0;
    for (std::size_t c = 0; c < num_cats; ++c) {
        std::uint64_t row = 0, col = 0;
        for (std::size_t p = 0; p < num_cats; ++p) {
            row += confusion[c * num_cats + p];
            col += confusion[p * num_cats + c];
        }
        pe += (static_cast<double>(row) / static_cast<double>(total)) *
              (static_cast<double>(col) / static_cast<double>(total));
    }
    if (pe >= 1.0) {
        m.kappa = (m.oa == 1.0) ? 1.0 : 0.0;
    } else {
        m.kappa = (m.oa - pe) / (1.0 - pe);
    }
    return m;
}

}  // namespace bss
