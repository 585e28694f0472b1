#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "bss/hsi.hpp"
#include "bss/rng.hpp"

namespace bss {

namespace detail {

inline std::vector<double> synth_wavelengths(std::uint32_t n) {
    std::vector<double> w(n);
    for (std::uint32_t i = 0; i < n; ++i) w[i] = 400.0 + 10.0 * static_cast<double>(i);
    return w;
}

inline float clamp01(double v) {
    return static_cast<float>(std::clamp(v, 0.0, 1.0));
}

}  // namespace detail

struct SynthClassification {
    HsiCube cube;
    LabelMap labels;
    BandCombination informative;  // ground-truth informative band subset
};

// Synthetic classification task. Class signatures agree on every
// non-informative band and are separated by at least 4*sigma (never less than
// 0.08) on each informative band, so only the informative bands carry label
// signal. Pixels are signature + N(0, sigma^2) noise, clamped to [0, 1].
// About 10% of pixels are background (label 0). Pure function of the config.
inline SynthClassification gen_synth_classification(const SynthConfig& cfg) {
    const std::uint32_t n = cfg.num_bands;
    if (n < 2) throw std::invalid_argument("gen_synth_classification: need at least 2 bands");
    if (cfg.side == 0) throw std::invalid_argument("gen_synth_classification: side must be positive");
    if (cfg.num_classes < 2)
        throw std::invalid_argument("gen_synth_classification: need at least 2 classes");
    if (cfg.noise_sigma < 0.0)
        throw std::invalid_argument("gen_synth_classification: noise must be >= 0");

    Rng rng(mix_seed(cfg.seed, 0xC1A55ULL));

    std::vector<int> info = cfg.informative_bands;
    if (info.empty()) {
        if (cfg.informative == 0 || cfg.informative >= n)
            throw std::invalid_argument(
                "gen_synth_classification: informative subset size must be in [1, N)");
        info = rng.sample_without_replacement(static_cast<int>(n),
                                              static_cast<int>(cfg.informative));
    } else {
        BandCombination(info).validate(static_cast<int>(n));
        std::sort(info.begin(), info.end());
    }

    // Class-mean separation per informative band.
    const double gap = std::max(4.0 * cfg.noise_sigma, 0.08);
    const double span = gap * static_cast<double>(cfg.num_classes - 1);
    if (0.1 + span > 0.9)
        throw std::invalid_argument(
            "gen_synth_classification: num_classes and noise level do not fit in [0.1, 0.9]; "
            "lower one of them");

    const std::uint32_t num_classes = cfg.num_classes;
    std::vector<bool> is_info(n, false);
    for (int b : info) is_info[static_cast<std::size_t>(b)] = true;

    // signatures[c][b]: class c in 1..C uses rows 1..C, row 0 is background.
    std::vector<std::vector<double>> signatures(num_classes + 1, std::vector<double>(n));
    for (std::uint32_t b = 0; b < n; ++b) {
        if (is_info[b]) {
            // Distinct levels, order shuffled per band so no single band
            // carries the same class ordering.
            std::vector<int> order(num_classes);
            for (std::uint32_t c = 0; c < num_classes; ++c) order[c] = static_cast<int>(c);
            rng.shuffle(order);
            for (std::uint32_t c = 0; c < num_classes; ++c)
                signatures[c + 1][b] = 0.1 + gap * static_cast<double>(order[c]);
            signatures[0][b] = 0.1 + span * 0.5;  // background sits mid-range
        } else {
            const double shared = rng.uniform_double(0.2, 0.8);
            for (std::uint32_t c = 0; c <= num_classes; ++c) signatures[c][b] = shared;
        }
    }

    SynthClassification out;
    out.informative = BandCombination(info);

    LabelMap& lm = out.labels;
    lm.height = cfg.side;
    lm.width = cfg.side;
    lm.num_classes = num_classes;
    lm.labels.resize(lm.size());
    for (std::size_t i = 0; i < lm.labels.size(); ++i) {
        const double u = rng.uniform_double();
        lm.labels[i] = (u < 0.1) ? 0
                                 : static_cast<std::uint16_t>(1 + rng.uniform_u64(num_classes));
    }
    // Guarantee every class appears at least once.
    for (std::uint32_t c = 0; c < num_classes && c < lm.labels.size(); ++c)
        lm.labels[c] = static_cast<std::uint16_t>(c + 1);

    HsiCube& cube = out.cube;
    cube.height = cfg.side;
    cube.width = cfg.side;
    cube.num_bands = n;
    cube.wavelengths = detail::synth_wavelengths(n);
    cube.values.resize(cube.size());
    const std::size_t plane = cube.plane_size();
    for (std::size_t p = 0; p < plane; ++p) {
        const std::uint16_t label = lm.labels[p];
        for (std::uint32_t b = 0; b < n; ++b) {
            const double mean = signatures[label][b];
            const double noise = cfg.noise_sigma > 0.0 ? rng.normal(0.0, cfg.noise_sigma) : 0.0;
            cube.values[static_cast<std::size_t>(b) * plane + p] = detail::clamp01(mean + noise);
        }
    }
    cube.validate();
    lm.validate();
    return out;
}

// Synthetic reconstruction task. Each pixel spectrum is a non-negative
// combination of basis_rank smooth basis spectra (Gaussian bumps over the
// band axis) plus noise, clamped to [0, 1]. Pure function of the config.
inline HsiCube gen_synth_reconstruction(const SynthConfig& cfg) {
    const std::uint32_t n = cfg.num_bands;
    const std::uint32_t d = cfg.basis_rank;
    if (n < 2) throw std::invalid_argument("gen_synth_reconstruction: need at least 2 bands");
    if (cfg.side == 0) throw std::invalid_argument("gen_synth_reconstruction: side must be positive");
    if (d == 0 || d >= n)
        throw std::invalid_argument("gen_synth_reconstruction: basis rank must be in [1, N)");
    if (cfg.noise_sigma < 0.0)
        throw std::invalid_argument("gen_synth_reconstruction: noise must be >= 0");

    Rng rng(mix_seed(cfg.seed, 0x4ECULL));

    // Smooth bases: Gaussian bumps with centers spread over the band range.
    std::vector<std::vector<double>> basis(d, std::vector<double>(n));
    for (std::uint32_t k = 0; k < d; ++k) {
        const double center =
            (static_cast<double>(k) + 0.5) * static_cast<double>(n) / static_cast<double>(d) +
            rng.uniform_double(-0.05, 0.05) * static_cast<double>(n);
        const double width = static_cast<double>(n) / (2.5 * static_cast<double>(d));
        for (std::uint32_t b = 0; b < n; ++b) {
            const double x = (static_cast<double>(b) - center) / width;
            basis[k][b] = 0.05 + 0.95 * std::exp(-0.5 * x * x);
        }
    }

    HsiCube cube;
    cube.height = cfg.side;
    cube.width = cfg.side;
    cube.num_bands = n;
    cube.wavelengths = detail::synth_wavelengths(n);
    cube.values.resize(cube.size());
    const std::size_t plane = cube.plane_size();
    std::vector<double> coeff(d);
    for (std::size_t p = 0; p < plane; ++p) {
        for (std::uint32_t k = 0; k < d; ++k) coeff[k] = rng.uniform_double();
        for (std::uint32_t b = 0; b < n; ++b) {
            double v = 0.0;
            for (std::uint32_t k = 0; k < d; ++k) v += coeff[k] * basis[k][b];
            v /= static_cast<double>(d);  // keep the noiseless signal within [0, 1]
            const double noise = cfg.noise_sigma > 0.0 ? rng.normal(0.0, cfg.noise_sigma) : 0.0;
            cube.values[static_cast<std::size_t>(b) * plane + p] = detail::clamp01(v + noise);
        }
    }
    cube.validate();
    return cube;
}

}  // namespace bss
