#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bss/evaluator.hpp"
#include "bss/hsi.hpp"
#include "bss/metrics.hpp"
#include "bss/rng.hpp"
#include "bss/search.hpp"

namespace bss {

// Spectral-spatial position embedding flavors. None is the report-only
// baseline without any embedding.
enum class PeKind { Ape, Clpe, Slpe, None };

inline std::string pe_kind_name(PeKind k) {
    switch (k) {
        case PeKind::Ape: return "ape";
        case PeKind::Clpe: return "clpe";
        case PeKind::Slpe: return "slpe";
        case PeKind::None: return "none";
    }
    return "?";
}

inline PeKind parse_pe_kind(const std::string& s) {
    if (s == "ape") return PeKind::Ape;
    if (s == "clpe") return PeKind::Clpe;
    if (s == "slpe") return PeKind::Slpe;
    if (s == "none") return PeKind::None;
    throw std::invalid_argument("unknown position embedding kind '" + s + "'");
}

// Flattens an H x W x N patch into an (HW x N) matrix: entry (s, i) is the
// value at row-major spatial site s, band i.
inline Eigen::MatrixXd transform_patch(const HsiCube& patch) {
    const auto hw = static_cast<Eigen::Index>(patch.plane_size());
    const auto n = static_cast<Eigen::Index>(patch.num_bands);
    Eigen::MatrixXd tp(hw, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const float* plane = patch.band_plane(static_cast<std::uint32_t>(i));
        for (Eigen::Index s = 0; s < hw; ++s) tp(s, i) = static_cast<double>(plane[s]);
    }
    return tp;
}

// Inverse of transform_patch for a given spatial shape.
inline HsiCube untransform_patch(const Eigen::MatrixXd& tp, std::uint32_t height,
                                 std::uint32_t width, std::vector<double> wavelengths) {
    HsiCube out;
    out.height = height;
    out.width = width;
    out.num_bands = static_cast<std::uint32_t>(tp.cols());
    out.wavelengths = std::move(wavelengths);
    out.values.resize(out.size());
    const std::size_t plane = out.plane_size();
    if (plane != static_cast<std::size_t>(tp.rows()))
        throw std::invalid_argument("untransform_patch: H*W does not match rows");
    for (Eigen::Index i = 0; i < tp.cols(); ++i)
        for (Eigen::Index s = 0; s < tp.rows(); ++s)
            out.values[static_cast<std::size_t>(i) * plane + static_cast<std::size_t>(s)] =
                static_cast<float>(tp(s, i));
    return out;
}

// Fixed sinusoidal spectral-spatial embedding (N x HW), 0-based indices:
//   E(i, 2j)   = sin(i / 10000^(2j/HW))
//   E(i, 2j+1) = cos(i / 10000^(2j/HW))
// For odd HW the last column is the sin half of its pair.
inline Eigen::MatrixXd ape_embedding(int num_bands, int hw) {
    if (num_bands < 1 || hw < 1)
        throw std::invalid_argument("ape_embedding: dimensions must be positive");
    Eigen::MatrixXd e(num_bands, hw);
    for (int i = 0; i < num_bands; ++i) {
        for (int c = 0; c < hw; ++c) {
            const int j = c / 2;
            const double denom = std::pow(10000.0, 2.0 * static_cast<double>(j) /
                                                       static_cast<double>(hw));
            const double arg = static_cast<double>(i) / denom;
            e(i, c) = (c % 2 == 0) ? std::sin(arg) : std::cos(arg);
        }
    }
    return e;
}

// All supernet state. Embedding arithmetic lives in the N x HW orientation,
// so band selection is row selection.
struct SupernetParams {
    PeKind pe_kind = PeKind::Slpe;
    TaskKind task = TaskKind::Classification;
    int num_bands = 0;
    int hw = 0;           // patch area
    int k = 0;            // bands selected per forward pass
    int num_classes = 0;  // classification head size

    Eigen::MatrixXd w1;   // HW x HW, affine along the spatial axis
    Eigen::VectorXd b1;   // HW
    Eigen::MatrixXd w2;   // HW x HW (SLPE only)
    Eigen::VectorXd b2;   // HW (SLPE only)
    Eigen::MatrixXd e_ss; // N x HW (APE fixed, CLPE learnable)
    Eigen::VectorXd e_b;  // N (SLPE)
    Eigen::VectorXd e_p;  // HW (SLPE)
    Eigen::MatrixXd head_w;  // C x K (classification) or N x K (reconstruction)
    Eigen::VectorXd head_b;  // C or N

    std::uint64_t steps = 0;
    std::uint64_t seed = 0;

    int head_rows() const {
        return task == TaskKind::Classification ? num_classes : num_bands;
    }
};

// Freshly initialized parameters. Exactly the blocks demanded by pe_kind are
// allocated; everything else stays empty.
inline SupernetParams init_supernet(PeKind pe, TaskKind task, int num_bands, int hw, int k,
                                    int num_classes, std::uint64_t seed) {
    if (num_bands < 2 || hw < 1 || k < 1 || k > num_bands)
        throw std::invalid_argument("init_supernet: bad dimensions");
    if (task == TaskKind::Classification && num_classes < 2)
        throw std::invalid_argument("init_supernet: classification needs >= 2 classes");

    SupernetParams p;
    p.pe_kind = pe;
    p.task = task;
    p.num_bands = num_bands;
    p.hw = hw;
    p.k = k;
    p.num_classes = task == TaskKind::Classification ? num_classes : 0;
    p.seed = seed;

    Rng rng(mix_seed(seed, 0x5C05ULL));
    const auto uniform_matrix = [&rng](Eigen::Index r, Eigen::Index c, double radius) {
        Eigen::MatrixXd m(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform_double(-radius, radius);
        return m;
    };

    const double r1 = 1.0 / std::sqrt(static_cast<double>(hw));
    p.w1 = uniform_matrix(hw, hw, r1);
    p.b1 = Eigen::VectorXd::Zero(hw);
    if (pe == PeKind::Slpe) {
        p.w2 = uniform_matrix(hw, hw, r1);
        p.b2 = Eigen::VectorXd::Zero(hw);
        p.e_b = uniform_matrix(num_bands, 1, 0.5).col(0);
        p.e_p = uniform_matrix(hw, 1, 0.1).col(0);
    } else if (pe == PeKind::Ape) {
        p.e_ss = ape_embedding(num_bands, hw);
    } else if (pe == PeKind::Clpe) {
        p.e_ss = uniform_matrix(num_bands, hw, 0.5);
    }
    const double rh = 1.0 / std::sqrt(static_cast<double>(k));
    p.head_w = uniform_matrix(p.head_rows(), k, rh);
    p.head_b = Eigen::VectorXd::Zero(p.head_rows());
    return p;
}

// Encoded representation E_H (N x HW) of one transformed patch.
//   APE/CLPE: E_H = MLP1(tp^T) + E_SS
//   SLPE:     E_H = MLP2(MLP1(tp^T) + E_p) + E_b
//   None:     E_H = MLP1(tp^T)
// MLP1/MLP2 are single affine layers acting along the spatial axis.
inline Eigen::MatrixXd encode(const SupernetParams& p, const Eigen::MatrixXd& tp) {
    if (tp.rows() != p.hw || tp.cols() != p.num_bands)
        throw std::invalid_argument("encode: transformed patch is " + std::to_string(tp.rows()) +
                                    "x" + std::to_string(tp.cols()) + ", expected " +
                                    std::to_string(p.hw) + "x" + std::to_string(p.num_bands));
    Eigen::MatrixXd base = tp.transpose() * p.w1;  // N x HW
    base.rowwise() += p.b1.transpose();
    switch (p.pe_kind) {
        case PeKind::None:
            return base;
        case PeKind::Ape:
        case PeKind::Clpe:
            return base + p.e_ss;
        case PeKind::Slpe: {
            base.rowwise() += p.e_p.transpose();
            Eigen::MatrixXd e = base * p.w2;
            e.rowwise() += p.b2.transpose();
            e.colwise() += p.e_b;
            return e;
        }
    }
    throw std::logic_error("encode: unreachable");
}

// M_H: the bc-indexed rows of E_H.
inline Eigen::MatrixXd select_encoded(const Eigen::MatrixXd& e_h, const BandCombination& bc) {
    bc.validate(static_cast<int>(e_h.rows()));
    Eigen::MatrixXd m(bc.indices.size(), e_h.cols());
    for (std::size_t j = 0; j < bc.indices.size(); ++j)
        m.row(static_cast<Eigen::Index>(j)) = e_h.row(bc.indices[j]);
    return m;
}

// Task output for one patch: class logits (C) from the mean-pooled selected
// rows, or the reconstructed spectrum (N x HW) decoded per pixel from the K
// selected rows.
struct ForwardOutput {
    Eigen::VectorXd logits;        // classification
    Eigen::MatrixXd reconstruction;  // reconstruction, N x HW
};

inline ForwardOutput forward(const SupernetParams& p, const Eigen::MatrixXd& tp,
                             const BandCombination& bc) {
    if (bc.k() != p.k)
        throw std::invalid_argument("forward: combination size " + std::to_string(bc.k()) +
                                    " does not match K=" + std::to_string(p.k));
    const Eigen::MatrixXd e_h = encode(p, tp);
    const Eigen::MatrixXd m_h = select_encoded(e_h, bc);
    ForwardOutput out;
    if (p.task == TaskKind::Classification) {
        const Eigen::VectorXd pooled = m_h.rowwise().mean();
        out.logits = p.head_w * pooled + p.head_b;
    } else {
        out.reconstruction = p.head_w * m_h;
        out.reconstruction.colwise() += p.head_b;
    }
    return out;
}

// Training corpus: transformed patches with labels (classification) or with
// themselves as reconstruction targets, plus a fixed train/val split.
struct ScosDataset {
    TaskKind task = TaskKind::Classification;
    int num_bands = 0;
    int patch_side = 0;
    int num_classes = 0;
    std::vector<Eigen::MatrixXd> patches;  // each HW x N
    std::vector<int> labels;               // 1..C, classification only
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> val_idx;

    int hw() const { return patch_side * patch_side; }
};

struct ScosTrainConfig {
    std::uint64_t iterations = 2000;
    int batch_size = 16;
    double learning_rate = 0.05;
    int patch_side = 3;
    int k = 3;
    double val_fraction = 0.5;
    std::uint64_t seed = 0;
};

namespace detail {

inline void scos_split(std::size_t count, double val_fraction, std::uint64_t seed,
                       std::vector<std::size_t>& train, std::vector<std::size_t>& val) {
    split_indices(count, val_fraction, mix_seed(seed, 0xDA7AULL), train, val);
}

// Window of side `side` around (row, col), clamped inside the image.
inline HsiCube extract_patch(const HsiCube& cube, std::uint32_t row, std::uint32_t col,
                             int side) {
    const int half = side / 2;
    int r0 = static_cast<int>(row) - half;
    int c0 = static_cast<int>(col) - half;
    r0 = std::clamp(r0, 0, static_cast<int>(cube.height) - side);
    c0 = std::clamp(c0, 0, static_cast<int>(cube.width) - side);
    HsiCube out;
    out.height = static_cast<std::uint32_t>(side);
    out.width = static_cast<std::uint32_t>(side);
    out.num_bands = cube.num_bands;
    out.wavelengths = cube.wavelengths;
    out.values.resize(out.size());
    for (std::uint32_t b = 0; b < cube.num_bands; ++b)
        for (int r = 0; r < side; ++r)
            for (int c = 0; c < side; ++c)
                out.at(b, static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)) =
                    cube.at(b, static_cast<std::uint32_t>(r0 + r),
                            static_cast<std::uint32_t>(c0 + c));
    return out;
}

}  // namespace detail

// One patch per labeled pixel, centered on it (clamped at borders), labeled
// by the center pixel.
inline ScosDataset make_classification_dataset(const HsiCube& cube, const LabelMap& labels,
                                               const ScosTrainConfig& cfg) {
    if (cube.height != labels.height || cube.width != labels.width)
        throw std::invalid_argument("make_classification_dataset: cube/label shape mismatch");
    if (cfg.patch_side < 1 || static_cast<std::uint32_t>(cfg.patch_side) > cube.height ||
        static_cast<std::uint32_t>(cfg.patch_side) > cube.width)
        throw std::invalid_argument("make_classification_dataset: patch side does not fit");
    ScosDataset data;
    data.task = TaskKind::Classification;
    data.num_bands = static_cast<int>(cube.num_bands);
    data.patch_side = cfg.patch_side;
    data.num_classes = static_cast<int>(labels.num_classes);
    for (std::uint32_t r = 0; r < cube.height; ++r) {
        for (std::uint32_t c = 0; c < cube.width; ++c) {
            const std::uint16_t l = labels.labels[static_cast<std::size_t>(r) * cube.width + c];
            if (l == 0) continue;
            data.patches.push_back(
                transform_patch(detail::extract_patch(cube, r, c, cfg.patch_side)));
            data.labels.push_back(static_cast<int>(l));
        }
    }
    if (data.patches.empty())
        throw std::invalid_argument("make_classification_dataset: no labeled pixels");
    detail::scos_split(data.patches.size(), cfg.val_fraction, cfg.seed, data.train_idx,
                       data.val_idx);
    return data;
}

// Non-overlapping tiling of the cube into patches; each patch is its own
// reconstruction target.
inline ScosDataset make_reconstruction_dataset(const HsiCube& cube, const ScosTrainConfig& cfg) {
    if (cfg.patch_side < 1 || static_cast<std::uint32_t>(cfg.patch_side) > cube.height ||
        static_cast<std::uint32_t>(cfg.patch_side) > cube.width)
        throw std::invalid_argument("make_reconstruction_dataset: patch side does not fit");
    ScosDataset data;
    data.task = TaskKind::Reconstruction;
    data.num_bands = static_cast<int>(cube.num_bands);
    data.patch_side = cfg.patch_side;
    const auto side = static_cast<std::uint32_t>(cfg.patch_side);
    for (std::uint32_t r = 0; r + side <= cube.height; r += side)
        for (std::uint32_t c = 0; c + side <= cube.width; c += side)
            data.patches.push_back(transform_patch(
                detail::extract_patch(cube, r + side / 2, c + side / 2, cfg.patch_side)));
    if (data.patches.empty())
        throw std::invalid_argument("make_reconstruction_dataset: no patches");
    detail::scos_split(data.patches.size(), cfg.val_fraction, cfg.seed, data.train_idx,
                       data.val_idx);
    return data;
}

enum class ScosLoss { CrossEntropy, Mrae, Mse };

inline ScosLoss default_loss(TaskKind task) {
    return task == TaskKind::Classification ? ScosLoss::CrossEntropy : ScosLoss::Mrae;
}

// Gradients for every learnable block (layout mirrors SupernetParams; blocks
// not demanded by pe_kind stay empty). E_SS is fixed under APE and has no
// gradient there.
struct SupernetGrads {
    Eigen::MatrixXd w1, w2, e_ss, head_w;
    Eigen::VectorXd b1, b2, e_b, e_p, head_b;
};

// Batch loss and its gradients by manual backpropagation. The batch is a set
// of dataset indices; the same bc applies to every sample (one combination
// per step is the one-shot sampling rule).
inline std::pair<double, SupernetGrads> loss_and_grads(const SupernetParams& p,
                                                       const ScosDataset& data,
                                                       const std::vector<std::size_t>& batch,
                                                       const BandCombination& bc,
                                                       ScosLoss loss_kind) {
    if (batch.empty()) throw std::invalid_argument("loss_and_grads: empty batch");
    if (bc.k() != p.k) throw std::invalid_argument("loss_and_grads: combination size mismatch");
    bc.validate(p.num_bands);
    if ((loss_kind == ScosLoss::CrossEntropy) != (p.task == TaskKind::Classification))
        throw std::invalid_argument("loss_and_grads: loss does not match the task");

    SupernetGrads g;
    g.w1 = Eigen::MatrixXd::Zero(p.hw, p.hw);
    g.b1 = Eigen::VectorXd::Zero(p.hw);
    if (p.pe_kind == PeKind::Slpe) {
        g.w2 = Eigen::MatrixXd::Zero(p.hw, p.hw);
        g.b2 = Eigen::VectorXd::Zero(p.hw);
        g.e_b = Eigen::VectorXd::Zero(p.num_bands);
        g.e_p = Eigen::VectorXd::Zero(p.hw);
    } else if (p.pe_kind == PeKind::Clpe) {
        g.e_ss = Eigen::MatrixXd::Zero(p.num_bands, p.hw);
    }
    g.head_w = Eigen::MatrixXd::Zero(p.head_rows(), p.k);
    g.head_b = Eigen::VectorXd::Zero(p.head_rows());

    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;

    for (std::size_t idx : batch) {
        const Eigen::MatrixXd& tp = data.patches.at(idx);
        const Eigen::MatrixXd t = tp.transpose();  // N x HW

        // Forward, keeping intermediates for the backward pass.
        Eigen::MatrixXd base = t * p.w1;
        base.rowwise() += p.b1.transpose();
        Eigen::MatrixXd pre_mlp2;  // SLPE: MLP1 output + E_p
        Eigen::MatrixXd e_h;
        if (p.pe_kind == PeKind::Slpe) {
            pre_mlp2 = base;
            pre_mlp2.rowwise() += p.e_p.transpose();
            e_h = pre_mlp2 * p.w2;
            e_h.rowwise() += p.b2.transpose();
            e_h.colwise() += p.e_b;
        } else if (p.pe_kind == PeKind::None) {
            e_h = base;
        } else {
            e_h = base + p.e_ss;
        }
        const Eigen::MatrixXd m_h = select_encoded(e_h, bc);

        Eigen::MatrixXd d_m(p.k, p.hw);
        if (p.task == TaskKind::Classification) {
            const Eigen::VectorXd pooled = m_h.rowwise().mean();
            const Eigen::VectorXd logits = p.head_w * pooled + p.head_b;
            const double mx = logits.maxCoeff();
            const Eigen::VectorXd shifted = (logits.array() - mx).exp();
            const double z = shifted.sum();
            const int y = data.labels.at(idx) - 1;
            loss += inv_b * (std::log(z) + mx - logits(y));

            Eigen::VectorXd d_logits = shifted / z;  // softmax probabilities
            d_logits(y) -= 1.0;
            d_logits *= inv_b;
            g.head_w += d_logits * pooled.transpose();
            g.head_b += d_logits;
            const Eigen::VectorXd d_pooled = p.head_w.transpose() * d_logits;
            d_m = d_pooled * Eigen::RowVectorXd::Constant(p.hw, 1.0 / static_cast<double>(p.hw));
        } else {
            Eigen::MatrixXd y_hat = p.head_w * m_h;
            y_hat.colwise() += p.head_b;
            const Eigen::MatrixXd& y_true = t;
            const double inv_count = 1.0 / static_cast<double>(y_true.size());
            Eigen::MatrixXd d_yhat(y_hat.rows(), y_hat.cols());
            if (loss_kind == ScosLoss::Mrae) {
                const Eigen::ArrayXXd denom = y_true.array() + kMraeEpsilon;
                const Eigen::ArrayXXd diff = y_hat.array() - y_true.array();
                loss += inv_b * (diff.abs() / denom).sum() * inv_count;
                d_yhat = (inv_b * inv_count * diff.sign() / denom).matrix();
            } else {
                const Eigen::ArrayXXd diff = y_hat.array() - y_true.array();
                loss += inv_b * diff.square().sum() * inv_count;
                d_yhat = (inv_b * inv_count * 2.0 * diff).matrix();
            }
            g.head_w += d_yhat * m_h.transpose();
            g.head_b += d_yhat.rowwise().sum();
            d_m = p.head_w.transpose() * d_yhat;
        }

        // Scatter the selected-row gradient back into E_H.
        Eigen::MatrixXd d_e = Eigen::MatrixXd::Zero(p.num_bands, p.hw);
        for (std::size_t j = 0; j < bc.indices.size(); ++j)
            d_e.row(bc.indices[j]) += d_m.row(static_cast<Eigen::Index>(j));

        Eigen::MatrixXd d_base;
        if (p.pe_kind == PeKind::Slpe) {
            g.e_b += d_e.rowwise().sum();
            g.b2 += d_e.colwise().sum();
            g.w2 += pre_mlp2.transpose() * d_e;
            const Eigen::MatrixXd d_pre = d_e * p.w2.transpose();
            g.e_p += d_pre.colwise().sum();
            d_base = d_pre;
        } else {
            if (p.pe_kind == PeKind::Clpe) g.e_ss += d_e;
            d_base = d_e;
        }
        g.w1 += t.transpose() * d_base;
        g.b1 += d_base.colwise().sum();
    }
    return {loss, std::move(g)};
}

struct TrainLogRow {
    std::uint64_t step;
    double loss;
    BandCombination bands;
};

// One-shot training (Eq.-style joint weight learning): every step samples one
// uniform random combination and one minibatch, then takes a plain gradient
// descent step on the task loss. Deterministic given cfg.seed.
inline SupernetParams train_one_shot(const ScosDataset& data, PeKind pe,
                                     const ScosTrainConfig& cfg,
                                     std::vector<TrainLogRow>* log = nullptr) {
    if (data.train_idx.empty()) throw std::invalid_argument("train_one_shot: empty training split");
    if (cfg.batch_size < 1) throw std::invalid_argument("train_one_shot: batch size must be >= 1");
    if (cfg.learning_rate <= 0.0)
        throw std::invalid_argument("train_one_shot: learning rate must be positive");
    if (cfg.k < 1 || cfg.k >= data.num_bands)
        throw std::invalid_argument("train_one_shot: need 1 <= K < N");

    SupernetParams p = init_supernet(pe, data.task, data.num_bands, data.hw(), cfg.k,
                                     data.num_classes, cfg.seed);
    const ScosLoss loss_kind = default_loss(data.task);
    Rng rng(mix_seed(cfg.seed, 0x07A11ULL));
    const int batch =
        std::min<int>(cfg.batch_size, static_cast<int>(data.train_idx.size()));

    for (std::uint64_t step = 0; step < cfg.iterations; ++step) {
        const BandCombination bc(rng.sample_without_replacement(data.num_bands, cfg.k));
        const std::vector<int> rows =
            rng.sample_without_replacement(static_cast<int>(data.train_idx.size()), batch);
        std::vector<std::size_t> indices;
        indices.reserve(rows.size());
        for (int r : rows) indices.push_back(data.train_idx[static_cast<std::size_t>(r)]);

        auto [loss, g] = loss_and_grads(p, data, indices, bc, loss_kind);
        if (!std::isfinite(loss))
            throw std::runtime_error("train_one_shot: training diverged at step " +
                                     std::to_string(step));
        if (log != nullptr) log->push_back({step, loss, bc});

        const double lr = cfg.learning_rate;
        p.w1 -= lr * g.w1;
        p.b1 -= lr * g.b1;
        if (p.pe_kind == PeKind::Slpe) {
            p.w2 -= lr * g.w2;
            p.b2 -= lr * g.b2;
            p.e_b -= lr * g.e_b;
            p.e_p -= lr * g.e_p;
        } else if (p.pe_kind == PeKind::Clpe) {
            p.e_ss -= lr * g.e_ss;
        }
        p.head_w -= lr * g.head_w;
        p.head_b -= lr * g.head_b;
        ++p.steps;
    }
    return p;
}

// Forward-only primary metric of a combination over the validation split:
// overall accuracy for classification, PSNR for reconstruction.
inline double evaluate_bc(const SupernetParams& p, const ScosDataset& data,
                          const BandCombination& bc) {
    if (data.val_idx.empty()) throw std::invalid_argument("evaluate_bc: empty validation split");
    if (p.task != data.task) throw std::invalid_argument("evaluate_bc: task mismatch");
    if (p.task == TaskKind::Classification) {
        std::size_t correct = 0;
        for (std::size_t idx : data.val_idx) {
            const ForwardOutput out = forward(p, data.patches[idx], bc);
            Eigen::Index arg = 0;
            out.logits.maxCoeff(&arg);
            if (static_cast<int>(arg) + 1 == data.labels[idx]) ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(data.val_idx.size());
    }
    double se = 0.0;
    std::size_t count = 0;
    for (std::size_t idx : data.val_idx) {
        const ForwardOutput out = forward(p, data.patches[idx], bc);
        const Eigen::MatrixXd diff = out.reconstruction - data.patches[idx].transpose();
        se += diff.squaredNorm();
        count += static_cast<std::size_t>(diff.size());
    }
    const double mse = se / static_cast<double>(count);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

// Supernet-backed Evaluator: full metric map by pure inference over the
// validation split. The seed argument is ignored (the trained weights are the
// only state).
inline Evaluator make_supernet_evaluator(std::shared_ptr<const SupernetParams> params,
                                         std::shared_ptr<const ScosDataset> data) {
    if (params->task != data->task)
        throw std::invalid_argument("make_supernet_evaluator: task mismatch");
    Evaluator ev;
    ev.task = TaskSpec::for_kind(params->task);
    ev.backbone_id = "scos-" + pe_kind_name(params->pe_kind);
    ev.eval = [params, data](const BandCombination& bc, std::uint64_t) -> MetricMap {
        if (data->task == TaskKind::Classification) {
            LabelMap ref;
            ref.height = 1;
            ref.width = static_cast<std::uint32_t>(data->val_idx.size());
            ref.num_classes = static_cast<std::uint32_t>(data->num_classes);
            ref.labels.resize(data->val_idx.size());
            std::vector<std::uint16_t> pred(data->val_idx.size());
            for (std::size_t i = 0; i < data->val_idx.size(); ++i) {
                const std::size_t idx = data->val_idx[i];
                ref.labels[i] = static_cast<std::uint16_t>(data->labels[idx]);
                const ForwardOutput out = forward(*params, data->patches[idx], bc);
                Eigen::Index arg = 0;
                out.logits.maxCoeff(&arg);
                pred[i] = static_cast<std::uint16_t>(arg + 1);
            }
            return classification_metrics(pred, ref).as_map();
        }
        std::vector<double> rec, ref;
        for (std::size_t idx : data->val_idx) {
            const ForwardOutput out = forward(*params, data->patches[idx], bc);
            const Eigen::MatrixXd truth = data->patches[idx].transpose();
            rec.insert(rec.end(), out.reconstruction.data(),
                       out.reconstruction.data() + out.reconstruction.size());
            ref.insert(ref.end(), truth.data(), truth.data() + truth.size());
        }
        return {{"MRAE", mrae(std::span<const double>(rec), std::span<const double>(ref))},
                {"PSNR", psnr(std::span<const double>(rec), std::span<const double>(ref))}};
    };
    return ev;
}

// Training-free search: random sampling of M combinations scored by supernet
// inference alone.
inline SearchResult scos_search(std::shared_ptr<const SupernetParams> params,
                                std::shared_ptr<const ScosDataset> data, const SearchSpace& space,
                                std::uint64_t m, std::uint64_t seed) {
    const Evaluator ev = make_supernet_evaluator(params, data);
    return random_search(ev, space, m, ev.task.primary_metric, seed);
}

// ---------------------------------------------------------------------------
// Gradient validation: every analytic partial against central finite
// differences (step 1e-4). Returns the maximum relative error with the
// denominator floored at 1e-8.
// ---------------------------------------------------------------------------

namespace detail {

struct ParamView {
    double* data;
    Eigen::Index size;
    const double* grad;
};

inline std::vector<ParamView> learnable_views(SupernetParams& p, const SupernetGrads& g) {
    std::vector<ParamView> v;
    v.push_back({p.w1.data(), p.w1.size(), g.w1.data()});
    v.push_back({p.b1.data(), p.b1.size(), g.b1.data()});
    if (p.pe_kind == PeKind::Slpe) {
        v.push_back({p.w2.data(), p.w2.size(), g.w2.data()});
        v.push_back({p.b2.data(), p.b2.size(), g.b2.data()});
        v.push_back({p.e_b.data(), p.e_b.size(), g.e_b.data()});
        v.push_back({p.e_p.data(), p.e_p.size(), g.e_p.data()});
    } else if (p.pe_kind == PeKind::Clpe) {
        v.push_back({p.e_ss.data(), p.e_ss.size(), g.e_ss.data()});
    }
    v.push_back({p.head_w.data(), p.head_w.size(), g.head_w.data()});
    v.push_back({p.head_b.data(), p.head_b.size(), g.head_b.data()});
    return v;
}

}  // namespace detail

inline double grad_check(const SupernetParams& params, const ScosDataset& data,
                         const std::vector<std::size_t>& batch, const BandCombination& bc,
                         ScosLoss loss_kind, double step = 1e-4) {
    SupernetParams p = params;  // local copy we can perturb
    const auto [loss, grads] = loss_and_grads(p, data, batch, bc, loss_kind);
    (void)loss;
    double max_rel = 0.0;
    for (auto& view : detail::learnable_views(p, grads)) {
        for (Eigen::Index i = 0; i < view.size; ++i) {
            const double saved = view.data[i];
            view.data[i] = saved + step;
            const double lp = loss_and_grads(p, data, batch, bc, loss_kind).first;
            view.data[i] = saved - step;
            const double lm = loss_and_grads(p, data, batch, bc, loss_kind).first;
            view.data[i] = saved;
            const double numeric = (lp - lm) / (2.0 * step);
            const double analytic = view.grad[i];
            const double denom = std::max({1e-8, std::abs(analytic), std::abs(numeric)});
            max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
        }
    }
    return max_rel;
}

}  // namespace bss
