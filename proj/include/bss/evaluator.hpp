#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "bss/hsi.hpp"
#include "bss/metrics.hpp"
#include "bss/rng.hpp"

namespace bss {

// Performance oracle for a band combination: (bc, seed) -> metric map,
// deterministic given both arguments. Flavors: table-backed lookup (bench.hpp),
// live training on selected bands (below), supernet inference (scos.hpp).
struct Evaluator {
    TaskSpec task;
    std::string backbone_id;
    std::function<MetricMap(const BandCombination&, std::uint64_t)> eval;

    MetricMap operator()(const BandCombination& bc, std::uint64_t seed) const {
        return eval(bc, seed);
    }
};

namespace detail {

// Deterministic train/validation pixel split over the labeled (or all)
// pixels. The split depends only on (pixel count, seed), never on the bc, so
// every combination is scored against the same folds.
inline void split_indices(std::size_t count, double val_fraction, std::uint64_t seed,
                          std::vector<std::size_t>& train, std::vector<std::size_t>& val) {
    if (val_fraction <= 0.0 || val_fraction >= 1.0)
        throw std::invalid_argument("split_indices: val_fraction must be in (0, 1)");
    std::vector<std::size_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = i;
    Rng rng(mix_seed(seed, 0x5b117ULL));
    rng.shuffle(idx);
    const std::size_t n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(static_cast<double>(count) * val_fraction));
    if (n_val >= count)
        throw std::invalid_argument("split_indices: split leaves no training data");
    val.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
}

// Pixel values of the selected bands as an (#pixels x K) matrix restricted to
// the given pixel indices.
inline Eigen::MatrixXd gather_bands(const HsiCube& cube, const BandCombination& bc,
                                    const std::vector<std::size_t>& pixels) {
    Eigen::MatrixXd x(pixels.size(), bc.indices.size());
    const std::size_t plane = cube.plane_size();
    for (std::size_t c = 0; c < bc.indices.size(); ++c) {
        const float* p = cube.values.data() + static_cast<std::size_t>(bc.indices[c]) * plane;
        for (std::size_t r = 0; r < pixels.size(); ++r)
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                static_cast<double>(p[pixels[r]]);
    }
    return x;
}

inline ClassificationMetrics metrics_on_val(const LabelMap& reference,
                                            const std::vector<std::size_t>& val,
                                            const std::vector<std::uint16_t>& val_pred) {
    // Reuse the public metric op: reference copy with everything outside the
    // validation fold marked background, predictions scattered in place.
    LabelMap ref_val = reference;
    std::fill(ref_val.labels.begin(), ref_val.labels.end(), std::uint16_t{0});
    std::vector<std::uint16_t> pred(reference.size(), 0);
    for (std::size_t i = 0; i < val.size(); ++i) {
        ref_val.labels[val[i]] = reference.labels[val[i]];
        pred[val[i]] = val_pred[i];
    }
    return classification_metrics(pred, ref_val);
}

}  // namespace detail

// Nearest-centroid classifier trained on the selected bands of the labeled
// pixels. The paper-scale backbone stand-in for classification tables.
inline Evaluator make_centroid_evaluator(std::shared_ptr<const HsiCube> cube,
                                         std::shared_ptr<const LabelMap> labels,
                                         double val_fraction = 0.5) {
    if (cube->height != labels->height || cube->width != labels->width)
        throw std::invalid_argument("make_centroid_evaluator: cube/label shape mismatch");
    Evaluator ev;
    ev.task = TaskSpec::classification();
    ev.backbone_id = "centroid";
    ev.eval = [cube, labels, val_fraction](const BandCombination& bc,
                                           std::uint64_t seed) -> MetricMap {
        bc.validate(static_cast<int>(cube->num_bands));
        std::vector<std::size_t> labeled;
        for (std::size_t i = 0; i < labels->labels.size(); ++i)
            if (labels->labels[i] != 0) labeled.push_back(i);

        std::vector<std::size_t> train_rows, val_rows;
        detail::split_indices(labeled.size(), val_fraction, seed, train_rows, val_rows);
        std::vector<std::size_t> train_px, val_px;
        for (std::size_t r : train_rows) train_px.push_back(labeled[r]);
        for (std::size_t r : val_rows) val_px.push_back(labeled[r]);

        const Eigen::MatrixXd x_train = detail::gather_bands(*cube, bc, train_px);
        const Eigen::MatrixXd x_val = detail::gather_bands(*cube, bc, val_px);
        const auto k = static_cast<Eigen::Index>(bc.indices.size());
        const std::uint32_t num_classes = labels->num_classes;

        Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(num_classes + 1, k);
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(num_classes + 1);
        for (std::size_t r = 0; r < train_px.size(); ++r) {
            const std::uint16_t c = labels->labels[train_px[r]];
            centroids.row(c) += x_train.row(static_cast<Eigen::Index>(r));
            counts(c) += 1.0;
        }
        for (std::uint32_t c = 1; c <= num_classes; ++c)
            if (counts(c) > 0.0) centroids.row(c) /= counts(c);

        std::vector<std::uint16_t> pred(val_px.size());
        for (std::size_t r = 0; r < val_px.size(); ++r) {
            double best = std::numeric_limits<double>::infinity();
            std::uint16_t best_c = 1;
            for (std::uint32_t c = 1; c <= num_classes; ++c) {
                if (counts(c) == 0.0) continue;
                const double d =
                    (x_val.row(static_cast<Eigen::Index>(r)) - centroids.row(c)).squaredNorm();
                if (d < best) {
                    best = d;
                    best_c = static_cast<std::uint16_t>(c);
                }
            }
            pred[r] = best_c;
        }
        return detail::metrics_on_val(*labels, val_px, pred).as_map();
    };
    return ev;
}

// One-vs-rest ridge classifier on the selected bands; predictions by argmax
// of the per-class linear scores. A second classification backbone so tables
// can be compared across backbones.
inline Evaluator make_ridge_classifier_evaluator(std::shared_ptr<const HsiCube> cube,
                                                 std::shared_ptr<const LabelMap> labels,
                                                 double val_fraction = 0.5,
                                                 double lambda = 1e-3) {
    if (cube->height != labels->height || cube->width != labels->width)
        throw std::invalid_argument("make_ridge_classifier_evaluator: cube/label shape mismatch");
    Evaluator ev;
    ev.task = TaskSpec::classification();
    ev.backbone_id = "ridge";
    ev.eval = [cube, labels, val_fraction, lambda](const BandCombination& bc,
                                                   std::uint64_t seed) -> MetricMap {
        bc.validate(static_cast<int>(cube->num_bands));
        std::vector<std::size_t> labeled;
        for (std::size_t i = 0; i < labels->labels.size(); ++i)
            if (labels->labels[i] != 0) labeled.push_back(i);

        std::vector<std::size_t> train_rows, val_rows;
        detail::split_indices(labeled.size(), val_fraction, seed, train_rows, val_rows);
        std::vector<std::size_t> train_px, val_px;
        for (std::size_t r : train_rows) train_px.push_back(labeled[r]);
        for (std::size_t r : val_rows) val_px.push_back(labeled[r]);

        const auto k = static_cast<Eigen::Index>(bc.indices.size());
        const std::uint32_t num_classes = labels->num_classes;

        // Features with intercept column.
        Eigen::MatrixXd x_train(train_px.size(), k + 1);
        x_train.col(0).setOnes();
        x_train.rightCols(k) = detail::gather_bands(*cube, bc, train_px);
        Eigen::MatrixXd x_val(val_px.size(), k + 1);
        x_val.col(0).setOnes();
        x_val.rightCols(k) = detail::gather_bands(*cube, bc, val_px);

        Eigen::MatrixXd targets = Eigen::MatrixXd::Constant(
            static_cast<Eigen::Index>(train_px.size()), num_classes, -1.0);
        for (std::size_t r = 0; r < train_px.size(); ++r)
            targets(static_cast<Eigen::Index>(r), labels->labels[train_px[r]] - 1) = 1.0;

        Eigen::MatrixXd gram = x_train.transpose() * x_train;
        Eigen::MatrixXd reg = lambda * Eigen::MatrixXd::Identity(k + 1, k + 1);
        reg(0, 0) = 0.0;  // intercept not penalized
        const Eigen::MatrixXd beta = (gram + reg).ldlt().solve(x_train.transpose() * targets);

        const Eigen::MatrixXd scores = x_val * beta;
        std::vector<std::uint16_t> pred(val_px.size());
        for (std::size_t r = 0; r < val_px.size(); ++r) {
            Eigen::Index best = 0;
            scores.row(static_cast<Eigen::Index>(r)).maxCoeff(&best);
            pred[r] = static_cast<std::uint16_t>(best + 1);
        }
        return detail::metrics_on_val(*labels, val_px, pred).as_map();
    };
    return ev;
}

// Least-squares band-to-spectrum regression: predict all N bands of each
// validation pixel from its K selected bands (affine map fitted on the
// training fold), scored by MRAE and PSNR.
inline Evaluator make_reconstruction_evaluator(std::shared_ptr<const HsiCube> cube,
                                               double val_fraction = 0.5,
                                               double lambda = 1e-6) {
    Evaluator ev;
    ev.task = TaskSpec::reconstruction();
    ev.backbone_id = "lstsq";
    ev.eval = [cube, val_fraction, lambda](const BandCombination& bc,
                                           std::uint64_t seed) -> MetricMap {
        bc.validate(static_cast<int>(cube->num_bands));
        std::vector<std::size_t> train_px, val_px;
        detail::split_indices(cube->plane_size(), val_fraction, seed, train_px, val_px);

        const auto k = static_cast<Eigen::Index>(bc.indices.size());
        const auto n = static_cast<Eigen::Index>(cube->num_bands);

        Eigen::MatrixXd x_train(train_px.size(), k + 1);
        x_train.col(0).setOnes();
        x_train.rightCols(k) = detail::gather_bands(*cube, bc, train_px);
        Eigen::MatrixXd x_val(val_px.size(), k + 1);
        x_val.col(0).setOnes();
        x_val.rightCols(k) = detail::gather_bands(*cube, bc, val_px);

        // Full-spectrum targets.
        const std::size_t plane = cube->plane_size();
        Eigen::MatrixXd y_train(train_px.size(), n);
        Eigen::MatrixXd y_val(val_px.size(), n);
        for (Eigen::Index b = 0; b < n; ++b) {
            const float* p = cube->values.data() + static_cast<std::size_t>(b) * plane;
            for (std::size_t r = 0; r < train_px.size(); ++r)
                y_train(static_cast<Eigen::Index>(r), b) = static_cast<double>(p[train_px[r]]);
            for (std::size_t r = 0; r < val_px.size(); ++r)
                y_val(static_cast<Eigen::Index>(r), b) = static_cast<double>(p[val_px[r]]);
        }

        Eigen::MatrixXd gram = x_train.transpose() * x_train;
        Eigen::MatrixXd reg = lambda * Eigen::MatrixXd::Identity(k + 1, k + 1);
        reg(0, 0) = 0.0;
        const Eigen::MatrixXd w = (gram + reg).ldlt().solve(x_train.transpose() * y_train);
        const Eigen::MatrixXd y_hat = x_val * w;

        std::vector<double> rec(y_hat.size()), ref(y_val.size());
        Eigen::Map<Eigen::MatrixXd>(rec.data(), y_hat.rows(), y_hat.cols()) = y_hat;
        Eigen::Map<Eigen::MatrixXd>(ref.data(), y_val.rows(), y_val.cols()) = y_val;
        return {{"MRAE", mrae(std::span<const double>(rec), std::span<const double>(ref))},
                {"PSNR", psnr(std::span<const double>(rec), std::span<const double>(ref))}};
    };
    return ev;
}

}  // namespace bss
