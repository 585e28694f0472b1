#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bss/hsi.hpp"
#include "bss/rng.hpp"
#include "bss/stats.hpp"

namespace bss {

inline constexpr int kFeatureLayoutVersion = 1;

// Feature layout, fixed and versioned: N one-hot band memberships, K band
// indices normalized by N-1, then bc_entropy and bc_sam (zero when no cube is
// supplied). Length N + K + 2.
inline Eigen::VectorXd featurize(const BandCombination& bc, int num_bands,
                                 const HsiCube* cube = nullptr) {
    bc.validate(num_bands);
    const int k = bc.k();
    Eigen::VectorXd f = Eigen::VectorXd::Zero(num_bands + k + 2);
    for (int b : bc.indices) f(b) = 1.0;
    for (int j = 0; j < k; ++j)
        f(num_bands + j) = static_cast<double>(bc.indices[static_cast<std::size_t>(j)]) /
                           static_cast<double>(num_bands - 1);
    if (cube != nullptr) {
        f(num_bands + k) = bc_entropy(*cube, bc);
        f(num_bands + k + 1) = k >= 2 ? bc_sam(*cube, bc) : 0.0;
    }
    return f;
}

enum class SurrogateKind { Ridge, TinyMlp };

struct SurrogateConfig {
    SurrogateKind kind = SurrogateKind::Ridge;
    int num_bands = 0;
    int k = 0;
    double lambda = 1e-3;                     // ridge penalty
    std::shared_ptr<const HsiCube> cube;      // optional: enables the two stats features
    int mlp_hidden = 32;
    int mlp_iters = 400;
    double mlp_lr = 0.05;
    std::uint64_t seed = 0;
};

struct SurrogateModel {
    SurrogateKind kind = SurrogateKind::Ridge;
    int layout_version = kFeatureLayoutVersion;
    int num_bands = 0;
    int k = 0;
    bool with_stats = false;
    double lambda = 0.0;
    double training_rmse = 0.0;

    // Ridge: weights over [intercept, features...].
    Eigen::VectorXd ridge_weights;

    // Tiny MLP: one hidden ReLU layer.
    Eigen::MatrixXd w1;  // hidden x F
    Eigen::VectorXd b1;  // hidden
    Eigen::VectorXd w2;  // hidden
    double b2 = 0.0;
};

namespace detail {

// Solves (A)w = b where A = X^T X + lambda*I is positive semidefinite. The
// system is consistent whenever b = X^T y, so a rank-deficient A is still
// solvable; the residual check catches genuine numerical failure, which is
// the "singular" error path.
inline Eigen::VectorXd solve_normal_equations(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success)
        throw std::invalid_argument(
            "ridge fit: singular normal equations; use a penalty lambda > 0");
    const Eigen::VectorXd w = ldlt.solve(b);
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    if (!w.allFinite() || (a * w - b).cwiseAbs().maxCoeff() > 1e-6 * scale)
        throw std::invalid_argument(
            "ridge fit: singular normal equations; use a penalty lambda > 0");
    return w;
}

inline double mlp_forward(const SurrogateModel& m, const Eigen::VectorXd& f) {
    const Eigen::VectorXd h = (m.w1 * f + m.b1).cwiseMax(0.0);
    return m.w2.dot(h) + m.b2;
}

}  // namespace detail

// Fits a surrogate on (bc, value) samples. Ridge solves the normal equations
// in closed form with an unpenalized intercept; the tiny MLP runs full-batch
// gradient descent with manual gradients, deterministic given config.seed.
inline SurrogateModel fit(const std::vector<std::pair<BandCombination, double>>& samples,
                          const SurrogateConfig& cfg) {
    if (samples.size() < 2) throw std::invalid_argument("surrogate fit: need at least 2 samples");
    if (cfg.num_bands < 2) throw std::invalid_argument("surrogate fit: config.num_bands not set");
    if (cfg.lambda < 0.0) throw std::invalid_argument("surrogate fit: lambda must be >= 0");

    SurrogateModel model;
    model.kind = cfg.kind;
    model.num_bands = cfg.num_bands;
    model.k = cfg.k > 0 ? cfg.k : samples.front().first.k();
    model.with_stats = cfg.cube != nullptr;
    model.lambda = cfg.lambda;

    const auto f_dim = static_cast<Eigen::Index>(cfg.num_bands + model.k + 2);
    Eigen::MatrixXd x(samples.size(), f_dim);
    Eigen::VectorXd y(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].first.k() != model.k)
            throw std::invalid_argument("surrogate fit: mixed K across samples");
        x.row(static_cast<Eigen::Index>(i)) =
            featurize(samples[i].first, cfg.num_bands, cfg.cube.get()).transpose();
        y(static_cast<Eigen::Index>(i)) = samples[i].second;
        if (!std::isfinite(samples[i].second))
            throw std::invalid_argument("surrogate fit: non-finite sample value");
    }

    if (cfg.kind == SurrogateKind::Ridge) {
        Eigen::MatrixXd xa(x.rows(), f_dim + 1);
        xa.col(0).setOnes();
        xa.rightCols(f_dim) = x;
        Eigen::MatrixXd a = xa.transpose() * xa;
        for (Eigen::Index j = 1; j < a.rows(); ++j) a(j, j) += cfg.lambda;
        model.ridge_weights = detail::solve_normal_equations(a, xa.transpose() * y);
        model.training_rmse =
            std::sqrt((xa * model.ridge_weights - y).squaredNorm() / static_cast<double>(x.rows()));
        return model;
    }

    // Tiny MLP.
    const Eigen::Index hidden = cfg.mlp_hidden;
    Rng rng(mix_seed(cfg.seed, 0x50442ULL));
    const double r1 = 1.0 / std::sqrt(static_cast<double>(f_dim));
    const double r2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    model.w1.resize(hidden, f_dim);
    model.b1 = Eigen::VectorXd::Zero(hidden);
    model.w2.resize(hidden);
    for (Eigen::Index i = 0; i < hidden; ++i)
        for (Eigen::Index j = 0; j < f_dim; ++j) model.w1(i, j) = rng.uniform_double(-r1, r1);
    for (Eigen::Index i = 0; i < hidden; ++i) model.w2(i) = rng.uniform_double(-r2, r2);
    model.b2 = 0.0;

    const auto n = static_cast<double>(x.rows());
    for (int it = 0; it < cfg.mlp_iters; ++it) {
        // Forward, all samples at once: H = relu(X W1^T + b1), out = H w2 + b2.
        Eigen::MatrixXd pre = (x * model.w1.transpose()).rowwise() + model.b1.transpose();
        Eigen::MatrixXd h = pre.cwiseMax(0.0);
        Eigen::VectorXd out = (h * model.w2).array() + model.b2;
        Eigen::VectorXd err = out - y;  // d(mse)/d(out) * n/2

        const Eigen::VectorXd d_out = (2.0 / n) * err;
        const Eigen::VectorXd d_w2 = h.transpose() * d_out;
        const double d_b2 = d_out.sum();
        Eigen::MatrixXd d_h = d_out * model.w2.transpose();
        d_h = (pre.array() > 0.0).select(d_h, 0.0);
        const Eigen::MatrixXd d_w1 = d_h.transpose() * x;
        const Eigen::VectorXd d_b1 = d_h.colwise().sum();

        model.w1 -= cfg.mlp_lr * d_w1;
        model.b1 -= cfg.mlp_lr * d_b1;
        model.w2 -= cfg.mlp_lr * d_w2;
        model.b2 -= cfg.mlp_lr * d_b2;
    }

    double sq = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double p = detail::mlp_forward(model, x.row(i).transpose());
        sq += (p - y(i)) * (p - y(i));
    }
    model.training_rmse = std::sqrt(sq / n);
    return model;
}

// Pure evaluation of a fitted model on one combination.
inline double predict(const SurrogateModel& model, const BandCombination& bc, int num_bands,
                      const HsiCube* cube = nullptr) {
    if (model.layout_version != kFeatureLayoutVersion)
        throw std::invalid_argument("surrogate predict: feature layout version mismatch");
    if (num_bands != model.num_bands || bc.k() != model.k)
        throw std::invalid_argument("surrogate predict: feature-length mismatch (model fitted for N=" +
                                    std::to_string(model.num_bands) +
                                    ", K=" + std::to_string(model.k) + ")");
    if (model.with_stats && cube == nullptr)
        throw std::invalid_argument("surrogate predict: model was fitted with cube statistics");
    const Eigen::VectorXd f = featurize(bc, num_bands, model.with_stats ? cube : nullptr);
    double value;
    if (model.kind == SurrogateKind::Ridge) {
        value = model.ridge_weights(0) + model.ridge_weights.tail(f.size()).dot(f);
    } else {
        value = detail::mlp_forward(model, f);
    }
    if (!std::isfinite(value))
        throw std::invalid_argument("surrogate predict: non-finite prediction");
    return value;
}

}  // namespace bss
