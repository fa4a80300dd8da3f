#pragma once

// Deep linear chains W_H ... W_1 against the rank-constrained shallow problem
// min ||Y - R X|| s.t. rank R <= d_p, where d_p is the narrowest layer.
//
// Loss convention throughout: 1/2 ||Y - R X||_F^2 / N for N samples (columns).

#include "ovlab/parallel.hpp"
#include "ovlab/rng.hpp"
#include "ovlab/spectral.hpp"
#include "ovlab/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace ovlab {

template <typename Scalar>
class DeepLinearNet {
public:
    /// layers[k] maps R^{d_k} -> R^{d_{k+1}}; layers.front() acts first.
    explicit DeepLinearNet(std::vector<Mat<Scalar>> layers) : layers_(std::move(layers)) {
        if (layers_.empty()) {
            throw std::invalid_argument("DeepLinearNet: at least one layer is required");
        }
        dims_.push_back(layers_.front().cols());
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            if (layers_[k].cols() != dims_.back()) {
                throw std::invalid_argument("DeepLinearNet: layer " + std::to_string(k + 1) +
                                            " does not compose with the previous layer");
            }
            dims_.push_back(layers_[k].rows());
        }
    }

    std::size_t depth() const noexcept { return layers_.size(); }
    const std::vector<Index>& dims() const noexcept { return dims_; }
    const std::vector<Mat<Scalar>>& layers() const noexcept { return layers_; }
    std::vector<Mat<Scalar>>& layers() noexcept { return layers_; }

    /// 1-based layer access, W_1 ... W_H.
    const Mat<Scalar>& W(std::size_t k) const { return layers_.at(k - 1); }
    Mat<Scalar>& W(std::size_t k) { return layers_.at(k - 1); }

    /// Index p of the first narrowest entry of dims (an argmin of d_k).
    std::size_t bottleneck() const {
        return static_cast<std::size_t>(std::min_element(dims_.begin(), dims_.end()) - dims_.begin());
    }
    Index bottleneck_width() const { return dims_[bottleneck()]; }

private:
    std::vector<Mat<Scalar>> layers_;
    std::vector<Index> dims_;
};

namespace detail {

inline void check_dims(const std::vector<Index>& dims) {
    if (dims.size() < 2) {
        throw std::invalid_argument("layer dimensions need at least input and output entries");
    }
    for (Index v : dims) {
        if (v < 1) {
            throw std::invalid_argument("layer dimensions must be >= 1");
        }
    }
}

template <typename Scalar>
void check_regression_shapes(Index in_dim, Index out_dim, const Mat<Scalar>& X, const Mat<Scalar>& Y) {
    if (X.rows() != in_dim || Y.rows() != out_dim || X.cols() != Y.cols()) {
        throw std::invalid_argument("regression shapes do not match the map");
    }
    if (X.cols() < 1) {
        throw std::invalid_argument("regression needs at least one sample");
    }
}

} // namespace detail

/// Gaussian chain with W_k entries drawn from N(0, 1 / d_{k-1}), layer by layer, row-major.
template <typename Scalar = double>
DeepLinearNet<Scalar> init_deep_linear(const std::vector<Index>& dims, std::uint64_t seed) {
    detail::check_dims(dims);
    Rng rng(seed);
    std::vector<Mat<Scalar>> layers;
    for (std::size_t k = 1; k < dims.size(); ++k) {
        const double sd = 1.0 / std::sqrt(static_cast<double>(dims[k - 1]));
        Mat<Scalar> w(dims[k], dims[k - 1]);
        for (Index r = 0; r < w.rows(); ++r) {
            for (Index c = 0; c < w.cols(); ++c) {
                w(r, c) = static_cast<Scalar>(sd * rng.normal());
            }
        }
        layers.push_back(std::move(w));
    }
    return DeepLinearNet<Scalar>(std::move(layers));
}

/// R = W_H ... W_1
template <typename Scalar>
Mat<Scalar> product_map(const DeepLinearNet<Scalar>& net) {
    Mat<Scalar> r = net.layers().front();
    for (std::size_t k = 1; k < net.depth(); ++k) {
        r = net.layers()[k] * r;
    }
    return r;
}

template <typename Scalar>
Scalar shallow_linear_loss(const Mat<Scalar>& R, const Mat<Scalar>& X, const Mat<Scalar>& Y) {
    detail::check_regression_shapes(R.cols(), R.rows(), X, Y);
    return Scalar(0.5) * (Y - R * X).squaredNorm() / static_cast<Scalar>(X.cols());
}

/// Evaluated layer by layer, W_H(...(W_1 X)).
template <typename Scalar>
Scalar deep_linear_loss(const DeepLinearNet<Scalar>& net, const Mat<Scalar>& X, const Mat<Scalar>& Y) {
    detail::check_regression_shapes(net.dims().front(), net.dims().back(), X, Y);
    Mat<Scalar> act = X;
    for (const auto& w : net.layers()) {
        act = w * act;
    }
    return Scalar(0.5) * (Y - act).squaredNorm() / static_cast<Scalar>(X.cols());
}

/// Gradient of deep_linear_loss with respect to every layer, same order as layers().
template <typename Scalar>
std::vector<Mat<Scalar>> deep_linear_gradients(const DeepLinearNet<Scalar>& net, const Mat<Scalar>& X,
                                               const Mat<Scalar>& Y) {
    detail::check_regression_shapes(net.dims().front(), net.dims().back(), X, Y);
    const std::size_t depth = net.depth();
    std::vector<Mat<Scalar>> acts;
    acts.reserve(depth + 1);
    acts.push_back(X);
    for (const auto& w : net.layers()) {
        acts.push_back(w * acts.back());
    }
    Mat<Scalar> back = (acts.back() - Y) / static_cast<Scalar>(X.cols());
    std::vector<Mat<Scalar>> grads(depth);
    for (std::size_t k = depth; k-- > 0;) {
        grads[k] = back * acts[k].transpose();
        if (k > 0) {
            back = net.layers()[k].transpose() * back;
        }
    }
    return grads;
}

template <typename Scalar>
struct RankConstrainedSolution {
    Mat<Scalar> R;
    Scalar loss;
    /// Unconstrained least-squares fit.
    Mat<Scalar> ols;
    Scalar ols_loss;
};

/// Reduced-rank regression: fit B by least squares, truncate the fitted values
/// F = B X to their best rank-`rank` approximation, and map that back to the
/// coefficient space (F_p lies in the row space of X, so F_p = R X exactly).
template <typename Scalar>
RankConstrainedSolution<Scalar> rank_constrained_optimum(const Mat<Scalar>& X, const Mat<Scalar>& Y, Index rank) {
    if (rank < 1) {
        throw std::invalid_argument("rank_constrained_optimum: rank bound must be >= 1");
    }
    if (X.cols() != Y.cols() || X.cols() < 1) {
        throw std::invalid_argument("rank_constrained_optimum: X and Y must have the same positive sample count");
    }
    if (rank_with_tol(X) != X.rows()) {
        throw std::invalid_argument("rank_constrained_optimum: X must have full row rank");
    }
    const Eigen::ColPivHouseholderQR<Mat<Scalar>> qr(X.transpose());
    const Mat<Scalar> ols = qr.solve(Y.transpose()).transpose();
    const Mat<Scalar> fitted = ols * X;

    RankConstrainedSolution<Scalar> out{.R = ols, .loss = 0, .ols = ols, .ols_loss = 0};
    out.ols_loss = shallow_linear_loss(ols, X, Y);
    if (rank < std::min(fitted.rows(), fitted.cols())) {
        Eigen::JacobiSVD<Mat<Scalar>> svd(fitted, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Mat<Scalar> truncated = svd.matrixU().leftCols(rank) *
                                      svd.singularValues().head(rank).asDiagonal() *
                                      svd.matrixV().leftCols(rank).transpose();
        out.R = qr.solve(truncated.transpose()).transpose();
    }
    out.loss = shallow_linear_loss(out.R, X, Y);
    return out;
}

enum class RunStatus {
    global,         ///< gradient stop reached at the global value
    suspect,        ///< gradient stop reached above the global value (saddle stall)
    unconverged,    ///< step cap hit before the gradient stop
    diverged,       ///< non-finite loss
};

std::string to_string(RunStatus status);

struct RunOutcome {
    std::uint64_t seed = 0;
    double final_loss = 0.0;
    double grad_norm = 0.0;
    long steps = 0;
    bool converged = false;
    RunStatus status = RunStatus::unconverged;
};

struct LandscapeResult {
    std::vector<RunOutcome> runs;
    double global_loss = 0.0;
    double tol = 0.0;
    /// True iff at least one run converged and every converged run sits at the global value.
    bool verdict = false;

    std::size_t count(RunStatus status) const {
        return static_cast<std::size_t>(
            std::count_if(runs.begin(), runs.end(), [&](const RunOutcome& r) { return r.status == status; }));
    }
};

struct GdOptions {
    std::size_t n_inits = 50;
    long max_steps = 1'000'000;
    double eta = 0.05;
    double grad_tol = 1e-10;
    double rel_tol = 1e-4;
    std::uint64_t seed = 0;
};

/// |value - target| <= rel_tol |target| + 1e-12
inline bool within_relative(double value, double target, double rel_tol) {
    return std::abs(value - target) <= rel_tol * std::abs(target) + 1e-12;
}

/// Plain full-batch gradient descent on one chain, in place.
template <typename Scalar>
RunOutcome run_deep_linear_gd(DeepLinearNet<Scalar>& net, const Mat<Scalar>& X, const Mat<Scalar>& Y,
                              const GdOptions& opts) {
    RunOutcome out;
    const auto eta = static_cast<Scalar>(opts.eta);
    for (long step = 0;; ++step) {
        const auto grads = deep_linear_gradients(net, X, Y);
        Scalar gsq = 0;
        for (const auto& g : grads) {
            gsq += g.squaredNorm();
        }
        out.grad_norm = static_cast<double>(std::sqrt(gsq));
        out.steps = step;
        if (!std::isfinite(out.grad_norm)) {
            out.status = RunStatus::diverged;
            break;
        }
        if (out.grad_norm < opts.grad_tol) {
            out.converged = true;
            break;
        }
        if (step == opts.max_steps) {
            break;
        }
        for (std::size_t k = 0; k < grads.size(); ++k) {
            net.layers()[k] -= eta * grads[k];
        }
    }
    out.final_loss = static_cast<double>(deep_linear_loss(net, X, Y));
    if (!std::isfinite(out.final_loss)) {
        out.status = RunStatus::diverged;
        out.converged = false;
    }
    return out;
}

/// Gradient descent from n_inits independent Gaussian initializations, each
/// compared with the rank-constrained optimum through the bottleneck width.
template <typename Scalar>
LandscapeResult multi_init_gd(const std::vector<Index>& dims, const Mat<Scalar>& X, const Mat<Scalar>& Y,
                              const GdOptions& opts) {
    detail::check_dims(dims);
    detail::check_regression_shapes(dims.front(), dims.back(), X, Y);
    if (!(opts.eta > 0.0) || opts.n_inits < 1) {
        throw std::invalid_argument("multi_init_gd: eta must be positive and n_inits >= 1");
    }
    const Index bottleneck = *std::min_element(dims.begin(), dims.end());
    const auto star = rank_constrained_optimum(X, Y, bottleneck);

    LandscapeResult result;
    result.global_loss = static_cast<double>(star.loss);
    result.tol = opts.rel_tol;
    result.runs.resize(opts.n_inits);
    parallel_for(opts.n_inits, [&](std::size_t i) {
        const std::uint64_t seed = derive_seed(opts.seed, i);
        auto net = init_deep_linear<Scalar>(dims, seed);
        RunOutcome run = run_deep_linear_gd(net, X, Y, opts);
        run.seed = seed;
        if (run.converged) {
            run.status = within_relative(run.final_loss, result.global_loss, opts.rel_tol) ? RunStatus::global
                                                                                            : RunStatus::suspect;
        }
        result.runs[i] = run;
    });

    std::size_t converged = 0;
    bool all_global = true;
    for (const auto& run : result.runs) {
        if (run.converged) {
            ++converged;
            all_global = all_global && run.status == RunStatus::global;
        }
    }
    result.verdict = converged > 0 && all_global;
    return result;
}

/// Loss after W_k <- c W_k and W_{k+1} <- W_{k+1} / c (1-based k, 1 <= k < H)
/// equals the original loss within 1e-12 relative.
template <typename Scalar>
bool scale_symmetry_check(const DeepLinearNet<Scalar>& net, std::size_t k, Scalar c, const Mat<Scalar>& X,
                          const Mat<Scalar>& Y) {
    if (c == Scalar(0)) {
        throw std::invalid_argument("scale_symmetry_check: factor must be nonzero");
    }
    if (k < 1 || k >= net.depth()) {
        throw std::invalid_argument("scale_symmetry_check: layer index must satisfy 1 <= k < H");
    }
    DeepLinearNet<Scalar> scaled = net;
    scaled.W(k) *= c;
    scaled.W(k + 1) /= c;
    const Scalar before = deep_linear_loss(net, X, Y);
    const Scalar after = deep_linear_loss(scaled, X, Y);
    return std::abs(after - before) <= Scalar(1e-12) * std::max(std::abs(before), Scalar(1e-300));
}

} // namespace ovlab
