#pragma once

// Wide logistic-sigmoid networks: rank of the hidden feature matrices,
// zero-loss fits of the linear top layer, and the width/rank conditions under
// which local minima are known to be global.

#include "ovlab/data.hpp"
#include "ovlab/parallel.hpp"
#include "ovlab/rng.hpp"
#include "ovlab/spectral.hpp"
#include "ovlab/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ovlab {

/// Preactivations are clamped to [-40, 40] before exponentiation.
inline constexpr double kSigmoidClamp = 40.0;

template <typename Scalar>
Scalar logistic(Scalar z) {
    const Scalar c = std::clamp(z, Scalar(-kSigmoidClamp), Scalar(kSigmoidClamp));
    return Scalar(1) / (Scalar(1) + std::exp(-c));
}

template <typename Derived>
Mat<typename Derived::Scalar> sigmoid(const Eigen::MatrixBase<Derived>& z) {
    using Scalar = typename Derived::Scalar;
    return z.unaryExpr([](Scalar v) { return logistic(v); });
}

/// Sigmoid on every layer except the last, which is linear.
template <typename Scalar>
class SigmoidNet {
public:
    explicit SigmoidNet(std::vector<Mat<Scalar>> layers) : layers_(std::move(layers)) {
        if (layers_.size() < 2) {
            throw std::invalid_argument("SigmoidNet: needs at least one hidden layer and an output layer");
        }
        dims_.push_back(layers_.front().cols());
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            if (layers_[k].cols() != dims_.back()) {
                throw std::invalid_argument("SigmoidNet: layer " + std::to_string(k + 1) +
                                            " does not compose with the previous layer");
            }
            dims_.push_back(layers_[k].rows());
        }
    }

    std::size_t depth() const noexcept { return layers_.size(); }
    const std::vector<Index>& dims() const noexcept { return dims_; }
    const std::vector<Mat<Scalar>>& layers() const noexcept { return layers_; }
    /// 1-based, W_1 ... W_H.
    const Mat<Scalar>& W(std::size_t k) const { return layers_.at(k - 1); }
    Mat<Scalar>& W(std::size_t k) { return layers_.at(k - 1); }

private:
    std::vector<Mat<Scalar>> layers_;
    std::vector<Index> dims_;
};

/// Gaussian N(0, 1) entries for every layer, in layer order.
template <typename Scalar = double>
SigmoidNet<Scalar> init_sigmoid_net(const std::vector<Index>& dims, std::uint64_t seed) {
    if (dims.size() < 3) {
        throw std::invalid_argument("init_sigmoid_net: need at least three dimension entries");
    }
    Rng rng(seed);
    std::vector<Mat<Scalar>> layers;
    for (std::size_t k = 1; k < dims.size(); ++k) {
        Mat<Scalar> w(dims[k], dims[k - 1]);
        for (Index r = 0; r < w.rows(); ++r) {
            for (Index c = 0; c < w.cols(); ++c) {
                w(r, c) = static_cast<Scalar>(rng.normal());
            }
        }
        layers.push_back(std::move(w));
    }
    return SigmoidNet<Scalar>(std::move(layers));
}

/// F_k = sigma(W_k ... sigma(W_1 X)), 1 <= k <= H-1.
template <typename Scalar, typename Derived>
Mat<Scalar> feature_matrix(const SigmoidNet<Scalar>& net, const Eigen::MatrixBase<Derived>& X, std::size_t k) {
    if (k < 1 || k + 1 > net.depth()) {
        throw std::invalid_argument("feature_matrix: layer index must satisfy 1 <= k <= H-1");
    }
    if (X.rows() != net.dims().front()) {
        throw std::invalid_argument("feature_matrix: input dimension mismatch");
    }
    Mat<Scalar> f = X;
    for (std::size_t l = 1; l <= k; ++l) {
        f = sigmoid(net.W(l) * f);
    }
    return f;
}

/// Network output W_H F_{H-1}.
template <typename Scalar, typename Derived>
Mat<Scalar> sigmoid_forward(const SigmoidNet<Scalar>& net, const Eigen::MatrixBase<Derived>& X) {
    return net.W(net.depth()) * feature_matrix(net, X, net.depth() - 1);
}

struct TrialRecord {
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    Index rank = 0;
    double min_singular_value = 0.0;
    double max_singular_value = 0.0;
};

struct MeasureZeroResult {
    std::vector<TrialRecord> trials;
    Index target_rank = 0;
    double fraction_full_rank = 0.0;

    std::vector<TrialRecord> deficient() const {
        std::vector<TrialRecord> out;
        std::copy_if(trials.begin(), trials.end(), std::back_inserter(out),
                     [&](const TrialRecord& t) { return t.rank < target_rank; });
        return out;
    }
};

/// Draws `trials` Gaussian W_1 (d1 x d0, seed derive_seed(seed, t)) and reports
/// how often sigma(W_1 X) reaches rank n.
template <typename Derived>
MeasureZeroResult measure_zero_experiment(const Eigen::MatrixBase<Derived>& X, Index d1, std::size_t trials,
                                          std::uint64_t seed, double rel_tol = kRankRelTol) {
    using Scalar = typename Derived::Scalar;
    const Index n = X.cols();
    const Index d0 = X.rows();
    if (d1 < n) {
        throw std::invalid_argument("measure_zero_experiment: hidden width d1 must be >= n");
    }
    MeasureZeroResult result;
    result.target_rank = n;
    result.trials.resize(trials);
    const Mat<Scalar> data = X;
    parallel_for(trials, [&](std::size_t t) {
        const std::uint64_t trial_seed = derive_seed(seed, t);
        Rng rng(trial_seed);
        Mat<Scalar> w(d1, d0);
        for (Index r = 0; r < d1; ++r) {
            for (Index c = 0; c < d0; ++c) {
                w(r, c) = static_cast<Scalar>(rng.normal());
            }
        }
        const Mat<Scalar> f = sigmoid(w * data);
        const auto sv = singular_values(f);
        TrialRecord rec{.trial = t, .seed = trial_seed};
        rec.max_singular_value = static_cast<double>(sv(0));
        rec.min_singular_value = static_cast<double>(sv(sv.size() - 1));
        const Scalar cutoff = static_cast<Scalar>(rel_tol) * sv(0);
        rec.rank = sv(0) == Scalar(0) ? 0 : static_cast<Index>((sv.array() > cutoff).count());
        result.trials[t] = rec;
    });
    const auto full = std::count_if(result.trials.begin(), result.trials.end(),
                                    [&](const TrialRecord& t) { return t.rank == n; });
    result.fraction_full_rank = trials == 0 ? 0.0 : static_cast<double>(full) / static_cast<double>(trials);
    return result;
}

/// Same experiment on a freshly generated sphere dataset (labels unused).
inline MeasureZeroResult measure_zero_experiment(Index d0, Index d1, Index n, std::size_t trials,
                                                 std::uint64_t seed) {
    const Dataset data = generate_sphere_dataset(n, d0, 1.0, seed);
    return measure_zero_experiment(data.X(), d1, trials, derive_seed(seed, 0xFEA7));
}

template <typename Scalar>
struct TopLayerFit {
    Mat<Scalar> W2;
    /// ||Y - W2 F||_F
    Scalar residual;
    /// residual / ||Y||_F (0 when Y = 0)
    Scalar relative_residual;
    Index feature_rank;
    bool rank_deficient;
};

/// Minimum-norm least squares min ||Y - W2 F||_F via a complete orthogonal
/// decomposition of F^T, followed by one step of iterative refinement.
template <typename Scalar>
TopLayerFit<Scalar> top_layer_fit(const Mat<Scalar>& F, const Mat<Scalar>& Y) {
    if (F.cols() != Y.cols()) {
        throw std::invalid_argument("top_layer_fit: F and Y must have the same number of columns");
    }
    const Eigen::CompleteOrthogonalDecomposition<Mat<Scalar>> cod(F.transpose());
    Mat<Scalar> w2t = cod.solve(Y.transpose());
    const Mat<Scalar> r = Y.transpose() - F.transpose() * w2t;
    w2t += cod.solve(r);

    TopLayerFit<Scalar> out;
    out.W2 = w2t.transpose();
    out.residual = (Y - out.W2 * F).norm();
    const Scalar ynorm = Y.norm();
    out.relative_residual = ynorm > 0 ? out.residual / ynorm : Scalar(0);
    out.feature_rank = rank_with_tol(F);
    out.rank_deficient = out.feature_rank < F.cols();
    return out;
}

class PerturbationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <typename Scalar>
struct PerturbResult {
    Mat<Scalar> W1;
    Scalar perturbation_norm;
    int tries;
};

/// Random perturbation of Frobenius norm exactly epsilon, redrawn until
/// sigma(W1_hat X) has rank n. An already full-rank W1 is returned unchanged.
template <typename Scalar, typename Derived>
PerturbResult<Scalar> perturb_to_full_rank(const Mat<Scalar>& W1, const Eigen::MatrixBase<Derived>& X,
                                           Scalar epsilon, std::uint64_t seed, int max_tries = 100,
                                           double rel_tol = kRankRelTol) {
    const Index n = X.cols();
    if (W1.rows() < n) {
        throw std::invalid_argument("perturb_to_full_rank: hidden width must be >= n");
    }
    if (W1.cols() != X.rows()) {
        throw std::invalid_argument("perturb_to_full_rank: input dimension mismatch");
    }
    if (epsilon < Scalar(0)) {
        throw std::invalid_argument("perturb_to_full_rank: epsilon must be >= 0");
    }
    if (rank_with_tol(sigmoid(W1 * X), rel_tol) == n) {
        return {W1, Scalar(0), 0};
    }
    if (epsilon == Scalar(0)) {
        throw PerturbationError("perturb_to_full_rank: features are rank deficient and epsilon is 0");
    }
    Rng rng(seed);
    for (int attempt = 1; attempt <= max_tries; ++attempt) {
        Mat<Scalar> dir(W1.rows(), W1.cols());
        for (Index r = 0; r < dir.rows(); ++r) {
            for (Index c = 0; c < dir.cols(); ++c) {
                dir(r, c) = static_cast<Scalar>(rng.normal());
            }
        }
        dir *= epsilon / dir.norm();
        Mat<Scalar> candidate = W1 + dir;
        if (rank_with_tol(sigmoid(candidate * X), rel_tol) == n) {
            const Scalar moved = (candidate - W1).norm();
            return {std::move(candidate), moved, attempt};
        }
    }
    throw PerturbationError("perturb_to_full_rank: no full-rank perturbation found in " +
                            std::to_string(max_tries) + " tries");
}

struct ConditionReport {
    bool distinct_columns = false;
    /// 1-based hidden layer k with d_k >= n (the largest such k).
    std::optional<std::size_t> wide_layer;
    /// (l, rank W_l == d_l) for l in {k+2, ..., H}.
    std::vector<std::pair<std::size_t, bool>> downstream_full_rank;
    /// d_l <= d_{l-1} for every l >= k+2.
    bool width_monotone = false;
    /// Hessian non-degeneracy over the top layers is never evaluated.
    std::optional<bool> hessian_checked;

    bool downstream_ok() const {
        return std::all_of(downstream_full_rank.begin(), downstream_full_rank.end(),
                           [](const auto& e) { return e.second; });
    }
    /// Conditions 1-3 all hold.
    bool evaluated_conditions_hold() const { return distinct_columns && wide_layer && downstream_ok(); }
};

template <typename Scalar, typename Derived>
ConditionReport check_nguyen_conditions(const SigmoidNet<Scalar>& net, const Eigen::MatrixBase<Derived>& X,
                                        double rel_tol = kRankRelTol) {
    ConditionReport report;
    const Index n = X.cols();
    report.distinct_columns = true;
    for (Index i = 0; i < n && report.distinct_columns; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            if (X.col(i) == X.col(j)) {
                report.distinct_columns = false;
                break;
            }
        }
    }
    const auto& dims = net.dims();
    const std::size_t H = net.depth();
    for (std::size_t k = H - 1; k >= 1; --k) {
        if (dims[k] >= n) {
            report.wide_layer = k;
            break;
        }
    }
    if (report.wide_layer) {
        report.width_monotone = true;
        for (std::size_t l = *report.wide_layer + 2; l <= H; ++l) {
            const bool full = rank_with_tol(net.W(l), rel_tol) == dims[l];
            report.downstream_full_rank.emplace_back(l, full);
            report.width_monotone = report.width_monotone && dims[l] <= dims[l - 1];
        }
    }
    return report;
}

} // namespace ovlab
