#pragma once

// Two-layer ReLU network f(W, a, x) = (1/sqrt(m)) sum_r a_r max(0, w_r^T x),
// trained on W only, with the Gram-matrix diagnostics that govern its
// prediction dynamics du/dt = H(t)(y - u).

#include "ovlab/data.hpp"
#include "ovlab/rng.hpp"
#include "ovlab/spectral.hpp"
#include "ovlab/types.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ovlab {

template <typename Scalar>
class ShallowReluNet {
public:
    /// weights: m x d, row r is w_r^T. signs: length m, entries in {-1, +1}.
    ShallowReluNet(Mat<Scalar> weights, Vec<Scalar> signs) : w_(std::move(weights)), a_(std::move(signs)) {
        if (w_.rows() < 1 || w_.cols() < 1) {
            throw std::invalid_argument("ShallowReluNet: width and dimension must be >= 1");
        }
        if (a_.size() != w_.rows()) {
            throw std::invalid_argument("ShallowReluNet: sign vector length must equal width");
        }
        for (Index r = 0; r < a_.size(); ++r) {
            if (a_(r) != Scalar(1) && a_(r) != Scalar(-1)) {
                throw std::invalid_argument("ShallowReluNet: output signs must be +1 or -1");
            }
        }
    }

    const Mat<Scalar>& W() const noexcept { return w_; }
    /// Only the hidden layer is trainable; the shape is fixed.
    Mat<Scalar>& W() noexcept { return w_; }
    const Vec<Scalar>& a() const noexcept { return a_; }
    Index width() const noexcept { return w_.rows(); }
    Index dim() const noexcept { return w_.cols(); }
    Scalar scale() const { return Scalar(1) / std::sqrt(static_cast<Scalar>(width())); }

    std::optional<std::uint64_t> seed;

    bool operator==(const ShallowReluNet& other) const {
        return w_ == other.w_ && a_ == other.a_;
    }

private:
    Mat<Scalar> w_;
    Vec<Scalar> a_;
};

/// Rows of W i.i.d. N(0, I_d) drawn row by row, then m uniform signs.
template <typename Scalar = double>
ShallowReluNet<Scalar> init_net(Index d, Index m, std::uint64_t seed) {
    if (d < 1 || m < 1) {
        throw std::invalid_argument("init_net: d and m must be >= 1");
    }
    Rng rng(seed);
    Mat<Scalar> W(m, d);
    for (Index r = 0; r < m; ++r) {
        for (Index k = 0; k < d; ++k) {
            W(r, k) = static_cast<Scalar>(rng.normal());
        }
    }
    Vec<Scalar> a(m);
    for (Index r = 0; r < m; ++r) {
        a(r) = static_cast<Scalar>(rng.sign());
    }
    ShallowReluNet<Scalar> net(std::move(W), std::move(a));
    net.seed = seed;
    return net;
}

namespace detail {

template <typename Scalar, typename Derived>
void check_input_dim(const ShallowReluNet<Scalar>& net, const Eigen::MatrixBase<Derived>& X) {
    if (X.rows() != net.dim()) {
        throw std::invalid_argument("input dimension " + std::to_string(X.rows()) +
                                    " does not match network dimension " + std::to_string(net.dim()));
    }
}

template <typename Scalar, typename Derived>
void check_labels(const Eigen::MatrixBase<Derived>& X, const Vec<Scalar>& y) {
    if (y.size() != X.cols()) {
        throw std::invalid_argument("label count does not match number of data points");
    }
}

/// Activation indicator [w_r^T x_j >= 0]; ties count as active.
template <typename Scalar>
Mat<Scalar> active_mask(const Mat<Scalar>& preact) {
    return (preact.array() >= Scalar(0)).template cast<Scalar>();
}

template <typename Scalar>
Vec<Scalar> predict_from_preact(const ShallowReluNet<Scalar>& net, const Mat<Scalar>& preact) {
    return (net.a().transpose() * preact.cwiseMax(Scalar(0))).transpose() * net.scale();
}

template <typename Scalar, typename Derived>
Mat<Scalar> grad_from_preact(const ShallowReluNet<Scalar>& net, const Eigen::MatrixBase<Derived>& X,
                             const Mat<Scalar>& preact, const Vec<Scalar>& residual) {
    Mat<Scalar> weighted = (active_mask(preact).array().rowwise() * residual.transpose().array()).matrix();
    Mat<Scalar> grad = weighted * X.transpose();
    return (net.a() * net.scale()).asDiagonal() * grad;
}

} // namespace detail

/// u_i = (1/sqrt(m)) sum_r a_r max(0, w_r^T x_i) for every column x_i of X.
template <typename Scalar, typename Derived>
Vec<Scalar> predict(const ShallowReluNet<Scalar>& net, const Eigen::MatrixBase<Derived>& X) {
    detail::check_input_dim(net, X);
    const Mat<Scalar> preact = net.W() * X;
    return detail::predict_from_preact(net, preact);
}

/// L(W) = 1/2 ||u - y||^2
template <typename Scalar, typename Derived>
Scalar loss(const ShallowReluNet<Scalar>& net, const Eigen::MatrixBase<Derived>& X, const Vec<Scalar>& y) {
    detail::check_labels(X, y);
    return Scalar(0.5) * (predict(net, X) - y).squaredNorm();
}

inline double loss(const ShallowReluNet<double>& net, const Dataset& data) {
    return loss(net, data.X(), data.y());
}

/// dL/dW; row r is (1/sqrt(m)) sum_j (u_j - y_j) a_r x_j [w_r^T x_j >= 0].
template <typename Scalar, typename Derived>
Mat<Scalar> grad_w(const ShallowReluNet<Scalar>& net, const Eigen::MatrixBase<Derived>& X, const Vec<Scalar>& y) {
    detail::check_input_dim(net, X);
    detail::check_labels(X, y);
    const Mat<Scalar> preact = net.W() * X;
    const Vec<Scalar> residual = detail::predict_from_preact(net, preact) - y;
    return detail::grad_from_preact(net, X, preact, residual);
}

inline Eigen::MatrixXd grad_w(const ShallowReluNet<double>& net, const Dataset& data) {
    return grad_w(net, data.X(), data.y());
}

enum class GramKind { empirical, infinite };

template <typename Scalar>
struct GramMatrix {
    Mat<Scalar> H;
    GramKind kind;
    Scalar lambda_min;

    GramMatrix(Mat<Scalar> h, GramKind k) : H(std::move(h)), kind(k), lambda_min(min_eigenvalue(H)) {}
};

/// H_ij = (1/m) x_i^T x_j sum_r [w_r^T x_i >= 0, w_r^T x_j >= 0]
template <typename Scalar, typename Derived>
GramMatrix<Scalar> gram(const ShallowReluNet<Scalar>& net, const Eigen::MatrixBase<Derived>& X) {
    detail::check_input_dim(net, X);
    const Mat<Scalar> mask = detail::active_mask<Scalar>(net.W() * X);
    Mat<Scalar> co_active = mask.transpose() * mask / static_cast<Scalar>(net.width());
    Mat<Scalar> H = (co_active.array() * (X.transpose() * X).array()).matrix();
    return GramMatrix<Scalar>(std::move(H), GramKind::empirical);
}

struct ClosedForm {};

struct MonteCarlo {
    long samples = 1'000'000;
    std::uint64_t seed = 0;
};

using GramInfinityMethod = std::variant<ClosedForm, MonteCarlo>;

namespace detail {

template <typename Derived>
void check_unit_columns(const Eigen::MatrixBase<Derived>& X) {
    for (Index i = 0; i < X.cols(); ++i) {
        if (std::abs(static_cast<double>(X.col(i).norm()) - 1.0) > 1e-10) {
            throw std::invalid_argument("gram_infinity: column " + std::to_string(i + 1) +
                                        " is not unit norm");
        }
    }
}

} // namespace detail

/// Expected Gram matrix at initialization, E_{w ~ N(0, I)} x_i^T x_j [w^T x_i >= 0, w^T x_j >= 0].
///
/// ClosedForm uses the arc-cosine kernel of degree zero: for unit vectors the
/// two half-spaces intersect with probability (pi - arccos(x_i^T x_j)) / (2 pi).
/// MonteCarlo averages the indicator product over Gaussian directions.
template <typename Derived>
GramMatrix<typename Derived::Scalar> gram_infinity(const Eigen::MatrixBase<Derived>& X,
                                                   const GramInfinityMethod& method = ClosedForm{}) {
    using Scalar = typename Derived::Scalar;
    detail::check_unit_columns(X);
    const Index n = X.cols();
    const Index d = X.rows();
    const Mat<Scalar> inner = X.transpose() * X;

    if (std::holds_alternative<ClosedForm>(method)) {
        Mat<Scalar> H(n, n);
        const Scalar pi = std::numbers::pi_v<Scalar>;
        for (Index j = 0; j < n; ++j) {
            for (Index i = 0; i < n; ++i) {
                const Scalar c = std::clamp(inner(i, j), Scalar(-1), Scalar(1));
                H(i, j) = inner(i, j) * (pi - std::acos(c)) / (2 * pi);
            }
        }
        return GramMatrix<Scalar>(std::move(H), GramKind::infinite);
    }

    const auto& mc = std::get<MonteCarlo>(method);
    if (mc.samples < 1) {
        throw std::invalid_argument("gram_infinity: Monte Carlo needs at least one sample");
    }
    constexpr long kBatch = 4096;
    Rng rng(mc.seed);
    Mat<Scalar> counts = Mat<Scalar>::Zero(n, n);
    Mat<Scalar> directions(kBatch, d);
    for (long done = 0; done < mc.samples; done += kBatch) {
        const long batch = std::min(kBatch, mc.samples - done);
        for (long s = 0; s < batch; ++s) {
            for (Index k = 0; k < d; ++k) {
                directions(s, k) = static_cast<Scalar>(rng.normal());
            }
        }
        const Mat<Scalar> mask = detail::active_mask<Scalar>(directions.topRows(batch) * X);
        counts.noalias() += mask.transpose() * mask;
    }
    Mat<Scalar> H = (counts.array() / static_cast<Scalar>(mc.samples) * inner.array()).matrix();
    return GramMatrix<Scalar>(std::move(H), GramKind::infinite);
}

/// Smallest eigenvalue of the infinite-width Gram matrix.
template <typename Scalar>
Scalar lambda0(const GramMatrix<Scalar>& hinf) {
    if (hinf.kind != GramKind::infinite) {
        throw std::invalid_argument("lambda0 requires the infinite-width Gram matrix");
    }
    return hinf.lambda_min;
}

struct TrajectoryMeta {
    Index n = 0;
    Index m = 0;
    Index d = 0;
    /// NaN when not supplied.
    double lambda0 = std::numeric_limits<double>::quiet_NaN();
    std::optional<std::uint64_t> seed;
    std::string integrator;
    /// eta for gradient descent, h for RK4.
    double step_size = 0.0;
    long steps_run = 0;
};

struct Milestone {
    double threshold;
    /// First step at which loss <= threshold.
    std::optional<long> step;
};

/// Diagnostics recorded along a training run.
struct Trajectory {
    std::vector<long> step;
    std::vector<double> times;
    std::vector<double> loss;
    std::vector<double> residual_sq;
    std::vector<double> lambda_min_H;
    std::vector<double> max_weight_drift;
    std::vector<double> max_grad_norm;
    std::vector<Milestone> milestones;
    TrajectoryMeta meta;

    std::size_t size() const noexcept { return times.size(); }
};

namespace detail {

template <typename Scalar, typename Derived>
void record_state(Trajectory& traj, long step, double time, const ShallowReluNet<Scalar>& net,
                  const Eigen::MatrixBase<Derived>& X, const Vec<Scalar>& y, const Mat<Scalar>& w_init) {
    const Mat<Scalar> preact = net.W() * X;
    const Vec<Scalar> residual = predict_from_preact(net, preact) - y;
    const Mat<Scalar> grad = grad_from_preact(net, X, preact, residual);
    const Scalar rsq = residual.squaredNorm();
    traj.step.push_back(step);
    traj.times.push_back(time);
    traj.residual_sq.push_back(static_cast<double>(rsq));
    traj.loss.push_back(static_cast<double>(Scalar(0.5) * rsq));
    traj.lambda_min_H.push_back(static_cast<double>(gram(net, X).lambda_min));
    traj.max_weight_drift.push_back(static_cast<double>((net.W() - w_init).rowwise().norm().maxCoeff()));
    traj.max_grad_norm.push_back(static_cast<double>(grad.rowwise().norm().maxCoeff()));
}

template <typename Scalar, typename Derived>
Trajectory start_trajectory(const ShallowReluNet<Scalar>& net, const Eigen::MatrixBase<Derived>& X,
                            const Vec<Scalar>& y, std::optional<double> lambda0_value) {
    check_input_dim(net, X);
    check_labels(X, y);
    Trajectory traj;
    traj.meta.n = X.cols();
    traj.meta.m = net.width();
    traj.meta.d = net.dim();
    traj.meta.seed = net.seed;
    if (lambda0_value) {
        traj.meta.lambda0 = *lambda0_value;
    }
    return traj;
}

} // namespace detail

struct DiscreteOptions {
    double eta = 0.0;
    long steps = 1000;
    long record_every = 10;
    /// Stop as soon as the loss falls to this value (the step is recorded).
    std::optional<double> stop_below;
    /// Loss thresholds whose first crossing step is reported.
    std::vector<double> milestones;
    std::optional<double> lambda0;
};

/// Default discrete step size lambda0 / n^2.
inline double default_eta(double lambda0_value, Index n) {
    return lambda0_value / static_cast<double>(n * n);
}

/// Full-batch gradient descent on W; the output signs stay fixed.
/// Records step 0, every record_every steps and the last step.
template <typename Scalar, typename Derived>
Trajectory train_discrete(ShallowReluNet<Scalar>& net, const Eigen::MatrixBase<Derived>& X, const Vec<Scalar>& y,
                          const DiscreteOptions& opts) {
    if (!(opts.eta > 0.0)) {
        throw std::invalid_argument("train_discrete: eta must be positive");
    }
    if (opts.steps < 0 || opts.record_every < 1) {
        throw std::invalid_argument("train_discrete: steps must be >= 0 and record_every >= 1");
    }
    Trajectory traj = detail::start_trajectory(net, X, y, opts.lambda0);
    traj.meta.integrator = "gd";
    traj.meta.step_size = opts.eta;
    for (double t : opts.milestones) {
        traj.milestones.push_back({t, std::nullopt});
    }
    const Mat<Scalar> w_init = net.W();
    const auto eta = static_cast<Scalar>(opts.eta);

    long step = 0;
    for (;; ++step) {
        const Mat<Scalar> preact = net.W() * X;
        const Vec<Scalar> residual = detail::predict_from_preact(net, preact) - y;
        const double current = static_cast<double>(Scalar(0.5) * residual.squaredNorm());
        if (!std::isfinite(current)) {
            throw DivergenceError("train_discrete: non-finite loss", step);
        }
        for (auto& ms : traj.milestones) {
            if (!ms.step && current <= ms.threshold) {
                ms.step = step;
            }
        }
        const bool stop = step == opts.steps || (opts.stop_below && current <= *opts.stop_below);
        if (step % opts.record_every == 0 || stop) {
            detail::record_state(traj, step, static_cast<double>(step) * opts.eta, net, X, y, w_init);
        }
        if (stop) {
            break;
        }
        net.W() -= eta * detail::grad_from_preact(net, X, preact, residual);
    }
    traj.meta.steps_run = step;
    return traj;
}

inline Trajectory train_discrete(ShallowReluNet<double>& net, const Dataset& data, const DiscreteOptions& opts) {
    return train_discrete(net, data.X(), data.y(), opts);
}

struct OdeOptions {
    double horizon = 1.0;
    double h = 1e-2;
    long record_every = 10;
    std::optional<double> lambda0;
};

/// Default RK4 step: 0.05 / lambda0 when lambda0 is known, else 1e-2.
inline double default_ode_step(std::optional<double> lambda0_value) {
    return lambda0_value && *lambda0_value > 0 ? 0.05 / *lambda0_value : 1e-2;
}

/// Gradient flow dW/dt = -dL/dW integrated by classical fixed-step RK4.
/// The step is shrunk to horizon / ceil(horizon / h) so the run ends at the horizon.
template <typename Scalar, typename Derived>
Trajectory train_ode(ShallowReluNet<Scalar>& net, const Eigen::MatrixBase<Derived>& X, const Vec<Scalar>& y,
                     const OdeOptions& opts) {
    if (!(opts.horizon > 0.0) || !(opts.h > 0.0)) {
        throw std::invalid_argument("train_ode: horizon and h must be positive");
    }
    if (opts.record_every < 1) {
        throw std::invalid_argument("train_ode: record_every must be >= 1");
    }
    Trajectory traj = detail::start_trajectory(net, X, y, opts.lambda0);
    const long steps = std::max(1L, static_cast<long>(std::ceil(opts.horizon / opts.h - 1e-9)));
    const double h = opts.horizon / static_cast<double>(steps);
    traj.meta.integrator = "rk4";
    traj.meta.step_size = h;

    const Mat<Scalar> w_init = net.W();
    const auto hs = static_cast<Scalar>(h);
    ShallowReluNet<Scalar> probe = net;
    auto velocity = [&](const Mat<Scalar>& w) -> Mat<Scalar> {
        probe.W() = w;
        return -grad_w(probe, X, y);
    };

    detail::record_state(traj, 0, 0.0, net, X, y, w_init);
    for (long step = 1; step <= steps; ++step) {
        const Mat<Scalar> w0 = net.W();
        const Mat<Scalar> k1 = velocity(w0);
        const Mat<Scalar> k2 = velocity(w0 + (hs / 2) * k1);
        const Mat<Scalar> k3 = velocity(w0 + (hs / 2) * k2);
        const Mat<Scalar> k4 = velocity(w0 + hs * k3);
        net.W() = w0 + (hs / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
        if (!net.W().allFinite()) {
            throw DivergenceError("train_ode: non-finite weights, integrator step too large", step);
        }
        if (step % opts.record_every == 0 || step == steps) {
            detail::record_state(traj, step, static_cast<double>(step) * h, net, X, y, w_init);
            if (!std::isfinite(traj.loss.back())) {
                throw DivergenceError("train_ode: non-finite loss", step);
            }
        }
    }
    traj.meta.steps_run = steps;
    return traj;
}

inline Trajectory train_ode(ShallowReluNet<double>& net, const Dataset& data, const OdeOptions& opts) {
    return train_ode(net, data.X(), data.y(), opts);
}

/// Per-record outcome of checking an inequality along a trajectory.
struct BoundReport {
    std::string name;
    std::vector<double> times;
    std::vector<bool> holds;
    /// bound / observed; >= 1 where the inequality holds.
    std::vector<double> margin;
    std::size_t violations = 0;
    std::optional<double> first_violation_time;
    double tightest_margin = std::numeric_limits<double>::infinity();
    std::size_t tightest_index = 0;
    /// Smallest observed value of the checked quantity (lambda floor only).
    std::optional<double> min_observed;
    /// max_r ||w_r(t) - w_r(0)|| at the tightest record (lambda floor only).
    std::optional<double> drift_at_worst;

    bool passed() const noexcept { return violations == 0; }
};

namespace detail {

inline void add_entry(BoundReport& report, double t, double margin, bool holds) {
    report.times.push_back(t);
    report.margin.push_back(margin);
    report.holds.push_back(holds);
    if (!holds) {
        if (report.violations == 0) {
            report.first_violation_time = t;
        }
        ++report.violations;
    }
    if (margin < report.tightest_margin || report.times.size() == 1) {
        report.tightest_margin = margin;
        report.tightest_index = report.times.size() - 1;
    }
}

inline double ratio(double bound, double observed) {
    if (observed <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return bound / observed;
}

} // namespace detail

/// residual_sq(t) <= slack * exp(-lambda0 t) * residual_sq(0) at every record.
inline BoundReport check_convergence_bound(const Trajectory& traj, double lambda0_value, double slack = 1.0) {
    BoundReport report;
    report.name = "convergence_envelope";
    if (traj.size() == 0) {
        return report;
    }
    const double r0 = traj.residual_sq.front();
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double bound = slack * std::exp(-lambda0_value * traj.times[k]) * r0;
        const double observed = traj.residual_sq[k];
        detail::add_entry(report, traj.times[k], detail::ratio(bound, observed), observed <= bound);
    }
    return report;
}

/// lambda_min(H(t)) >= lambda0 / 2 at every record.
inline BoundReport check_lambda_floor(const Trajectory& traj, double lambda0_value) {
    BoundReport report;
    report.name = "lambda_floor";
    const double floor = lambda0_value / 2;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double observed = traj.lambda_min_H[k];
        const double margin = floor > 0 ? observed / floor : std::numeric_limits<double>::infinity();
        detail::add_entry(report, traj.times[k], margin, observed >= floor);
        if (!report.min_observed || observed < *report.min_observed) {
            report.min_observed = observed;
        }
    }
    if (traj.size() > 0) {
        report.drift_at_worst = traj.max_weight_drift[report.tightest_index];
    }
    return report;
}

/// max_r ||dL/dw_r|| <= factor * sqrt(n/m) * ||u - y|| at every record, to 1e-12 relative.
inline BoundReport check_gradient_decay(const Trajectory& traj, double factor = 1.0) {
    BoundReport report;
    report.name = "gradient_decay";
    const double coeff = factor * std::sqrt(static_cast<double>(traj.meta.n) / static_cast<double>(traj.meta.m));
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double bound = coeff * std::sqrt(traj.residual_sq[k]);
        const double observed = traj.max_grad_norm[k];
        detail::add_entry(report, traj.times[k], detail::ratio(bound, observed),
                          observed <= bound * (1.0 + 1e-12));
    }
    return report;
}

inline constexpr Index kHessianMaxParams = 4096;

template <typename Scalar>
struct HessianResult {
    Mat<Scalar> matrix;
    Scalar lambda_min;
};

/// Gauss-Newton Hessian of the loss in W, with rows/cols ordered (r, k) -> r * d + k.
/// Block (r, s) is (1/m) sum_j <a_r [w_r^T x_j >= 0] x_j, a_s [w_s^T x_j >= 0] x_j>,
/// i.e. a sum over data points of rank-one Gram terms; the ReLU second-derivative
/// terms (zero away from kinks) are not included.
template <typename Scalar, typename Derived>
HessianResult<Scalar> hessian(const ShallowReluNet<Scalar>& net, const Eigen::MatrixBase<Derived>& X) {
    detail::check_input_dim(net, X);
    const Index m = net.width();
    const Index d = net.dim();
    const Index p = m * d;
    if (p > kHessianMaxParams) {
        throw std::invalid_argument("hessian: m*d = " + std::to_string(p) + " exceeds the dense limit " +
                                    std::to_string(kHessianMaxParams));
    }
    const Mat<Scalar> mask = detail::active_mask<Scalar>(net.W() * X);
    Mat<Scalar> H = Mat<Scalar>::Zero(p, p);
    Vec<Scalar> stacked(p);
    for (Index j = 0; j < X.cols(); ++j) {
        for (Index r = 0; r < m; ++r) {
            stacked.segment(r * d, d) = (net.a()(r) * mask(r, j)) * X.col(j);
        }
        H.template selfadjointView<Eigen::Lower>().rankUpdate(stacked, Scalar(1) / static_cast<Scalar>(m));
    }
    H.template triangularView<Eigen::StrictlyUpper>() = H.transpose();
    const Scalar lmin = min_eigenvalue(H);
    return {std::move(H), lmin};
}

} // namespace ovlab
