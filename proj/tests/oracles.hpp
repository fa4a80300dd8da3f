#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls the closed-form or analytic paths of the library it is checking.

#include "ovlab/relu_dynamics.hpp"
#include "ovlab/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

namespace ovlab::oracle {

/// Central differences of a scalar function of a matrix, entry by entry.
inline Eigen::MatrixXd central_difference(const std::function<double(const Eigen::MatrixXd&)>& f,
                                          const Eigen::MatrixXd& at, double h = 1e-5) {
    Eigen::MatrixXd grad(at.rows(), at.cols());
    Eigen::MatrixXd probe = at;
    for (Eigen::Index r = 0; r < at.rows(); ++r) {
        for (Eigen::Index c = 0; c < at.cols(); ++c) {
            probe(r, c) = at(r, c) + h;
            const double up = f(probe);
            probe(r, c) = at(r, c) - h;
            const double down = f(probe);
            probe(r, c) = at(r, c);
            grad(r, c) = (up - down) / (2 * h);
        }
    }
    return grad;
}

/// Jacobian of the predictions u(W) by central differences, n x (m*d) with
/// column r*d + k for entry W(r, k).
inline Eigen::MatrixXd prediction_jacobian_fd(const ShallowReluNet<double>& net, const Eigen::MatrixXd& X,
                                              double h = 1e-5) {
    const Eigen::Index m = net.width();
    const Eigen::Index d = net.dim();
    Eigen::MatrixXd jac(X.cols(), m * d);
    ShallowReluNet<double> probe = net;
    for (Eigen::Index r = 0; r < m; ++r) {
        for (Eigen::Index k = 0; k < d; ++k) {
            probe.W()(r, k) = net.W()(r, k) + h;
            const Eigen::VectorXd up = predict(probe, X);
            probe.W()(r, k) = net.W()(r, k) - h;
            const Eigen::VectorXd down = predict(probe, X);
            probe.W()(r, k) = net.W()(r, k);
            jac.col(r * d + k) = (up - down) / (2 * h);
        }
    }
    return jac;
}

/// Smallest |w_r^T x_j| over all units and points.
inline double min_abs_preactivation(const ShallowReluNet<double>& net, const Eigen::MatrixXd& X) {
    return (net.W() * X).cwiseAbs().minCoeff();
}

/// Minimum of 1/2 ||Y - s u v^T X||_F^2 / N over unit u, v in the plane and
/// scalar s, by nested zooming grids over the two angles. For fixed angles the
/// best s is the scalar least-squares coefficient.
inline double brute_force_rank1_loss_2x2(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
    const double N = static_cast<double>(X.cols());
    auto loss_at = [&](double theta, double phi) {
        const Eigen::Vector2d u(std::cos(theta), std::sin(theta));
        const Eigen::Vector2d v(std::cos(phi), std::sin(phi));
        const Eigen::MatrixXd basis = u * (v.transpose() * X);
        const double denom = basis.squaredNorm();
        const double s = denom > 0 ? (basis.array() * Y.array()).sum() / denom : 0.0;
        return 0.5 * (Y - s * basis).squaredNorm() / N;
    };
    const double pi = std::numbers::pi;
    double best = std::numeric_limits<double>::infinity();
    double best_theta = 0;
    double best_phi = 0;
    constexpr int kGrid = 600;
    for (int i = 0; i < kGrid; ++i) {
        for (int j = 0; j < kGrid; ++j) {
            const double t = pi * i / kGrid;
            const double p = pi * j / kGrid;
            const double l = loss_at(t, p);
            if (l < best) {
                best = l;
                best_theta = t;
                best_phi = p;
            }
        }
    }
    double span = pi / kGrid;
    for (int round = 0; round < 8; ++round) {
        const double ct = best_theta;
        const double cp = best_phi;
        constexpr int kLocal = 40;
        for (int i = -kLocal; i <= kLocal; ++i) {
            for (int j = -kLocal; j <= kLocal; ++j) {
                const double t = ct + span * i / kLocal;
                const double p = cp + span * j / kLocal;
                const double l = loss_at(t, p);
                if (l < best) {
                    best = l;
                    best_theta = t;
                    best_phi = p;
                }
            }
        }
        span /= 10;
    }
    return best;
}

inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            out(r, c) = rng.normal();
        }
    }
    return out;
}

inline Eigen::MatrixXd unit_columns(Eigen::MatrixXd m) {
    m.colwise().normalize();
    return m;
}

} // namespace ovlab::oracle
