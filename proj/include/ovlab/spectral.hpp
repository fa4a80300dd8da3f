#pragma once

#include "ovlab/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ovlab {

/// Default relative threshold below which a singular value counts as zero.
inline constexpr double kRankRelTol = 1e-10;

/// Eigenvalues of a symmetric matrix in ascending order.
template <typename Derived>
Vec<typename Derived::Scalar> symmetric_eigenvalues(const Eigen::MatrixBase<Derived>& sym) {
    using Scalar = typename Derived::Scalar;
    if (sym.rows() != sym.cols()) {
        throw std::invalid_argument("symmetric_eigenvalues: matrix is not square");
    }
    if (sym.rows() == 0) {
        return Vec<Scalar>();
    }
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> solver(sym.derived(), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("symmetric eigen-solver failed to converge");
    }
    return solver.eigenvalues();
}

template <typename Derived>
typename Derived::Scalar min_eigenvalue(const Eigen::MatrixBase<Derived>& sym) {
    const auto values = symmetric_eigenvalues(sym);
    if (values.size() == 0) {
        throw std::invalid_argument("min_eigenvalue: empty matrix");
    }
    return values(0);
}

/// Operator 2-norm of a symmetric matrix (largest |eigenvalue|).
template <typename Derived>
typename Derived::Scalar symmetric_spectral_norm(const Eigen::MatrixBase<Derived>& sym) {
    const auto values = symmetric_eigenvalues(sym);
    if (values.size() == 0) {
        return 0;
    }
    return std::max(std::abs(values(0)), std::abs(values(values.size() - 1)));
}

/// Singular values in descending order.
template <typename Derived>
Vec<typename Derived::Scalar> singular_values(const Eigen::MatrixBase<Derived>& a) {
    using Scalar = typename Derived::Scalar;
    if (a.size() == 0) {
        return Vec<Scalar>();
    }
    Eigen::JacobiSVD<Mat<Scalar>> svd(a.derived());
    return svd.singularValues();
}

/// Number of singular values strictly above rel_tol * sigma_max.
template <typename Derived>
Index rank_with_tol(const Eigen::MatrixBase<Derived>& a, double rel_tol = kRankRelTol) {
    if (!(rel_tol > 0.0 && rel_tol < 1.0)) {
        throw std::invalid_argument("rank_with_tol: rel_tol must lie in (0, 1)");
    }
    const auto sv = singular_values(a);
    if (sv.size() == 0 || sv(0) == 0) {
        return 0;
    }
    const auto cutoff = static_cast<typename Derived::Scalar>(rel_tol) * sv(0);
    return static_cast<Index>((sv.array() > cutoff).count());
}

} // namespace ovlab
