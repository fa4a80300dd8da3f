#pragma once

#include "ovlab/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ovlab {

inline constexpr double kDefaultParallelTol = 1e-6;
inline constexpr double kUnitNormTol = 1e-12;

/// Design matrix with one unit-norm column per data point, plus labels
/// bounded by C in absolute value. Immutable once built.
class Dataset {
public:
    /// Checks shapes only; use validate() for the data assumptions.
    Dataset(Eigen::MatrixXd x, Eigen::VectorXd y, double label_bound);

    const Eigen::MatrixXd& X() const noexcept { return x_; }
    const Eigen::VectorXd& y() const noexcept { return y_; }
    double C() const noexcept { return c_; }
    Index d() const noexcept { return x_.rows(); }
    Index n() const noexcept { return x_.cols(); }

    bool operator==(const Dataset&) const = default;

private:
    Eigen::MatrixXd x_;
    Eigen::VectorXd y_;
    double c_;
};

struct ValidationCheck {
    std::string name;
    bool passed = true;
    /// Worst observed value for the check (norm error, |y|, |cos|, distance).
    double worst_value = 0.0;
    /// Offending (or worst) index, 0-based; second is set for pair checks.
    std::optional<Index> first;
    std::optional<Index> second;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;

    bool ok() const;
    const ValidationCheck& check(const std::string& name) const;
    std::string describe() const;
};

ValidationReport validate(const Dataset& data, double parallel_tol = kDefaultParallelTol);

/// Gaussian directions normalized onto the unit sphere, labels uniform on
/// (-C, C). Directions too close to parallel with an earlier column are
/// redrawn, at most max_retries times per column.
Dataset generate_sphere_dataset(Index n, Index d, double label_bound, std::uint64_t seed,
                                double parallel_tol = kDefaultParallelTol,
                                int max_retries = 1000);

/// CSV: header line "d,n,C", then d rows of X, then one row of y.
/// Values are printed with 17 significant digits.
std::string format_dataset(const Dataset& data);
Dataset parse_dataset(const std::string& text, double parallel_tol = kDefaultParallelTol);

void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path, double parallel_tol = kDefaultParallelTol);

} // namespace ovlab
