#include "ovlab/relu_dynamics.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace ovlab;

namespace {

ShallowReluNet<double> single_unit(const Eigen::VectorXd& w, double a) {
    return ShallowReluNet<double>(w.transpose(), Eigen::VectorXd::Constant(1, a));
}

/// Random net and data whose preactivations all stay away from zero.
struct Instance {
    ShallowReluNet<double> net;
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
};

Instance kink_free_instance(Index n, Index m, Index d, std::uint64_t seed, double margin = 1e-3) {
    for (std::uint64_t attempt = 0;; ++attempt) {
        const std::uint64_t s = derive_seed(seed, attempt);
        auto net = init_net(d, m, s);
        Eigen::MatrixXd X = oracle::unit_columns(oracle::gaussian_matrix(d, n, derive_seed(s, 1)));
        if (oracle::min_abs_preactivation(net, X) > margin) {
            Eigen::VectorXd y = oracle::gaussian_matrix(n, 1, derive_seed(s, 2)).col(0);
            return {std::move(net), std::move(X), std::move(y)};
        }
    }
}

double max_row_norm(const Eigen::MatrixXd& g) {
    return g.rowwise().norm().maxCoeff();
}

} // namespace

TEST(Net, RejectsNonSignOutputWeights) {
    EXPECT_THROW(ShallowReluNet<double>(Eigen::MatrixXd::Ones(2, 3), Eigen::Vector2d(1, 0.5)), std::invalid_argument);
    EXPECT_THROW(ShallowReluNet<double>(Eigen::MatrixXd::Ones(2, 3), Eigen::Vector3d(1, 1, 1)), std::invalid_argument);
}

TEST(Init, WeightMeanNearZero) {
    const auto net = init_net(5, 1000, 0);
    EXPECT_LT(std::abs(net.W().mean()), 4.0 / std::sqrt(5000.0));
    const double var = (net.W().array() - net.W().mean()).square().mean();
    EXPECT_NEAR(var, 1.0, 0.1);
}

TEST(Init, SignsBalanced) {
    const auto net = init_net(5, 1000, 0);
    const auto plus = (net.a().array() > 0).count();
    EXPECT_LE(std::abs(static_cast<double>(plus) - 500.0), 4.0 * std::sqrt(1000.0) / 2);
    EXPECT_TRUE((net.a().array().abs() == 1.0).all());
}

TEST(Init, Deterministic) {
    EXPECT_TRUE(init_net(4, 30, 8) == init_net(4, 30, 8));
    EXPECT_FALSE(init_net(4, 30, 8) == init_net(4, 30, 9));
    EXPECT_THROW(init_net(0, 3, 0), std::invalid_argument);
    EXPECT_THROW(init_net(3, 0, 0), std::invalid_argument);
}

TEST(Predict, HandCases) {
    const Eigen::Vector3d e1(1, 0, 0);
    EXPECT_DOUBLE_EQ(predict(single_unit(e1, 1), Eigen::MatrixXd(e1))(0), 1.0);
    EXPECT_DOUBLE_EQ(predict(single_unit(e1, 1), Eigen::MatrixXd(-e1))(0), 0.0);
    const ShallowReluNet<double> four(e1.transpose().replicate(4, 1), Eigen::VectorXd::Ones(4));
    EXPECT_DOUBLE_EQ(predict(four, Eigen::MatrixXd(e1))(0), 2.0);
}

TEST(Predict, DimensionMismatch) {
    const auto net = init_net(3, 5, 0);
    EXPECT_THROW(predict(net, Eigen::MatrixXd::Ones(4, 2)), std::invalid_argument);
    const Eigen::VectorXd three = Eigen::VectorXd::Ones(3);
    EXPECT_THROW(loss(net, Eigen::MatrixXd::Ones(3, 2), three), std::invalid_argument);
    EXPECT_THROW(grad_w(net, Eigen::MatrixXd::Ones(3, 2), three), std::invalid_argument);
}

TEST(Predict, MatchesSumOverUnits) {
    const auto net = init_net(4, 7, 3);
    const Eigen::MatrixXd X = oracle::unit_columns(oracle::gaussian_matrix(4, 5, 1));
    const Eigen::VectorXd u = predict(net, X);
    for (Index i = 0; i < X.cols(); ++i) {
        double sum = 0;
        for (Index r = 0; r < net.width(); ++r) {
            sum += net.a()(r) * std::max(0.0, net.W().row(r).dot(X.col(i)));
        }
        EXPECT_NEAR(u(i), sum / std::sqrt(7.0), 1e-14);
    }
}

TEST(Predict, PositiveHomogeneity) {
    const auto net = init_net(4, 50, 3);
    const Eigen::MatrixXd X = oracle::unit_columns(oracle::gaussian_matrix(4, 6, 1));
    const Eigen::VectorXd u = predict(net, X);
    for (double c : {0.5, 2.0, 4.0, 1024.0}) {
        // Powers of two scale exactly in floating point.
        ShallowReluNet<double> scaled(net.W() * c, net.a());
        EXPECT_TRUE(predict(scaled, X) == (u * c).eval()) << c;
    }
    for (double c : {0.3, 1.7, 9.1}) {
        ShallowReluNet<double> scaled(net.W() * c, net.a());
        EXPECT_LE((predict(scaled, X) - c * u).norm(), 1e-14 * c * u.norm()) << c;
    }
}

TEST(Predict, SignFlipNegatesOneUnit) {
    const auto net = init_net(3, 9, 5);
    const Eigen::MatrixXd X = oracle::unit_columns(oracle::gaussian_matrix(3, 4, 2));
    const Eigen::VectorXd u = predict(net, X);
    for (Index r = 0; r < net.width(); ++r) {
        Eigen::VectorXd a = net.a();
        a(r) = -a(r);
        const ShallowReluNet<double> flipped(net.W(), a);
        const Eigen::VectorXd contrib =
            (net.W().row(r) * X).cwiseMax(0.0).transpose() * (net.a()(r) / std::sqrt(9.0));
        EXPECT_LE((predict(flipped, X) - (u - 2 * contrib)).cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(Loss, HandCases) {
    const Eigen::Vector2d e1(1, 0);
    // u = 2 with m = 4 identical units.
    const ShallowReluNet<double> four(e1.transpose().replicate(4, 1), Eigen::VectorXd::Ones(4));
    EXPECT_DOUBLE_EQ(loss(four, Eigen::MatrixXd(e1), Eigen::VectorXd(Eigen::VectorXd::Zero(1))), 2.0);
    EXPECT_DOUBLE_EQ(loss(four, Eigen::MatrixXd(e1), Eigen::VectorXd(Eigen::VectorXd::Constant(1, 2.0))), 0.0);
}

TEST(Loss, HalfResidualSquared) {
    const auto data = generate_sphere_dataset(8, 4, 1.0, 2);
    const auto net = init_net(4, 20, 6);
    double rsq = 0;
    for (Index i = 0; i < data.n(); ++i) {
        double u = 0;
        for (Index r = 0; r < net.width(); ++r) {
            u += net.a()(r) * std::max(0.0, net.W().row(r).dot(data.X().col(i)));
        }
        u /= std::sqrt(20.0);
        rsq += (u - data.y()(i)) * (u - data.y()(i));
    }
    EXPECT_NEAR(loss(net, data), 0.5 * rsq, 1e-14);
}

TEST(Gradient, ZeroAtInterpolation) {
    const auto net = init_net(3, 10, 1);
    const Eigen::MatrixXd X = oracle::unit_columns(oracle::gaussian_matrix(3, 4, 1));
    const Eigen::VectorXd y = predict(net, X);
    EXPECT_TRUE(grad_w(net, X, y).isZero(0.0));
}

TEST(Gradient, MatchesFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto inst = kink_free_instance(4, 8, 3, seed);
        const Eigen::MatrixXd g = grad_w(inst.net, inst.X, inst.y);
        auto f = [&](const Eigen::MatrixXd& w) {
            return loss(ShallowReluNet<double>(w, inst.net.a()), inst.X, inst.y);
        };
        const Eigen::MatrixXd fd = oracle::central_difference(f, inst.net.W(), 1e-5);
        EXPECT_LT((g - fd).norm() / g.norm(), 1e-5) << "seed " << seed;
    }
}

TEST(Gradient, TieCountsAsActive) {
    // w is orthogonal to x, so w^T x = 0 exactly and the unit counts as active.
    const ShallowReluNet<double> net(Eigen::RowVector2d(0, 1), Eigen::VectorXd::Ones(1));
    const Eigen::MatrixXd X = Eigen::Vector2d(1, 0);
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 1.0);
    const Eigen::MatrixXd g = grad_w(net, X, y);
    // residual -1, so the row is -x.
    EXPECT_DOUBLE_EQ(g(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(g(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(gram(net, X).H(0, 0), 1.0);
}

TEST(Gradient, RowNormBound) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Index n = 1 + static_cast<Index>(seed % 12);
        const Index m = 1 + static_cast<Index>((seed * 7) % 60);
        const Index d = 2 + static_cast<Index>(seed % 5);
        const auto net = init_net(d, m, seed);
        const Eigen::MatrixXd X = oracle::unit_columns(oracle::gaussian_matrix(d, n, seed + 1000));
        const Eigen::VectorXd y = 2 * oracle::gaussian_matrix(n, 1, seed + 2000).col(0);
        const double bound = std::sqrt(static_cast<double>(n) / m) * (predict(net, X) - y).norm();
        EXPECT_LE(max_row_norm(grad_w(net, X, y)), bound * (1 + 1e-12)) << "seed " << seed;
    }
}

TEST(Gram, SinglePointIsActiveFraction) {
    const auto net = init_net(3, 200, 4);
    const Eigen::MatrixXd X = oracle::unit_columns(oracle::gaussian_matrix(3, 1, 4));
    const double active = static_cast<double>(((net.W() * X).array() >= 0).count()) / 200.0;
    const auto g = gram(net, X);
    EXPECT_NEAR(g.H(0, 0), active, 1e-15);
    EXPECT_EQ(g.kind, GramKind::empirical);
}

TEST(Gram, OrthogonalPairIsZero) {
    Eigen::MatrixXd X(3, 2);
    X << 1, 0,
         0, 1,
         0, 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        EXPECT_EQ(gram(init_net(3, 40, seed), X).H(0, 1), 0.0);
    }
}

TEST(Gram, SymmetricPsdBoundedDiagonal) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto data = generate_sphere_dataset(10, 4, 1.0, seed);
        const auto g = gram(init_net(4, 5 + static_cast<Index>(seed) * 10, seed), data.X());
        EXPECT_LE((g.H - g.H.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_GE(g.lambda_min, -1e-10);
        EXPECT_GE(g.H.diagonal().minCoeff(), 0.0);
        EXPECT_LE(g.H.diagonal().maxCoeff(), 1.0 + 1e-12);
        EXPECT_NEAR(g.lambda_min, symmetric_eigenvalues(g.H)(0), 1e-14);
    }
}

TEST(Gram, ConcentratesWithWidth) {
    const auto data = generate_sphere_dataset(8, 5, 1.0, 0);
    const auto hinf = gram_infinity(data.X());
    auto median_gap = [&](Index m) {
        std::vector<double> gaps;
        for (std::uint64_t seed = 0; seed < 7; ++seed) {
            gaps.push_back((gram(init_net(5, m, seed), data.X()).H - hinf.H).cwiseAbs().maxCoeff());
        }
        std::nth_element(gaps.begin(), gaps.begin() + 3, gaps.end());
        return gaps[3];
    };
    const double small = median_gap(100);
    const double large = median_gap(10000);
    // O(1/sqrt(m)) predicts a factor of 10.
    EXPECT_GT(small / large, 4.0);
}

TEST(GramInfinity, AnalyticEntries) {
    Eigen::MatrixXd X(3, 4);
    X << 1, 0, -1, 0.6,
         0, 1, 0, 0.8,
         0, 0, 0, 0;
    const auto h = gram_infinity(X);
    EXPECT_EQ(h.kind, GramKind::infinite);
    for (Index i = 0; i < 4; ++i) {
        EXPECT_DOUBLE_EQ(h.H(i, i), 0.5);
    }
    EXPECT_EQ(h.H(0, 1), 0.0);
    EXPECT_NEAR(h.H(0, 2), 0.0, 1e-16);
    // cos = 0.6: 0.6 (pi - acos 0.6) / (2 pi)
    EXPECT_NEAR(h.H(0, 3), 0.6 * (std::numbers::pi - std::acos(0.6)) / (2 * std::numbers::pi), 1e-15);
}

TEST(GramInfinity, ClosedFormAgreesWithMonteCarlo) {
    const auto data = generate_sphere_dataset(6, 4, 1.0, 1);
    const auto closed = gram_infinity(data.X());
    const auto mc = gram_infinity(data.X(), MonteCarlo{200'000, 5});
    // Each entry is an average of bounded indicators; 4 sigma at 2e5 samples is about 4.5e-3.
    EXPECT_LT((closed.H - mc.H).cwiseAbs().maxCoeff(), 5e-3);
}

TEST(GramInfinity, IndependentMonteCarloOracle) {
    // A separate estimator drawing w one at a time, no shared code with the library route.
    const auto data = generate_sphere_dataset(4, 3, 1.0, 2);
    const auto closed = gram_infinity(data.X());
    Rng rng(99);
    const int samples = 100000;
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(4, 4);
    for (int s = 0; s < samples; ++s) {
        const Eigen::Vector3d w(rng.normal(), rng.normal(), rng.normal());
        for (Index i = 0; i < 4; ++i) {
            for (Index j = 0; j < 4; ++j) {
                counts(i, j) += (w.dot(data.X().col(i)) >= 0 && w.dot(data.X().col(j)) >= 0) ? 1.0 : 0.0;
            }
        }
    }
    const Eigen::MatrixXd est = (counts / samples).cwiseProduct(data.X().transpose() * data.X());
    EXPECT_LT((closed.H - est).cwiseAbs().maxCoeff(), 7e-3);
}

TEST(GramInfinity, RejectsNonUnitColumns) {
    EXPECT_THROW(gram_infinity(Eigen::MatrixXd::Ones(2, 2)), std::invalid_argument);
}

TEST(Lambda0, OrthogonalPoints) {
    const Eigen::MatrixXd X = Eigen::MatrixXd::Identity(3, 2);
    EXPECT_NEAR(lambda0(gram_infinity(X)), 0.5, 1e-15);
}

TEST(Lambda0, DuplicatePointIsSingular) {
    Eigen::MatrixXd X(2, 2);
    X << 0.6, 0.6,
         0.8, 0.8;
    const auto h = gram_infinity(X);
    EXPECT_NEAR(h.H(0, 1), 0.5, 1e-15);
    EXPECT_NEAR(lambda0(h), 0.0, 1e-12);
}

TEST(Lambda0, PositiveOnGeneratedData) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        EXPECT_GT(lambda0(gram_infinity(generate_sphere_dataset(8, 5, 1.0, seed).X())), 0.0);
    }
}

TEST(Lambda0, RequiresInfiniteKind) {
    const auto data = generate_sphere_dataset(4, 3, 1.0, 0);
    EXPECT_THROW(lambda0(gram(init_net(3, 10, 0), data.X())), std::invalid_argument);
}

TEST(Hessian, PositiveSemidefinite) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto data = generate_sphere_dataset(6, 3, 1.0, seed);
        const auto h = hessian(init_net(3, 30, seed), data.X());
        EXPECT_GE(h.lambda_min, -1e-8);
        EXPECT_EQ(h.matrix.rows(), 90);
        EXPECT_TRUE(h.matrix.isApprox(h.matrix.transpose(), 0.0));
    }
}

TEST(Hessian, SinglePointRankOne) {
    const auto data = generate_sphere_dataset(1, 4, 1.0, 3);
    const auto h = hessian(init_net(4, 12, 3), data.X());
    EXPECT_LE(rank_with_tol(h.matrix), 1);
}

TEST(Hessian, MatchesJacobianProduct) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto inst = kink_free_instance(2, 2, 2, seed, 1e-2);
        const Eigen::MatrixXd J = oracle::prediction_jacobian_fd(inst.net, inst.X);
        const Eigen::MatrixXd gn = J.transpose() * J;
        const auto h = hessian(inst.net, inst.X);
        EXPECT_LT((h.matrix - gn).norm() / gn.norm(), 1e-8) << "seed " << seed;
    }
}

TEST(Hessian, MatchesFiniteDifferenceOfGradientAwayFromKinks) {
    // Inside one activation region the loss is quadratic in W, so the exact
    // Hessian has no dropped terms there.
    auto inst = kink_free_instance(3, 3, 2, 7, 1e-2);
    const Index p = 6;
    Eigen::MatrixXd fd(p, p);
    const double h = 1e-6;
    for (Index c = 0; c < p; ++c) {
        ShallowReluNet<double> up = inst.net, down = inst.net;
        up.W()(c / 2, c % 2) += h;
        down.W()(c / 2, c % 2) -= h;
        const Eigen::MatrixXd gu = grad_w(up, inst.X, inst.y);
        const Eigen::MatrixXd gd = grad_w(down, inst.X, inst.y);
        for (Index r = 0; r < p; ++r) {
            fd(r, c) = (gu(r / 2, r % 2) - gd(r / 2, r % 2)) / (2 * h);
        }
    }
    const auto hs = hessian(inst.net, inst.X);
    EXPECT_LT((hs.matrix - fd).norm() / hs.matrix.norm(), 1e-7);
}

TEST(Hessian, SizeGuard) {
    const Eigen::MatrixXd X = Eigen::MatrixXd::Identity(5, 2);
    EXPECT_THROW(hessian(init_net(5, 820, 0), X), std::invalid_argument);
    EXPECT_THROW(hessian(init_net(1, 4097, 0), Eigen::MatrixXd(Eigen::MatrixXd::Ones(1, 1))), std::invalid_argument);
}
