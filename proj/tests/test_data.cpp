#include "ovlab/data.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ovlab;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "ovlab_test_data";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double max_abs_cos(const Eigen::MatrixXd& X) {
    double worst = 0;
    for (Index i = 0; i < X.cols(); ++i) {
        for (Index j = i + 1; j < X.cols(); ++j) {
            worst = std::max(worst, std::abs(X.col(i).dot(X.col(j))));
        }
    }
    return worst;
}

} // namespace

TEST(Generate, SinglePoint) {
    const auto data = generate_sphere_dataset(1, 2, 1.0, 0);
    EXPECT_EQ(data.n(), 1);
    EXPECT_EQ(data.d(), 2);
    EXPECT_NEAR(data.X().col(0).norm(), 1.0, 1e-12);
    EXPECT_LT(std::abs(data.y()(0)), 1.0);
}

TEST(Generate, PairwiseNonParallel) {
    const auto data = generate_sphere_dataset(16, 5, 1.0, 42);
    EXPECT_LT(max_abs_cos(data.X()), 1 - 1e-6);
}

TEST(Generate, ThreeDirectionsInThePlane) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        EXPECT_NO_THROW(generate_sphere_dataset(3, 2, 1.0, seed));
    }
}

TEST(Generate, RejectsBadParameters) {
    EXPECT_THROW(generate_sphere_dataset(0, 3, 1.0, 0), std::invalid_argument);
    EXPECT_THROW(generate_sphere_dataset(3, 1, 1.0, 0), std::invalid_argument);
    EXPECT_THROW(generate_sphere_dataset(3, 3, 0.0, 0), std::invalid_argument);
}

TEST(Generate, RetriesExhausted) {
    // |cos| < 0.5 asks for lines more than 60 degrees apart; four cannot fit in the plane.
    EXPECT_THROW(generate_sphere_dataset(4, 2, 1.0, 0, 0.5, 200), DataError);
}

TEST(Generate, Deterministic) {
    const auto a = generate_sphere_dataset(12, 4, 2.0, 9);
    const auto b = generate_sphere_dataset(12, 4, 2.0, 9);
    EXPECT_EQ(format_dataset(a), format_dataset(b));
    EXPECT_NE(format_dataset(a), format_dataset(generate_sphere_dataset(12, 4, 2.0, 10)));
}

TEST(Generate, AlwaysValidates) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Index n = 1 + static_cast<Index>(seed % 30);
        const Index d = 2 + static_cast<Index>(seed % 7);
        const double c = 0.5 + static_cast<double>(seed % 4);
        const auto data = generate_sphere_dataset(n, d, c, seed);
        const auto report = validate(data);
        EXPECT_TRUE(report.ok()) << report.describe();
        EXPECT_LT(data.y().cwiseAbs().maxCoeff(), c);
    }
}

TEST(Validate, DuplicateColumnNamesPair) {
    Eigen::MatrixXd X(2, 3);
    X << 1, 1, 0,
         0, 0, 1;
    const Dataset data(X, Eigen::Vector3d(0.1, 0.2, 0.3), 1.0);
    const auto report = validate(data);
    EXPECT_FALSE(report.ok());
    const auto& par = report.check("non_parallel");
    EXPECT_FALSE(par.passed);
    ASSERT_TRUE(par.first && par.second);
    EXPECT_EQ(*par.first, 0);
    EXPECT_EQ(*par.second, 1);
    EXPECT_NE(par.message.find("(1,2)"), std::string::npos) << par.message;
    EXPECT_FALSE(report.check("distinct_columns").passed);
}

TEST(Validate, NormFailureAtFirstIndex) {
    Eigen::MatrixXd X(2, 2);
    X << 0.5, 0,
         0, 1;
    const Dataset data(X, Eigen::Vector2d(0.1, 0.2), 1.0);
    const auto report = validate(data);
    const auto& norm = report.check("unit_norm");
    EXPECT_FALSE(norm.passed);
    ASSERT_TRUE(norm.first);
    EXPECT_EQ(*norm.first, 0);
    EXPECT_NEAR(norm.worst_value, 0.5, 1e-15);
    EXPECT_NE(norm.message.find("1"), std::string::npos);
}

TEST(Validate, LabelBound) {
    Eigen::MatrixXd X(2, 2);
    X << 1, 0,
         0, 1;
    const Dataset data(X, Eigen::Vector2d(0.1, -1.0), 1.0);
    const auto& check = validate(data).check("label_bound");
    EXPECT_FALSE(check.passed);
    ASSERT_TRUE(check.first);
    EXPECT_EQ(*check.first, 1);
}

TEST(Validate, AntipodalPairIsParallel) {
    Eigen::MatrixXd X(2, 2);
    X << 1, -1,
         0, 0;
    const Dataset data(X, Eigen::Vector2d(0.1, 0.2), 1.0);
    EXPECT_FALSE(validate(data).check("non_parallel").passed);
    EXPECT_TRUE(validate(data).check("distinct_columns").passed);
}

TEST(Persist, RoundTripBitExact) {
    const auto data = generate_sphere_dataset(10, 5, 1.0, 3);
    const auto path = scratch("round.csv");
    save_dataset(data, path);
    const auto loaded = load_dataset(path);
    EXPECT_TRUE(loaded == data);
    const auto again = scratch("round2.csv");
    save_dataset(loaded, again);
    EXPECT_EQ(slurp(path), slurp(again));
}

TEST(Persist, HeaderLayout) {
    const auto data = generate_sphere_dataset(4, 3, 1.5, 1);
    const std::string text = format_dataset(data);
    EXPECT_EQ(text.substr(0, text.find('\n')), "3,4,1.5");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 3 + 1);
}

TEST(Persist, TruncatedFileRejected) {
    const std::string text = format_dataset(generate_sphere_dataset(5, 3, 1.0, 2));
    const auto cut = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
    EXPECT_THROW(parse_dataset(cut), DataError);
    EXPECT_THROW(parse_dataset(text.substr(0, text.size() / 2)), DataError);
    EXPECT_THROW(parse_dataset(""), DataError);
}

TEST(Persist, LabelAtBoundRejected) {
    EXPECT_THROW(parse_dataset("2,2,1\n1,0\n0,1\n0.5,1\n"), DataError);
    EXPECT_NO_THROW(parse_dataset("2,2,1\n1,0\n0,1\n0.5,0.999\n"));
}

TEST(Persist, MalformedContentRejected) {
    EXPECT_THROW(parse_dataset("2,2,1\n1,0\n0,x\n0.5,0.5\n"), DataError);
    EXPECT_THROW(parse_dataset("2,2,1\n1,0,0\n0,1\n0.5,0.5\n"), DataError);
    EXPECT_THROW(parse_dataset("2,2,1\n1,0\n0,1\n0.5,0.5\n1,1\n"), DataError);
    EXPECT_THROW(parse_dataset("2,2,-1\n1,0\n0,1\n0.5,0.5\n"), DataError);
}

TEST(Persist, MissingFile) {
    EXPECT_THROW(load_dataset(scratch("does_not_exist.csv")), DataError);
}
