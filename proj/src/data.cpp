#include "ovlab/data.hpp"

#include "ovlab/rng.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ovlab {

Dataset::Dataset(Eigen::MatrixXd x, Eigen::VectorXd y, double label_bound)
    : x_(std::move(x)), y_(std::move(y)), c_(label_bound) {
    if (x_.cols() != y_.size()) {
        throw std::invalid_argument("Dataset: X has " + std::to_string(x_.cols()) +
                                    " columns but y has " + std::to_string(y_.size()) +
                                    " entries");
    }
    if (!(c_ > 0.0)) {
        throw std::invalid_argument("Dataset: label bound C must be positive");
    }
}

bool ValidationReport::ok() const {
    for (const auto& c : checks) {
        if (!c.passed) {
            return false;
        }
    }
    return true;
}

const ValidationCheck& ValidationReport::check(const std::string& name) const {
    for (const auto& c : checks) {
        if (c.name == name) {
            return c;
        }
    }
    throw std::out_of_range("no validation check named " + name);
}

std::string ValidationReport::describe() const {
    std::ostringstream out;
    for (const auto& c : checks) {
        out << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.message << '\n';
    }
    return out.str();
}

namespace {

std::string one_based(Index i) { return std::to_string(i + 1); }

} // namespace

ValidationReport validate(const Dataset& data, double parallel_tol) {
    const auto& X = data.X();
    const auto& y = data.y();
    const Index n = data.n();
    ValidationReport report;

    ValidationCheck norms;
    norms.name = "unit_norm";
    for (Index i = 0; i < n; ++i) {
        const double err = std::abs(X.col(i).norm() - 1.0);
        if (!std::isfinite(err) || err > norms.worst_value || !norms.first) {
            norms.worst_value = std::isfinite(err) ? err : INFINITY;
            norms.first = i;
        }
    }
    norms.passed = n == 0 || norms.worst_value <= kUnitNormTol;
    norms.message = n == 0 ? "no columns"
                           : "max |‖x_i‖ - 1| = " + std::to_string(norms.worst_value) +
                                 " at index " + one_based(*norms.first);
    report.checks.push_back(norms);

    ValidationCheck labels;
    labels.name = "label_bound";
    for (Index i = 0; i < n; ++i) {
        const double v = std::abs(y(i));
        if (!std::isfinite(v) || v > labels.worst_value || !labels.first) {
            labels.worst_value = std::isfinite(v) ? v : INFINITY;
            labels.first = i;
        }
    }
    labels.passed = n == 0 || labels.worst_value < data.C();
    labels.message = n == 0 ? "no labels"
                            : "max |y_i| = " + std::to_string(labels.worst_value) +
                                  " at index " + one_based(*labels.first) +
                                  " (C = " + std::to_string(data.C()) + ")";
    report.checks.push_back(labels);

    ValidationCheck parallel;
    parallel.name = "non_parallel";
    ValidationCheck distinct;
    distinct.name = "distinct_columns";
    distinct.worst_value = INFINITY;
    Eigen::VectorXd col_norms = X.colwise().norm().transpose();
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            const double denom = col_norms(i) * col_norms(j);
            const double cosine = denom > 0 ? std::abs(X.col(i).dot(X.col(j))) / denom : 1.0;
            if (!parallel.first || cosine > parallel.worst_value) {
                parallel.worst_value = cosine;
                parallel.first = i;
                parallel.second = j;
            }
            const double dist = (X.col(i) - X.col(j)).norm();
            if (!distinct.first || dist < distinct.worst_value) {
                distinct.worst_value = dist;
                distinct.first = i;
                distinct.second = j;
            }
        }
    }
    parallel.passed = !parallel.first || parallel.worst_value < 1.0 - parallel_tol;
    parallel.message = !parallel.first ? "fewer than two columns"
                                       : "max |cos| = " + std::to_string(parallel.worst_value) +
                                             " for pair (" + one_based(*parallel.first) + "," +
                                             one_based(*parallel.second) + ")";
    distinct.passed = !distinct.first || distinct.worst_value > 0.0;
    if (!distinct.first) {
        distinct.worst_value = 0.0;
    }
    distinct.message = !distinct.first ? "fewer than two columns"
                                       : "min ‖x_i - x_j‖ = " + std::to_string(distinct.worst_value) +
                                             " for pair (" + one_based(*distinct.first) + "," +
                                             one_based(*distinct.second) + ")";
    report.checks.push_back(parallel);
    report.checks.push_back(distinct);
    return report;
}

Dataset generate_sphere_dataset(Index n, Index d, double label_bound, std::uint64_t seed,
                                double parallel_tol, int max_retries) {
    if (n < 1) {
        throw std::invalid_argument("generate_sphere_dataset: n must be >= 1");
    }
    if (d < 2) {
        throw std::invalid_argument("generate_sphere_dataset: d must be >= 2");
    }
    if (!(label_bound > 0.0)) {
        throw std::invalid_argument("generate_sphere_dataset: C must be positive");
    }
    Rng rng(seed);
    Eigen::MatrixXd X(d, n);
    for (Index i = 0; i < n; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt <= max_retries && !placed; ++attempt) {
            Eigen::VectorXd v(d);
            for (Index k = 0; k < d; ++k) {
                v(k) = rng.normal();
            }
            const double norm = v.norm();
            if (norm == 0.0) {
                continue;
            }
            v /= norm;
            placed = true;
            for (Index j = 0; j < i && placed; ++j) {
                placed = std::abs(v.dot(X.col(j))) < 1.0 - parallel_tol;
            }
            if (placed) {
                X.col(i) = v;
            }
        }
        if (!placed) {
            throw DataError("generate_sphere_dataset: could not place column " +
                            std::to_string(i + 1) + " after " + std::to_string(max_retries) +
                            " retries");
        }
    }
    Eigen::VectorXd y(n);
    for (Index i = 0; i < n; ++i) {
        y(i) = label_bound * (2.0 * rng.uniform_open() - 1.0);
    }
    return Dataset(std::move(X), std::move(y), label_bound);
}

namespace {

void append_number(std::string& out, double v) {
    char buf[40];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    out.append(buf, static_cast<std::size_t>(len));
}

std::vector<double> parse_row(const std::string& line, std::size_t line_no) {
    std::vector<double> values;
    const char* p = line.data();
    const char* end = p + line.size();
    while (end > p && (end[-1] == '\r' || end[-1] == ' ')) {
        --end;
    }
    if (p == end) {
        throw DataError("dataset line " + std::to_string(line_no) + " is empty");
    }
    while (true) {
        while (p < end && *p == ' ') {
            ++p;
        }
        double v = 0;
        const auto [next, ec] = std::from_chars(p, end, v);
        if (ec != std::errc()) {
            throw DataError("dataset line " + std::to_string(line_no) + ": malformed number");
        }
        values.push_back(v);
        p = next;
        while (p < end && *p == ' ') {
            ++p;
        }
        if (p == end) {
            break;
        }
        if (*p != ',') {
            throw DataError("dataset line " + std::to_string(line_no) + ": expected ','");
        }
        ++p;
    }
    return values;
}

} // namespace

std::string format_dataset(const Dataset& data) {
    std::string out;
    out += std::to_string(data.d()) + "," + std::to_string(data.n()) + ",";
    append_number(out, data.C());
    out += '\n';
    for (Index r = 0; r < data.d(); ++r) {
        for (Index c = 0; c < data.n(); ++c) {
            if (c > 0) {
                out += ',';
            }
            append_number(out, data.X()(r, c));
        }
        out += '\n';
    }
    for (Index c = 0; c < data.n(); ++c) {
        if (c > 0) {
            out += ',';
        }
        append_number(out, data.y()(c));
    }
    out += '\n';
    return out;
}

Dataset parse_dataset(const std::string& text, double parallel_tol) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> std::vector<double> {
        if (!std::getline(in, line)) {
            throw DataError("dataset truncated after line " + std::to_string(line_no));
        }
        return parse_row(line, ++line_no);
    };

    const auto header = next_line();
    if (header.size() != 3) {
        throw DataError("dataset header must be 'd,n,C'");
    }
    const double d_raw = header[0];
    const double n_raw = header[1];
    if (d_raw < 1 || n_raw < 1 || d_raw != std::floor(d_raw) || n_raw != std::floor(n_raw)) {
        throw DataError("dataset header: d and n must be positive integers");
    }
    if (!(header[2] > 0.0)) {
        throw DataError("dataset header: C must be positive");
    }
    const auto d = static_cast<Index>(d_raw);
    const auto n = static_cast<Index>(n_raw);

    Eigen::MatrixXd X(d, n);
    for (Index r = 0; r < d; ++r) {
        const auto row = next_line();
        if (static_cast<Index>(row.size()) != n) {
            throw DataError("dataset line " + std::to_string(line_no) + ": expected " +
                            std::to_string(n) + " values");
        }
        for (Index c = 0; c < n; ++c) {
            X(r, c) = row[static_cast<std::size_t>(c)];
        }
    }
    const auto labels = next_line();
    if (static_cast<Index>(labels.size()) != n) {
        throw DataError("dataset label row: expected " + std::to_string(n) + " values");
    }
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \r") != std::string::npos) {
            throw DataError("dataset has trailing content after the label row");
        }
    }
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(labels.data(), n);

    Dataset data(std::move(X), std::move(y), header[2]);
    const auto report = validate(data, parallel_tol);
    if (!report.ok()) {
        throw DataError("dataset failed validation:\n" + report.describe());
    }
    return data;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << format_dataset(data);
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

Dataset load_dataset(const std::filesystem::path& path, double parallel_tol) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_dataset(buf.str(), parallel_tol);
}

} // namespace ovlab
