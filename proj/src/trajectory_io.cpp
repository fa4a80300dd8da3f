#include "ovlab/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ovlab {

std::string format_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[40];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf, static_cast<std::size_t>(len));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << text;
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string format_trajectory_csv(const Trajectory& traj) {
    std::string out = kTrajectoryHeader;
    out += '\n';
    for (std::size_t k = 0; k < traj.size(); ++k) {
        out += format_double(traj.times[k]) + ',' + format_double(traj.loss[k]) + ',' +
               format_double(traj.residual_sq[k]) + ',' + format_double(traj.lambda_min_H[k]) + ',' +
               format_double(traj.max_weight_drift[k]) + ',' + format_double(traj.max_grad_norm[k]) + '\n';
    }
    return out;
}

namespace {

double parse_field(const std::string& s) {
    if (s == "nan") {
        return std::nan("");
    }
    if (s == "inf") {
        return INFINITY;
    }
    if (s == "-inf") {
        return -INFINITY;
    }
    double v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw DataError("malformed number '" + s + "' in trajectory CSV");
    }
    return v;
}

} // namespace

Trajectory parse_trajectory_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kTrajectoryHeader) {
        throw DataError("trajectory CSV header mismatch");
    }
    Trajectory traj;
    long row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<double> fields;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) {
            fields.push_back(parse_field(cell));
        }
        if (fields.size() != 6) {
            throw DataError("trajectory CSV row " + std::to_string(row + 1) + " has " +
                            std::to_string(fields.size()) + " fields");
        }
        traj.step.push_back(row++);
        traj.times.push_back(fields[0]);
        traj.loss.push_back(fields[1]);
        traj.residual_sq.push_back(fields[2]);
        traj.lambda_min_H.push_back(fields[3]);
        traj.max_weight_drift.push_back(fields[4]);
        traj.max_grad_norm.push_back(fields[5]);
    }
    return traj;
}

nlohmann::ordered_json trajectory_meta_json(const Trajectory& traj) {
    nlohmann::ordered_json meta;
    meta["n"] = traj.meta.n;
    meta["m"] = traj.meta.m;
    meta["d"] = traj.meta.d;
    meta["lambda0"] = std::isfinite(traj.meta.lambda0) ? nlohmann::ordered_json(traj.meta.lambda0) : nullptr;
    meta["seed"] = traj.meta.seed ? nlohmann::ordered_json(*traj.meta.seed) : nullptr;
    meta["integrator"] = traj.meta.integrator;
    meta["step_size"] = traj.meta.step_size;
    meta["steps_run"] = traj.meta.steps_run;
    meta["records"] = traj.size();
    auto milestones = nlohmann::ordered_json::array();
    for (const auto& ms : traj.milestones) {
        milestones.push_back({{"threshold", ms.threshold},
                              {"step", ms.step ? nlohmann::ordered_json(*ms.step) : nullptr}});
    }
    meta["milestones"] = milestones;
    return meta;
}

void write_trajectory(const Trajectory& traj, const std::filesystem::path& csv_path) {
    write_text(csv_path, format_trajectory_csv(traj));
    auto sidecar = csv_path;
    sidecar.replace_extension(".json");
    write_text(sidecar, trajectory_meta_json(traj).dump(2) + "\n");
}

nlohmann::ordered_json bound_report_json(const BoundReport& report) {
    nlohmann::ordered_json j;
    j["name"] = report.name;
    j["passed"] = report.passed();
    j["records"] = report.times.size();
    j["violations"] = report.violations;
    j["first_violation_time"] =
        report.first_violation_time ? nlohmann::ordered_json(*report.first_violation_time) : nullptr;
    j["tightest_margin"] = std::isfinite(report.tightest_margin) ? nlohmann::ordered_json(report.tightest_margin)
                                                                  : nullptr;
    if (report.min_observed) {
        j["min_observed"] = *report.min_observed;
    }
    if (report.drift_at_worst) {
        j["drift_at_worst"] = *report.drift_at_worst;
    }
    return j;
}

} // namespace ovlab
