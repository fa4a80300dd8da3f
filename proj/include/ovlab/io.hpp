#pragma once

// CSV series and JSON summaries for trajectories and experiment results.

#include "ovlab/linear_landscape.hpp"
#include "ovlab/relu_dynamics.hpp"
#include "ovlab/sigmoid_rank.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace ovlab {

/// Columns: t,loss,residual_sq,lambda_min_H,max_weight_drift,max_grad_norm
inline constexpr const char* kTrajectoryHeader = "t,loss,residual_sq,lambda_min_H,max_weight_drift,max_grad_norm";

std::string format_trajectory_csv(const Trajectory& traj);
/// Reads the series back; meta fields are left default.
Trajectory parse_trajectory_csv(const std::string& text);
nlohmann::ordered_json trajectory_meta_json(const Trajectory& traj);

/// Writes `csv_path` and a sidecar with the same stem and a .json extension.
void write_trajectory(const Trajectory& traj, const std::filesystem::path& csv_path);

nlohmann::ordered_json bound_report_json(const BoundReport& report);

nlohmann::ordered_json landscape_json(const LandscapeResult& result);
/// Columns: init,seed,final_loss,grad_norm,steps,converged,status
std::string format_landscape_csv(const LandscapeResult& result);

/// Columns: trial,seed,rank,min_singular_value,max_singular_value
std::string format_measure_zero_csv(const MeasureZeroResult& result);

/// %.17g
std::string format_double(double v);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

} // namespace ovlab
