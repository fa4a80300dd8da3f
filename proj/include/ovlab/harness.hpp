#pragma once

// Named, reproducible experiments over the relu/linear/sigmoid modules.

#include "ovlab/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ovlab {

inline constexpr const char* kToolVersion = "ovlab 1.0.0";
inline constexpr const char* kOutEnvVar = "OVLAB_OUT";

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentInfo {
    std::string name;
    /// The claim the experiment checks.
    std::string anchor;
    std::string description;
};

const std::vector<ExperimentInfo>& list_experiments();

/// Fully resolved key/value configuration.
///
/// Precedence, lowest first: experiment defaults, config file, flags.
/// Keys not used by the selected experiment are rejected.
class ExperimentConfig {
public:
    const std::string& experiment() const { return experiment_; }
    std::filesystem::path out_dir() const { return text("out"); }

    const std::string& text(const std::string& key) const;
    long integer(const std::string& key) const;
    double real(const std::string& key) const;
    /// nullopt for the literal "auto".
    std::optional<double> real_or_auto(const std::string& key) const;
    std::vector<long> integers(const std::string& key) const;
    std::vector<std::uint64_t> seeds() const;

    /// "default", "file" or "flag" per key.
    const std::map<std::string, std::string>& sources() const { return sources_; }
    const std::map<std::string, std::string>& values() const { return values_; }
    nlohmann::ordered_json echo() const;

private:
    friend ExperimentConfig resolve_config(const std::map<std::string, std::string>&,
                                           const std::map<std::string, std::string>&);
    std::string experiment_;
    std::map<std::string, std::string> values_;
    std::map<std::string, std::string> sources_;
};

/// Flat "key = value" lines; '#' starts a comment. Duplicate keys are errors.
std::map<std::string, std::string> parse_config_text(const std::string& text);

/// Merges file values and flag values over the experiment's defaults and
/// validates every value. The experiment name may come from either source.
ExperimentConfig resolve_config(const std::map<std::string, std::string>& file_values,
                                const std::map<std::string, std::string>& flag_values);

ExperimentConfig parse_config(const std::optional<std::filesystem::path>& file,
                              const std::map<std::string, std::string>& flag_values);

struct SeedVerdict {
    std::uint64_t seed = 0;
    std::optional<long> width;
    bool passed = false;
    std::optional<std::string> error;
    nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
};

struct RunSummary {
    std::string experiment;
    std::vector<SeedVerdict> verdicts;
    double pass_rate = 0.0;
    double wall_clock_seconds = 0.0;
    /// Paths relative to the output directory.
    std::vector<std::string> artifacts;
    nlohmann::ordered_json aggregate = nlohmann::ordered_json::object();
    nlohmann::ordered_json config;
    std::string tool_version = kToolVersion;
    /// Any run threw; bound-check failures do not count.
    bool hard_error = false;

    nlohmann::ordered_json to_json() const;
};

/// Runs every seed (and width, where the experiment sweeps widths), writes
/// CSV series and <out>/<experiment>/summary.json, and returns the summary.
RunSummary run_experiment(const ExperimentConfig& cfg);

/// Median of a non-empty sample (mean of the two middle values for even sizes).
double median(std::vector<double> values);

} // namespace ovlab
