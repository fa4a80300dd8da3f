#pragma once

#include "ovlab/harness.hpp"

#include <functional>

namespace ovlab::detail {

/// Writes files under `dir` and records their paths relative to the output root.
class ArtifactSink {
public:
    ArtifactSink(std::filesystem::path root, std::string experiment)
        : root_(std::move(root)), experiment_(std::move(experiment)) {}

    std::filesystem::path path(const std::string& file) const { return root_ / experiment_ / file; }
    std::string relative(const std::string& file) const { return experiment_ + "/" + file; }

private:
    std::filesystem::path root_;
    std::string experiment_;
};

struct ExperimentPlan {
    /// One entry per width; a single nullopt for experiments without a width sweep.
    std::vector<std::optional<long>> widths{std::nullopt};
    /// Runs one (seed, width) entry; appends relative paths of files it wrote.
    std::function<void(SeedVerdict&, std::vector<std::string>&)> run;
    /// Fills summary.aggregate from the finished verdicts.
    std::function<void(RunSummary&)> aggregate;
    /// Files written once during planning (e.g. the shared dataset).
    std::vector<std::string> shared_artifacts;
};

ExperimentPlan plan_experiment(const ExperimentConfig& cfg, const ArtifactSink& sink);

} // namespace ovlab::detail
