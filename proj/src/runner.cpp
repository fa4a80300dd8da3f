#include "experiments.hpp"

#include "ovlab/io.hpp"
#include "ovlab/parallel.hpp"

#include <algorithm>
#include <chrono>

namespace ovlab {

double median(std::vector<double> values) {
    if (values.empty()) {
        throw std::invalid_argument("median of an empty sample");
    }
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

nlohmann::ordered_json RunSummary::to_json() const {
    nlohmann::ordered_json j;
    j["experiment"] = experiment;
    j["tool_version"] = tool_version;
    j["pass_rate"] = pass_rate;
    j["hard_error"] = hard_error;
    j["wall_clock_seconds"] = wall_clock_seconds;
    auto runs = nlohmann::ordered_json::array();
    for (const auto& v : verdicts) {
        nlohmann::ordered_json r;
        r["seed"] = v.seed;
        if (v.width) {
            r["m"] = *v.width;
        }
        r["passed"] = v.passed;
        if (v.error) {
            r["error"] = *v.error;
        }
        r["metrics"] = v.metrics;
        runs.push_back(r);
    }
    j["runs"] = runs;
    j["aggregate"] = aggregate;
    j["artifacts"] = artifacts;
    j["config"] = config;
    return j;
}

RunSummary run_experiment(const ExperimentConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    const detail::ArtifactSink sink(cfg.out_dir(), cfg.experiment());
    std::filesystem::create_directories(sink.path("summary.json").parent_path());

    auto plan = detail::plan_experiment(cfg, sink);

    RunSummary summary;
    summary.experiment = cfg.experiment();
    summary.config = cfg.echo();
    for (const auto& width : plan.widths) {
        for (std::uint64_t seed : cfg.seeds()) {
            summary.verdicts.push_back(SeedVerdict{.seed = seed, .width = width});
        }
    }

    std::vector<std::vector<std::string>> files(summary.verdicts.size());
    parallel_for(summary.verdicts.size(), [&](std::size_t i) {
        auto& verdict = summary.verdicts[i];
        try {
            plan.run(verdict, files[i]);
        } catch (const std::exception& e) {
            verdict.passed = false;
            verdict.error = e.what();
        }
    });

    summary.artifacts = plan.shared_artifacts;
    std::size_t passes = 0;
    for (std::size_t i = 0; i < summary.verdicts.size(); ++i) {
        summary.artifacts.insert(summary.artifacts.end(), files[i].begin(), files[i].end());
        passes += summary.verdicts[i].passed ? 1 : 0;
        summary.hard_error = summary.hard_error || summary.verdicts[i].error.has_value();
    }
    summary.pass_rate = summary.verdicts.empty()
                            ? 0.0
                            : static_cast<double>(passes) / static_cast<double>(summary.verdicts.size());
    plan.aggregate(summary);

    summary.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_text(sink.path("summary.json"), summary.to_json().dump(2) + "\n");
    return summary;
}

} // namespace ovlab
