#include "ovlab/io.hpp"

namespace ovlab {

std::string to_string(RunStatus status) {
    switch (status) {
    case RunStatus::global:
        return "global";
    case RunStatus::suspect:
        return "unconverged-suspect";
    case RunStatus::unconverged:
        return "unconverged";
    case RunStatus::diverged:
        return "diverged";
    }
    return "unknown";
}

nlohmann::ordered_json landscape_json(const LandscapeResult& result) {
    nlohmann::ordered_json j;
    j["global_loss"] = result.global_loss;
    j["tol"] = result.tol;
    j["verdict"] = result.verdict;
    j["counts"] = {{"global", result.count(RunStatus::global)},
                   {"unconverged-suspect", result.count(RunStatus::suspect)},
                   {"unconverged", result.count(RunStatus::unconverged)},
                   {"diverged", result.count(RunStatus::diverged)}};
    auto runs = nlohmann::ordered_json::array();
    for (const auto& run : result.runs) {
        runs.push_back({{"seed", run.seed},
                        {"final_loss", run.final_loss},
                        {"grad_norm", run.grad_norm},
                        {"steps", run.steps},
                        {"converged", run.converged},
                        {"status", to_string(run.status)}});
    }
    j["runs"] = runs;
    return j;
}

std::string format_landscape_csv(const LandscapeResult& result) {
    std::string out = "init,seed,final_loss,grad_norm,steps,converged,status\n";
    for (std::size_t i = 0; i < result.runs.size(); ++i) {
        const auto& run = result.runs[i];
        out += std::to_string(i) + ',' + std::to_string(run.seed) + ',' + format_double(run.final_loss) + ',' +
               format_double(run.grad_norm) + ',' + std::to_string(run.steps) + ',' +
               (run.converged ? "1" : "0") + ',' + to_string(run.status) + '\n';
    }
    return out;
}

std::string format_measure_zero_csv(const MeasureZeroResult& result) {
    std::string out = "trial,seed,rank,min_singular_value,max_singular_value\n";
    for (const auto& t : result.trials) {
        out += std::to_string(t.trial) + ',' + std::to_string(t.seed) + ',' + std::to_string(t.rank) + ',' +
               format_double(t.min_singular_value) + ',' + format_double(t.max_singular_value) + '\n';
    }
    return out;
}

} // namespace ovlab
