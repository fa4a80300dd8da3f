// ovlab: command-line entry point for the experiment harness.
//
//   ovlab list
//   ovlab run --experiment NAME [--config FILE] [--seed S ...] [--out DIR] [--set key=value ...]
//   ovlab validate-data FILE
//   ovlab generate-data --n N --d D [--C C] [--seed S] --out FILE

#include "ovlab/data.hpp"
#include "ovlab/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

int cmd_list() {
    for (const auto& e : ovlab::list_experiments()) {
        std::cout << e.name << "\n    checks: " << e.anchor << "\n    " << e.description << "\n";
    }
    return 0;
}

int cmd_run(const std::string& experiment, const std::string& config_file, const std::vector<std::uint64_t>& seeds,
            const std::string& out, const std::vector<std::string>& sets) {
    std::map<std::string, std::string> flags;
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ovlab::ConfigError("--set expects key=value, got '" + kv + "'");
        }
        flags[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    if (!experiment.empty()) {
        flags["experiment"] = experiment;
    }
    if (!out.empty()) {
        flags["out"] = out;
    }
    if (!seeds.empty()) {
        std::string joined;
        for (auto s : seeds) {
            joined += (joined.empty() ? "" : ",") + std::to_string(s);
        }
        flags["seeds"] = joined;
    }
    std::optional<std::filesystem::path> file;
    if (!config_file.empty()) {
        file = config_file;
    }
    const auto cfg = ovlab::parse_config(file, flags);
    const auto summary = ovlab::run_experiment(cfg);

    std::cout << summary.experiment << ": pass-rate " << summary.pass_rate << " over " << summary.verdicts.size()
              << " run(s), " << summary.artifacts.size() << " artifact(s) in " << cfg.out_dir().string() << "\n";
    for (const auto& v : summary.verdicts) {
        if (v.error) {
            std::cerr << "seed " << v.seed << (v.width ? " m " + std::to_string(*v.width) : std::string())
                      << ": " << *v.error << "\n";
        }
    }
    if (!summary.aggregate.empty()) {
        std::cout << summary.aggregate.dump(2) << "\n";
    }
    return summary.hard_error ? 3 : 0;
}

int cmd_validate(const std::string& path) {
    try {
        const auto data = ovlab::load_dataset(path);
        std::cout << ovlab::validate(data).describe();
        std::cout << "valid: d=" << data.d() << " n=" << data.n() << "\n";
        return 0;
    } catch (const ovlab::DataError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
}

int cmd_generate(long n, long d, double c, std::uint64_t seed, const std::string& out) {
    ovlab::save_dataset(ovlab::generate_sphere_dataset(n, d, c, seed), out);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical checks of optimization theory for overparameterized networks"};
    app.require_subcommand(1);

    auto* list = app.add_subcommand("list", "List registered experiments");

    auto* run = app.add_subcommand("run", "Run a named experiment");
    std::string experiment, config_file, out;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> sets;
    run->add_option("--experiment,-e", experiment, "Experiment name");
    run->add_option("--config,-c", config_file, "Key/value config file")->check(CLI::ExistingFile);
    run->add_option("--seed,-s", seeds, "Run seed(s); repeatable");
    run->add_option("--out,-o", out, std::string("Output directory (default $") + ovlab::kOutEnvVar + " or ./ovlab-out)");
    run->add_option("--set", sets, "Override a config key, key=value; repeatable");

    auto* validate = app.add_subcommand("validate-data", "Validate a dataset CSV");
    std::string data_file;
    validate->add_option("file", data_file, "Dataset CSV")->required();

    auto* generate = app.add_subcommand("generate-data", "Write a synthetic unit-sphere dataset");
    long gen_n = 0, gen_d = 0;
    double gen_c = 1.0;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    generate->add_option("--n", gen_n, "Number of points")->required();
    generate->add_option("--d", gen_d, "Dimension")->required();
    generate->add_option("--C", gen_c, "Label bound");
    generate->add_option("--seed", gen_seed, "Seed");
    generate->add_option("--out", gen_out, "Output CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*list) {
            return cmd_list();
        }
        if (*run) {
            return cmd_run(experiment, config_file, seeds, out, sets);
        }
        if (*validate) {
            return cmd_validate(data_file);
        }
        if (*generate) {
            return cmd_generate(gen_n, gen_d, gen_c, gen_seed, gen_out);
        }
    } catch (const ovlab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
