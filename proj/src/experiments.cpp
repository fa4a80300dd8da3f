#include "experiments.hpp"

#include "ovlab/io.hpp"
#include "ovlab/linear_landscape.hpp"
#include "ovlab/relu_dynamics.hpp"
#include "ovlab/sigmoid_rank.hpp"

#include <cmath>
#include <limits>
#include <memory>

namespace ovlab::detail {

namespace {

using json = nlohmann::ordered_json;

std::string entry_tag(const SeedVerdict& v) {
    std::string tag;
    if (v.width) {
        tag += "m" + std::to_string(*v.width) + "_";
    }
    return tag + "seed" + std::to_string(v.seed);
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct ReluSetup {
    std::shared_ptr<const Dataset> data;
    double lambda0 = 0.0;
};

ReluSetup relu_setup(const ExperimentConfig& cfg, const ArtifactSink& sink, ExperimentPlan& plan) {
    auto data = std::make_shared<const Dataset>(generate_sphere_dataset(
        cfg.integer("n"), cfg.integer("d"), cfg.real("C"), static_cast<std::uint64_t>(cfg.integer("data_seed"))));
    const double l0 = lambda0(gram_infinity(data->X()));
    write_text(sink.path("dataset.csv"), format_dataset(*data));
    plan.shared_artifacts.push_back(sink.relative("dataset.csv"));
    return {std::move(data), l0};
}

std::vector<std::optional<long>> widths_of(const ExperimentConfig& cfg) {
    std::vector<std::optional<long>> out;
    for (long m : cfg.integers("widths")) {
        out.emplace_back(m);
    }
    return out;
}

/// Entries grouped by width, in sweep order.
std::vector<std::pair<long, std::vector<const SeedVerdict*>>> by_width(const RunSummary& summary) {
    std::vector<std::pair<long, std::vector<const SeedVerdict*>>> groups;
    for (const auto& v : summary.verdicts) {
        const long w = v.width.value_or(0);
        if (groups.empty() || groups.back().first != w) {
            groups.push_back({w, {}});
        }
        groups.back().second.push_back(&v);
    }
    return groups;
}

double pass_rate_of(const std::vector<const SeedVerdict*>& entries) {
    if (entries.empty()) {
        return 0.0;
    }
    std::size_t passes = 0;
    for (const auto* v : entries) {
        passes += v->passed ? 1 : 0;
    }
    return static_cast<double>(passes) / static_cast<double>(entries.size());
}

Trajectory run_flow(const ReluSetup& setup, const ExperimentConfig& cfg, long m, std::uint64_t seed) {
    auto net = init_net(setup.data->d(), m, seed);
    const double h = cfg.real_or_auto("h").value_or(default_ode_step(setup.lambda0));
    return train_ode(net, *setup.data,
                     OdeOptions{.horizon = cfg.real("horizon") / setup.lambda0,
                                .h = h,
                                .record_every = cfg.integer("record_every"),
                                .lambda0 = setup.lambda0});
}

ExperimentPlan plan_convergence_envelope(const ExperimentConfig& cfg, const ArtifactSink& sink) {
    ExperimentPlan plan;
    const auto setup = relu_setup(cfg, sink, plan);
    plan.run = [=, &cfg](SeedVerdict& v, std::vector<std::string>& files) {
        const auto traj = run_flow(setup, cfg, cfg.integer("m"), v.seed);
        const auto report = check_convergence_bound(traj, setup.lambda0, cfg.real("slack"));
        const std::string file = "traj_" + entry_tag(v) + ".csv";
        write_trajectory(traj, sink.path(file));
        files.push_back(sink.relative(file));
        files.push_back(sink.relative("traj_" + entry_tag(v) + ".json"));
        v.passed = report.passed();
        v.metrics["envelope"] = bound_report_json(report);
        v.metrics["gradient_decay_violations"] = check_gradient_decay(traj).violations;
        v.metrics["final_residual_sq"] = traj.residual_sq.back();
    };
    plan.aggregate = [l0 = setup.lambda0](RunSummary& s) { s.aggregate["lambda0"] = l0; };
    return plan;
}

ExperimentPlan plan_lambda_floor(const ExperimentConfig& cfg, const ArtifactSink& sink) {
    ExperimentPlan plan;
    plan.widths = widths_of(cfg);
    const auto setup = relu_setup(cfg, sink, plan);
    plan.run = [=, &cfg](SeedVerdict& v, std::vector<std::string>& files) {
        const auto traj = run_flow(setup, cfg, *v.width, v.seed);
        const auto report = check_lambda_floor(traj, setup.lambda0);
        const std::string file = "traj_" + entry_tag(v) + ".csv";
        write_trajectory(traj, sink.path(file));
        files.push_back(sink.relative(file));
        files.push_back(sink.relative("traj_" + entry_tag(v) + ".json"));
        v.passed = report.passed();
        v.metrics["floor"] = bound_report_json(report);
        v.metrics["lambda_min_H0_over_lambda0"] = traj.lambda_min_H.front() / setup.lambda0;
    };
    plan.aggregate = [l0 = setup.lambda0](RunSummary& s) {
        s.aggregate["lambda0"] = l0;
        json per_width = json::array();
        bool monotone = true;
        double previous = -1.0;
        for (const auto& [w, entries] : by_width(s)) {
            const double rate = pass_rate_of(entries);
            monotone = monotone && rate >= previous;
            previous = rate;
            per_width.push_back({{"m", w}, {"pass_rate", rate}});
        }
        s.aggregate["per_width"] = per_width;
        s.aggregate["pass_rate_nondecreasing"] = monotone;
    };
    return plan;
}

ExperimentPlan plan_gram_concentration(const ExperimentConfig& cfg, const ArtifactSink& sink) {
    ExperimentPlan plan;
    plan.widths = widths_of(cfg);
    const auto setup = relu_setup(cfg, sink, plan);
    const auto hinf = std::make_shared<const Eigen::MatrixXd>(gram_infinity(setup.data->X()).H);
    plan.run = [=](SeedVerdict& v, std::vector<std::string>&) {
        const auto net = init_net(setup.data->d(), *v.width, v.seed);
        const auto h0 = gram(net, setup.data->X());
        const double dist = symmetric_spectral_norm(h0.H - *hinf);
        v.passed = h0.lambda_min >= 0.75 * setup.lambda0;
        v.metrics["spectral_distance"] = dist;
        v.metrics["max_entry_distance"] = (h0.H - *hinf).cwiseAbs().maxCoeff();
        v.metrics["lambda_min_H0"] = h0.lambda_min;
    };
    plan.aggregate = [l0 = setup.lambda0, sink](RunSummary& s) {
        s.aggregate["lambda0"] = l0;
        std::string csv = "m,seed,spectral_distance,max_entry_distance,lambda_min_H0\n";
        for (const auto& v : s.verdicts) {
            if (v.error) {
                continue;
            }
            csv += std::to_string(v.width.value_or(0)) + ',' + std::to_string(v.seed) + ',' +
                   format_double(v.metrics["spectral_distance"].get<double>()) + ',' +
                   format_double(v.metrics["max_entry_distance"].get<double>()) + ',' +
                   format_double(v.metrics["lambda_min_H0"].get<double>()) + '\n';
        }
        write_text(sink.path("concentration.csv"), csv);
        s.artifacts.push_back(sink.relative("concentration.csv"));
        json per_width = json::array();
        double previous = std::numeric_limits<double>::quiet_NaN();
        double min_ratio = std::numeric_limits<double>::infinity();
        for (const auto& [w, entries] : by_width(s)) {
            std::vector<double> dists;
            for (const auto* v : entries) {
                if (!v->error) {
                    dists.push_back(v->metrics.at("spectral_distance").get<double>());
                }
            }
            const double med = dists.empty() ? std::numeric_limits<double>::quiet_NaN() : median(dists);
            json row = {{"m", w}, {"median_spectral_distance", finite_or_null(med)}};
            if (std::isfinite(previous)) {
                row["decrease_factor"] = finite_or_null(previous / med);
                min_ratio = std::min(min_ratio, previous / med);
            }
            previous = med;
            per_width.push_back(row);
        }
        s.aggregate["per_width"] = per_width;
        s.aggregate["min_decrease_factor"] = finite_or_null(min_ratio);
    };
    return plan;
}

ExperimentPlan plan_width_sweep(const ExperimentConfig& cfg, const ArtifactSink& sink) {
    ExperimentPlan plan;
    plan.widths = widths_of(cfg);
    const auto setup = relu_setup(cfg, sink, plan);
    const double eta = cfg.real_or_auto("eta").value_or(default_eta(setup.lambda0, setup.data->n()));
    plan.run = [=, &cfg](SeedVerdict& v, std::vector<std::string>& files) {
        auto net = init_net(setup.data->d(), *v.width, v.seed);
        const double target = cfg.real("target_loss");
        const auto traj = train_discrete(net, *setup.data,
                                         DiscreteOptions{.eta = eta,
                                                         .steps = cfg.integer("steps"),
                                                         .record_every = cfg.integer("record_every"),
                                                         .stop_below = target,
                                                         .milestones = {cfg.real("milestone_loss"), target},
                                                         .lambda0 = setup.lambda0});
        const std::string file = "traj_" + entry_tag(v) + ".csv";
        write_trajectory(traj, sink.path(file));
        files.push_back(sink.relative(file));
        files.push_back(sink.relative("traj_" + entry_tag(v) + ".json"));
        v.passed = traj.milestones[1].step.has_value();
        v.metrics["final_loss"] = traj.loss.back();
        v.metrics["steps_to_milestone"] =
            traj.milestones[0].step ? json(*traj.milestones[0].step) : json(nullptr);
        v.metrics["steps_to_target"] = traj.milestones[1].step ? json(*traj.milestones[1].step) : json(nullptr);
    };
    plan.aggregate = [eta, l0 = setup.lambda0](RunSummary& s) {
        s.aggregate["lambda0"] = l0;
        s.aggregate["eta"] = eta;
        json per_width = json::array();
        bool non_increasing = true;
        double previous = std::numeric_limits<double>::infinity();
        for (const auto& [w, entries] : by_width(s)) {
            std::vector<double> steps;
            bool all_hit = true;
            for (const auto* v : entries) {
                const auto it = v->metrics.find("steps_to_milestone");
                if (v->error || it == v->metrics.end() || it->is_null()) {
                    all_hit = false;
                } else {
                    steps.push_back(it->get<double>());
                }
            }
            const double med = all_hit && !steps.empty() ? median(steps) : std::numeric_limits<double>::infinity();
            non_increasing = non_increasing && std::isfinite(med) && med <= previous;
            previous = med;
            per_width.push_back({{"m", w}, {"median_steps_to_milestone", finite_or_null(med)},
                                 {"target_rate", pass_rate_of(entries)}});
        }
        s.aggregate["per_width"] = per_width;
        s.aggregate["median_steps_non_increasing"] = non_increasing;
    };
    return plan;
}

ExperimentPlan plan_gradient_decay(const ExperimentConfig& cfg, const ArtifactSink& sink) {
    ExperimentPlan plan;
    const auto setup = relu_setup(cfg, sink, plan);
    const double eta = cfg.real_or_auto("eta").value_or(default_eta(setup.lambda0, setup.data->n()));
    plan.run = [=, &cfg](SeedVerdict& v, std::vector<std::string>& files) {
        auto net = init_net(setup.data->d(), cfg.integer("m"), v.seed);
        const auto traj = train_discrete(net, *setup.data,
                                         DiscreteOptions{.eta = eta,
                                                         .steps = cfg.integer("steps"),
                                                         .record_every = cfg.integer("record_every"),
                                                         .lambda0 = setup.lambda0});
        const auto report = check_gradient_decay(traj);
        const std::string file = "traj_" + entry_tag(v) + ".csv";
        write_trajectory(traj, sink.path(file));
        files.push_back(sink.relative(file));
        files.push_back(sink.relative("traj_" + entry_tag(v) + ".json"));
        v.passed = report.passed();
        v.metrics["gradient_decay"] = bound_report_json(report);
    };
    plan.aggregate = [l0 = setup.lambda0](RunSummary& s) { s.aggregate["lambda0"] = l0; };
    return plan;
}

ExperimentPlan plan_hessian_psd(const ExperimentConfig& cfg, const ArtifactSink& sink) {
    ExperimentPlan plan;
    const auto setup = relu_setup(cfg, sink, plan);
    plan.run = [=, &cfg](SeedVerdict& v, std::vector<std::string>&) {
        const auto net = init_net(setup.data->d(), cfg.integer("m"), v.seed);
        const auto hess = hessian(net, setup.data->X());
        v.passed = hess.lambda_min >= -1e-8;
        v.metrics["lambda_min"] = hess.lambda_min;
    };
    plan.aggregate = [](RunSummary&) {};
    return plan;
}

ExperimentPlan plan_linear_landscape(const ExperimentConfig& cfg, const ArtifactSink& sink) {
    ExperimentPlan plan;
    std::vector<Index> dims;
    for (long v : cfg.integers("dims")) {
        dims.push_back(v);
    }
    if (dims.size() < 2) {
        throw ConfigError("dims needs at least two entries");
    }
    plan.run = [=, &cfg](SeedVerdict& v, std::vector<std::string>& files) {
        const Index samples = cfg.integer("samples");
        Rng rng(derive_seed(v.seed, 0xDA7A));
        Eigen::MatrixXd X(dims.front(), samples);
        Eigen::MatrixXd Y(dims.back(), samples);
        for (Index c = 0; c < samples; ++c) {
            for (Index r = 0; r < X.rows(); ++r) {
                X(r, c) = rng.normal();
            }
            for (Index r = 0; r < Y.rows(); ++r) {
                Y(r, c) = rng.normal();
            }
        }
        const auto result = multi_init_gd<double>(dims, X, Y,
                                                  GdOptions{.n_inits = static_cast<std::size_t>(cfg.integer("n_inits")),
                                                            .max_steps = cfg.integer("max_steps"),
                                                            .eta = cfg.real("eta"),
                                                            .grad_tol = cfg.real("grad_tol"),
                                                            .rel_tol = cfg.real("rel_tol"),
                                                            .seed = v.seed});
        const std::string stem = "landscape_" + entry_tag(v);
        write_text(sink.path(stem + ".json"), landscape_json(result).dump(2) + "\n");
        write_text(sink.path(stem + ".csv"), format_landscape_csv(result));
        files.push_back(sink.relative(stem + ".json"));
        files.push_back(sink.relative(stem + ".csv"));
        v.passed = result.verdict;
        v.metrics["global_loss"] = result.global_loss;
        v.metrics["global_runs"] = result.count(RunStatus::global);
        v.metrics["suspect_runs"] = result.count(RunStatus::suspect);
        v.metrics["unconverged_runs"] = result.count(RunStatus::unconverged);
        v.metrics["diverged_runs"] = result.count(RunStatus::diverged);
    };
    plan.aggregate = [](RunSummary&) {};
    return plan;
}

ExperimentPlan plan_sigmoid_rank(const ExperimentConfig& cfg, const ArtifactSink& sink) {
    ExperimentPlan plan;
    plan.run = [=, &cfg](SeedVerdict& v, std::vector<std::string>& files) {
        const auto result = measure_zero_experiment(cfg.integer("d"), cfg.integer("d1"), cfg.integer("n"),
                                                    static_cast<std::size_t>(cfg.integer("trials")), v.seed);
        const std::string file = "rank_" + entry_tag(v) + ".csv";
        write_text(sink.path(file), format_measure_zero_csv(result));
        files.push_back(sink.relative(file));
        v.passed = result.fraction_full_rank == 1.0;
        v.metrics["fraction_full_rank"] = result.fraction_full_rank;
        json deficient = json::array();
        for (const auto& t : result.deficient()) {
            deficient.push_back({{"trial", t.trial}, {"seed", t.seed}, {"rank", t.rank}});
        }
        v.metrics["deficient_trials"] = deficient;
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& t : result.trials) {
            worst = std::min(worst, t.min_singular_value / t.max_singular_value);
        }
        v.metrics["min_relative_singular_value"] = finite_or_null(worst);
    };
    plan.aggregate = [](RunSummary&) {};
    return plan;
}

ExperimentPlan plan_topfit_zeroloss(const ExperimentConfig& cfg, const ArtifactSink& sink) {
    ExperimentPlan plan;
    (void)sink;
    plan.run = [&cfg](SeedVerdict& v, std::vector<std::string>&) {
        const auto data = generate_sphere_dataset(cfg.integer("n"), cfg.integer("d"), cfg.real("C"), v.seed);
        const Index d1 = cfg.integer("d1");
        Rng rng(derive_seed(v.seed, 0x70F1));
        Eigen::MatrixXd w1(d1, data.d());
        for (Index r = 0; r < d1; ++r) {
            for (Index c = 0; c < data.d(); ++c) {
                w1(r, c) = rng.normal();
            }
        }
        const Eigen::MatrixXd features = sigmoid(w1 * data.X());
        const Eigen::MatrixXd labels = data.y().transpose();
        const auto fit = top_layer_fit(features, labels);
        const SigmoidNet<double> net({w1, fit.W2});
        const double end_to_end = (labels - sigmoid_forward(net, data.X())).norm() / labels.norm();
        v.passed = end_to_end < cfg.real("fit_tol");
        v.metrics["relative_residual"] = fit.relative_residual;
        v.metrics["end_to_end_relative_residual"] = end_to_end;
        v.metrics["feature_rank"] = fit.feature_rank;
    };
    plan.aggregate = [](RunSummary&) {};
    return plan;
}

} // namespace

ExperimentPlan plan_experiment(const ExperimentConfig& cfg, const ArtifactSink& sink) {
    using Planner = ExperimentPlan (*)(const ExperimentConfig&, const ArtifactSink&);
    static const std::map<std::string, Planner> planners = {
        {"convergence-envelope", plan_convergence_envelope},
        {"lambda-floor", plan_lambda_floor},
        {"gram-concentration", plan_gram_concentration},
        {"width-sweep", plan_width_sweep},
        {"gradient-decay", plan_gradient_decay},
        {"hessian-psd", plan_hessian_psd},
        {"linear-landscape", plan_linear_landscape},
        {"sigmoid-rank", plan_sigmoid_rank},
        {"topfit-zeroloss", plan_topfit_zeroloss},
    };
    const auto it = planners.find(cfg.experiment());
    if (it == planners.end()) {
        throw ConfigError("unknown experiment '" + cfg.experiment() + "'");
    }
    return it->second(cfg, sink);
}

} // namespace ovlab::detail
