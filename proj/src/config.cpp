#include "ovlab/harness.hpp"

#include "ovlab/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>

namespace ovlab {

namespace {

enum class Kind { integer, real, real_or_auto, integer_list, seed_list, text };

struct KeySpec {
    Kind kind;
    /// Lower bound; exclusive when `strict`.
    double min;
    bool strict;
    double max = 1e300;
    std::string help;
};

const std::map<std::string, KeySpec>& key_specs() {
    static const std::map<std::string, KeySpec> specs = {
        {"experiment", {Kind::text, 0, false, 1e300, "registered experiment name"}},
        {"out", {Kind::text, 0, false, 1e300, "output directory"}},
        {"seeds", {Kind::seed_list, 0, false, 1e300, "comma-separated run seeds"}},
        {"data_seed", {Kind::integer, 0, false, 1e300, "dataset seed"}},
        {"n", {Kind::integer, 1, false, 1e6, "number of data points"}},
        {"d", {Kind::integer, 2, false, 1e6, "input dimension"}},
        {"C", {Kind::real, 0, true, 1e300, "label bound"}},
        {"m", {Kind::integer, 1, false, 1e8, "hidden width"}},
        {"widths", {Kind::integer_list, 1, false, 1e8, "hidden widths to sweep"}},
        {"eta", {Kind::real_or_auto, 0, true, 1e300, "gradient step size or auto (lambda0 / n^2)"}},
        {"steps", {Kind::integer, 0, false, 1e9, "gradient steps"}},
        {"record_every", {Kind::integer, 1, false, 1e9, "steps between recorded states"}},
        {"horizon", {Kind::real, 0, true, 1e300, "flow horizon in units of 1 / lambda0"}},
        {"h", {Kind::real_or_auto, 0, true, 1e300, "RK4 step or auto (0.05 / lambda0)"}},
        {"slack", {Kind::real, 0, true, 1e300, "multiplicative slack on the envelope"}},
        {"target_loss", {Kind::real, 0, true, 1e300, "stop once loss falls to this value"}},
        {"milestone_loss", {Kind::real, 0, true, 1e300, "loss level whose first crossing is reported"}},
        {"dims", {Kind::integer_list, 1, false, 1e6, "layer widths d_0,...,d_H"}},
        {"samples", {Kind::integer, 1, false, 1e7, "regression sample count"}},
        {"n_inits", {Kind::integer, 1, false, 1e6, "initializations per seed"}},
        {"max_steps", {Kind::integer, 1, false, 1e9, "gradient step cap"}},
        {"grad_tol", {Kind::real, 0, true, 1e300, "gradient-norm stop"}},
        {"rel_tol", {Kind::real, 0, true, 1, "relative tolerance"}},
        {"trials", {Kind::integer, 1, false, 1e9, "random trials"}},
        {"d1", {Kind::integer, 1, false, 1e6, "hidden width of the sigmoid layer"}},
        {"fit_tol", {Kind::real, 0, true, 1, "relative residual threshold for the zero-loss fit"}},
    };
    return specs;
}

using Defaults = std::map<std::string, std::string>;

const std::map<std::string, Defaults>& experiment_defaults() {
    static const std::map<std::string, Defaults> defaults = {
        {"convergence-envelope",
         {{"data_seed", "0"}, {"n", "10"}, {"d", "5"}, {"C", "1"}, {"m", "1000"}, {"horizon", "20"},
          {"h", "auto"}, {"record_every", "10"}, {"slack", "1"}}},
        {"lambda-floor",
         {{"data_seed", "0"}, {"n", "10"}, {"d", "5"}, {"C", "1"}, {"widths", "100,1000"}, {"horizon", "20"},
          {"h", "auto"}, {"record_every", "10"}}},
        {"gram-concentration",
         {{"data_seed", "0"}, {"n", "10"}, {"d", "5"}, {"C", "1"}, {"widths", "100,1000,10000"}}},
        {"width-sweep",
         {{"data_seed", "0"}, {"n", "16"}, {"d", "5"}, {"C", "1"}, {"widths", "100,400,1600,6400"},
          {"eta", "0.5"}, {"steps", "100000"}, {"record_every", "50"}, {"target_loss", "1e-6"},
          {"milestone_loss", "1e-3"}}},
        {"gradient-decay",
         {{"data_seed", "0"}, {"n", "10"}, {"d", "5"}, {"C", "1"}, {"m", "200"}, {"eta", "0.5"},
          {"steps", "100"}, {"record_every", "1"}}},
        {"hessian-psd", {{"data_seed", "0"}, {"n", "10"}, {"d", "4"}, {"C", "1"}, {"m", "50"}}},
        {"linear-landscape",
         {{"dims", "3,2,2,3"}, {"samples", "20"}, {"n_inits", "50"}, {"eta", "0.1"}, {"max_steps", "1000000"},
          {"grad_tol", "1e-10"}, {"rel_tol", "1e-4"}}},
        {"sigmoid-rank", {{"n", "20"}, {"d", "5"}, {"d1", "20"}, {"trials", "1000"}}},
        {"topfit-zeroloss", {{"n", "20"}, {"d", "5"}, {"C", "1"}, {"d1", "20"}, {"fit_tol", "1e-10"}}},
    };
    return defaults;
}

std::string default_out_dir() {
    if (const char* env = std::getenv(kOutEnvVar); env != nullptr && *env != '\0') {
        return env;
    }
    return "ovlab-out";
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return "";
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> parts;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        parts.push_back(trim(item));
    }
    return parts;
}

long parse_long(const std::string& key, const std::string& s) {
    long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError("config key '" + key + "': '" + s + "' is not an integer");
    }
    return v;
}

double parse_real(const std::string& key, const std::string& s) {
    double v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError("config key '" + key + "': '" + s + "' is not a number");
    }
    return v;
}

void check_range(const std::string& key, const KeySpec& spec, double v) {
    const bool low_ok = spec.strict ? v > spec.min : v >= spec.min;
    if (!low_ok || v > spec.max || !std::isfinite(v)) {
        std::ostringstream msg;
        msg << "config key '" << key << "': value " << v << " out of range (" << (spec.strict ? "> " : ">= ")
            << spec.min;
        if (spec.max < 1e300) {
            msg << ", <= " << spec.max;
        }
        msg << ")";
        throw ConfigError(msg.str());
    }
}

void validate_value(const std::string& key, const std::string& value) {
    const auto& spec = key_specs().at(key);
    switch (spec.kind) {
    case Kind::text:
        if (value.empty()) {
            throw ConfigError("config key '" + key + "' is empty");
        }
        break;
    case Kind::integer:
        check_range(key, spec, static_cast<double>(parse_long(key, value)));
        break;
    case Kind::real:
        check_range(key, spec, parse_real(key, value));
        break;
    case Kind::real_or_auto:
        if (value != "auto") {
            check_range(key, spec, parse_real(key, value));
        }
        break;
    case Kind::integer_list:
    case Kind::seed_list: {
        const auto parts = split_list(value);
        if (parts.empty()) {
            throw ConfigError("config key '" + key + "' must not be empty");
        }
        for (const auto& p : parts) {
            if (spec.kind == Kind::seed_list) {
                std::uint64_t s = 0;
                const auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), s);
                if (ec != std::errc() || ptr != p.data() + p.size()) {
                    throw ConfigError("config key '" + key + "': '" + p + "' is not a seed");
                }
            } else {
                check_range(key, spec, static_cast<double>(parse_long(key, p)));
            }
        }
        break;
    }
    }
}

} // namespace

const std::vector<ExperimentInfo>& list_experiments() {
    static const std::vector<ExperimentInfo> catalog = {
        {"convergence-envelope", "residual envelope ||u(t)-y||^2 <= exp(-lambda0 t) ||u(0)-y||^2 under gradient flow",
         "RK4 gradient flow of a wide ReLU net; fraction of seeds staying inside the envelope"},
        {"lambda-floor", "eigenvalue floor lambda_min(H(t)) >= lambda0/2 along the flow",
         "pass-rate of the floor across seeds for each width"},
        {"gram-concentration", "Hoeffding concentration of H(0) around H_inf",
         "||H(0) - H_inf||_2 against width; expected O(1/sqrt(m)) decay"},
        {"width-sweep", "wider networks optimize faster and reach a global minimum",
         "gradient descent iterations to a loss level for each width"},
        {"gradient-decay", "max_r ||dL/dw_r|| <= sqrt(n/m) ||u - y||",
         "deterministic gradient-norm chain checked on every recorded state"},
        {"hessian-psd", "Gauss-Newton Hessian is a sum of Gram matrices, hence PSD",
         "smallest Hessian eigenvalue of random nets"},
        {"linear-landscape", "every local minimum of a deep linear net is global",
         "gradient descent endpoints against the rank-constrained optimum"},
        {"sigmoid-rank", "rank-deficient sigmoid features occur on a Lebesgue-null set of weights",
         "fraction of Gaussian first layers with full-rank features"},
        {"topfit-zeroloss", "full-rank wide features let the linear top layer fit any labels",
         "least-squares top layer residual on full-rank features"},
    };
    return catalog;
}

const std::string& ExperimentConfig::text(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        throw ConfigError("config key '" + key + "' is not set for experiment " + experiment_);
    }
    return it->second;
}

long ExperimentConfig::integer(const std::string& key) const { return parse_long(key, text(key)); }

double ExperimentConfig::real(const std::string& key) const { return parse_real(key, text(key)); }

std::optional<double> ExperimentConfig::real_or_auto(const std::string& key) const {
    const auto& v = text(key);
    if (v == "auto") {
        return std::nullopt;
    }
    return parse_real(key, v);
}

std::vector<long> ExperimentConfig::integers(const std::string& key) const {
    std::vector<long> out;
    for (const auto& p : split_list(text(key))) {
        out.push_back(parse_long(key, p));
    }
    return out;
}

std::vector<std::uint64_t> ExperimentConfig::seeds() const {
    std::vector<std::uint64_t> out;
    for (const auto& p : split_list(text("seeds"))) {
        std::uint64_t s = 0;
        std::from_chars(p.data(), p.data() + p.size(), s);
        out.push_back(s);
    }
    return out;
}

nlohmann::ordered_json ExperimentConfig::echo() const {
    nlohmann::ordered_json j;
    j["experiment"] = experiment_;
    nlohmann::ordered_json values;
    for (const auto& [k, v] : values_) {
        values[k] = v;
    }
    j["values"] = values;
    nlohmann::ordered_json sources;
    for (const auto& [k, v] : sources_) {
        sources[k] = v;
    }
    j["sources"] = sources;
    return j;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> values;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        }
        if (!values.emplace(key, value).second) {
            throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
    }
    return values;
}

ExperimentConfig resolve_config(const std::map<std::string, std::string>& file_values,
                                const std::map<std::string, std::string>& flag_values) {
    std::string name;
    if (auto it = flag_values.find("experiment"); it != flag_values.end()) {
        name = it->second;
    } else if (auto it2 = file_values.find("experiment"); it2 != file_values.end()) {
        name = it2->second;
    }
    if (name.empty()) {
        throw ConfigError("no experiment given");
    }
    const auto& all_defaults = experiment_defaults();
    const auto defaults_it = all_defaults.find(name);
    if (defaults_it == all_defaults.end()) {
        throw ConfigError("unknown experiment '" + name + "' (see `ovlab list`)");
    }

    ExperimentConfig cfg;
    cfg.experiment_ = name;
    std::set<std::string> allowed = {"experiment", "out", "seeds"};
    for (const auto& [k, v] : defaults_it->second) {
        allowed.insert(k);
        cfg.values_[k] = v;
        cfg.sources_[k] = "default";
    }
    cfg.values_["experiment"] = name;
    cfg.values_["out"] = default_out_dir();
    cfg.values_["seeds"] = "0";
    cfg.sources_["experiment"] = flag_values.count("experiment") ? "flag" : "file";
    cfg.sources_["out"] = "default";
    cfg.sources_["seeds"] = "default";

    auto apply = [&](const std::map<std::string, std::string>& src, const std::string& label) {
        for (const auto& [k, v] : src) {
            if (!key_specs().count(k)) {
                throw ConfigError("unknown config key '" + k + "'");
            }
            if (!allowed.count(k)) {
                throw ConfigError("config key '" + k + "' is not used by experiment " + name);
            }
            if (k == "experiment") {
                continue;
            }
            cfg.values_[k] = v;
            cfg.sources_[k] = label;
        }
    };
    apply(file_values, "file");
    apply(flag_values, "flag");

    for (const auto& [k, v] : cfg.values_) {
        validate_value(k, v);
    }
    return cfg;
}

ExperimentConfig parse_config(const std::optional<std::filesystem::path>& file,
                              const std::map<std::string, std::string>& flag_values) {
    std::map<std::string, std::string> file_values;
    if (file) {
        std::string text;
        try {
            text = read_text(*file);
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
        file_values = parse_config_text(text);
    }
    return resolve_config(file_values, flag_values);
}

} // namespace ovlab
