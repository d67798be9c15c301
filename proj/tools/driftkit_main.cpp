#include <CLI11.hpp>
#include <fstream>
#include <functional>
#include <cstdio>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "driftkit/errors.hpp"
#include "driftkit/pipeline.hpp"
#include "driftkit/synth.hpp"

namespace {

using driftkit::Hypothesis;
using driftkit::Task;

std::vector<Hypothesis> parse_shifts(const std::string& csv) {
    std::vector<Hypothesis> out;
    std::string token;
    std::stringstream ss(csv);
    while (std::getline(ss, token, ',')) {
        if (!token.empty()) {
            out.push_back(driftkit::hypothesis_from_string(token));
        }
    }
    if (out.empty()) {
        throw driftkit::ConfigError("--shifts must name at least one hypothesis");
    }
    return out;
}

std::map<std::string, double> parse_params(const std::string& csv) {
    std::map<std::string, double> out;
    if (csv.empty()) return out;
    std::string token;
    std::stringstream ss(csv);
    while (std::getline(ss, token, ',')) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) {
            throw driftkit::ConfigError("--params entries must look like name=value, got '" +
                                        token + "'");
        }
        try {
            out[token.substr(0, eq)] = std::stod(token.substr(eq + 1));
        } catch (const std::exception&) {
            throw driftkit::ConfigError("bad numeric value in --params entry '" + token + "'");
        }
    }
    return out;
}

double take_param(std::map<std::string, double>& params, const std::string& name,
                  double fallback) {
    const auto it = params.find(name);
    if (it == params.end()) return fallback;
    const double value = it->second;
    params.erase(it);
    return value;
}

void reject_leftovers(const std::map<std::string, double>& params, int experiment) {
    if (params.empty()) return;
    std::string names;
    for (const auto& [key, _] : params) {
        if (!names.empty()) names += ", ";
        names += key;
    }
    throw driftkit::ConfigError("unknown parameter(s) for experiment " +
                                std::to_string(experiment) + ": " + names);
}

bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw driftkit::ConfigError("config key '" + key + "' expects true/false, got '" +
                                value + "'");
}

// key=value lines, one per line; '#' starts a comment. Keys match the run
// flags without the leading dashes. Values apply only where the command
// line did not set the flag.
void apply_config_file(const std::string& path, const CLI::App& run_cmd,
                       const std::map<std::string, std::function<void(const std::string&)>>&
                           setters) {
    std::ifstream in(path);
    if (!in) {
        throw driftkit::ConfigError("cannot open config file '" + path + "'");
    }
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\r')) line.pop_back();
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw driftkit::ConfigError("config line " + std::to_string(lineno) +
                                        " is not key=value: '" + line + "'");
        }
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        const auto it = setters.find(key);
        if (it == setters.end()) {
            throw driftkit::ConfigError("unknown config key '" + key + "'");
        }
        if (run_cmd.count("--" + key) > 0) {
            continue;  // the command line wins
        }
        it->second(value);
    }
}

struct SynthArgs {
    int experiment = 1;
    std::string params;
    std::size_t n = 2500;
    std::uint64_t seed = 0;
    std::string out_prefix;
};

void run_synth(const SynthArgs& args) {
    driftkit::Rng rng(args.seed);
    Task task = Task::kClassification;
    std::vector<driftkit::LabeledSample> source, target;
    auto params = parse_params(args.params);
    if (args.experiment == 1) {
        driftkit::Experiment1Params p;
        p.delta = take_param(params, "delta", 0.0);
        p.gamma = take_param(params, "gamma", 0.0);
        p.d = static_cast<int>(take_param(params, "d", 3));
        p.n = args.n;
        reject_leftovers(params, 1);
        driftkit::Rng src = rng.substream(0), tgt = rng.substream(1);
        source = gen_experiment1(p, 1, src);
        target = gen_experiment1(p, 2, tgt);
        task = Task::kClassification;
    } else {
        driftkit::Experiment2Params p;
        p.lambda = take_param(params, "lambda", 0.0);
        p.theta = take_param(params, "theta", 0.0);
        p.pad_dims = static_cast<int>(take_param(params, "pad_dims", 0));
        p.n = args.n;
        reject_leftovers(params, 2);
        driftkit::Rng src = rng.substream(0), tgt = rng.substream(1);
        source = gen_experiment2(p, 1, src);
        target = gen_experiment2(p, 2, tgt);
        task = Task::kRegression;
    }
    driftkit::write_csv(args.out_prefix + "source.csv", source, task);
    driftkit::write_csv(args.out_prefix + "target.csv", target, task);
    std::cout << "wrote " << args.out_prefix << "source.csv and " << args.out_prefix
              << "target.csv (" << source.size() << " rows each, task "
              << driftkit::to_string(task) << ")\n";
}

struct PowerArgs {
    int experiment = 1;
    std::string hypothesis = "F";
    int n_mc = 100;
    std::string params;
    std::size_t n = 500;
    int grid = 0;
    std::uint64_t seed = 0;
    int B = 100;
    double alpha = 0.05;
    double test_fraction = 0.5;
    double l2 = 1e-4;
    int num_bins = 10;
    bool fix_conditional = false;
    int threads = 1;
};

void print_power_line(int experiment, Hypothesis h,
                      const std::map<std::string, double>& point,
                      const driftkit::PowerEstimate& estimate) {
    nlohmann::ordered_json j;
    j["experiment"] = experiment;
    j["hypothesis"] = driftkit::to_string(h);
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    for (const auto& [key, value] : point) {
        params[key] = value;
    }
    j["params"] = std::move(params);
    j["power"] = estimate.power;
    j["se"] = estimate.standard_error;
    j["n_mc"] = estimate.n_mc;
    std::cout << j.dump() << std::endl;
}

void run_power(const PowerArgs& args) {
    const Hypothesis h = driftkit::hypothesis_from_string(args.hypothesis);
    driftkit::PowerConfig config;
    config.B = args.B;
    config.alpha = args.alpha;
    config.test_fraction = args.test_fraction;
    config.l2 = args.l2;
    config.num_bins = args.num_bins;
    config.fix_true_conditional = args.fix_conditional;
    config.threads = args.threads;
    const driftkit::Rng rng(args.seed);

    // Grid sweeps cover (delta, gamma) or (lambda, theta); a single point
    // comes from --params. The delta axis stays inside the open interval
    // required by the Bernoulli mean.
    std::vector<std::map<std::string, double>> points;
    auto base = parse_params(args.params);
    if (args.grid > 0) {
        const double axis1_max = args.experiment == 1 ? 0.4 : 1.0;
        const double axis2_max = args.experiment == 1 ? 0.5 : 1.0;
        const char* axis1 = args.experiment == 1 ? "delta" : "lambda";
        const char* axis2 = args.experiment == 1 ? "gamma" : "theta";
        for (int i = 0; i < args.grid; ++i) {
            for (int j = 0; j < args.grid; ++j) {
                auto point = base;
                const double t1 = args.grid == 1 ? 0.0 : -1.0 + 2.0 * i / (args.grid - 1);
                const double t2 = args.grid == 1 ? 0.0 : -1.0 + 2.0 * j / (args.grid - 1);
                point[axis1] = t1 * axis1_max;
                point[axis2] = t2 * axis2_max;
                points.push_back(std::move(point));
            }
        }
    } else {
        points.push_back(base);
    }

    for (const auto& point : points) {
        auto params = point;
        driftkit::PowerEstimate estimate;
        if (args.experiment == 1) {
            driftkit::Experiment1Params p;
            p.delta = take_param(params, "delta", 0.0);
            p.gamma = take_param(params, "gamma", 0.0);
            p.d = static_cast<int>(take_param(params, "d", 3));
            p.n = args.n;
            reject_leftovers(params, 1);
            estimate = estimate_power(p, h, args.n_mc, config, rng);
        } else {
            driftkit::Experiment2Params p;
            p.lambda = take_param(params, "lambda", 0.0);
            p.theta = take_param(params, "theta", 0.0);
            p.pad_dims = static_cast<int>(take_param(params, "pad_dims", 0));
            p.n = args.n;
            reject_leftovers(params, 2);
            estimate = estimate_power(p, h, args.n_mc, config, rng);
        }
        print_power_line(args.experiment, h, point, estimate);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"driftkit: quantify and test dataset shift between two samples"};
    app.require_subcommand(1);

    // --- run ---
    auto* run_cmd = app.add_subcommand("run", "Detect shifts between two CSV samples");
    driftkit::RunConfig config;
    std::string task_name = "classification";
    std::string shifts = "D,F,R,C1,C2";
    std::string out_path;
    std::string config_path;
    bool summary = false;
    run_cmd->add_option("--config", config_path,
                        "Config file with key=value lines (flags override it)");
    run_cmd->add_option("--source", config.source_path, "Source (population 1) CSV");
    run_cmd->add_option("--target", config.target_path, "Target (population 2) CSV");
    run_cmd->add_option("--label", config.label_column, "Label column name");
    run_cmd->add_option("--task", task_name, "classification or regression")
        ->check(CLI::IsMember({"classification", "regression"}));
    run_cmd->add_option("--test-frac", config.test_fraction, "Test fraction in (0,1)");
    run_cmd->add_option("--B", config.B, "Resampling replicates");
    run_cmd->add_option("--alpha", config.alpha, "Significance level");
    run_cmd->add_option("--seed", config.seed, "Master seed");
    run_cmd->add_option("--bins", config.num_bins, "Bins for the C1 test with continuous labels");
    run_cmd->add_option("--l2", config.l2, "L2 strength of the built-in classifiers");
    run_cmd->add_option("--nu", config.noise_variance, "Tie-break noise variance");
    run_cmd->add_flag("--reduce-joint-dim", config.reduce_joint_dim,
                      "Train the joint classifier on p(Z=2|X) instead of raw X");
    run_cmd->add_option("--shifts", shifts, "Comma list among D,F,R,C1,C2");
    run_cmd->add_option("--out", out_path, "Write the JSON report here");
    run_cmd->add_flag("--summary", summary, "Print a text summary table");

    // --- synth ---
    auto* synth_cmd = app.add_subcommand("synth", "Generate the synthetic benchmark CSVs");
    SynthArgs synth_args;
    synth_cmd->add_option("--experiment", synth_args.experiment, "1 or 2")
        ->check(CLI::IsMember({1, 2}))
        ->required();
    synth_cmd->add_option("--params", synth_args.params,
                          "Comma list: delta=,gamma=,d= (exp 1) or lambda=,theta=,pad_dims= (exp 2)");
    synth_cmd->add_option("--n", synth_args.n, "Samples per population");
    synth_cmd->add_option("--seed", synth_args.seed, "Seed");
    synth_cmd->add_option("--out-prefix", synth_args.out_prefix,
                          "Prefix for source.csv/target.csv")->required();

    // --- power ---
    auto* power_cmd = app.add_subcommand("power", "Monte Carlo power estimates (JSON lines)");
    PowerArgs power_args;
    power_cmd->add_option("--experiment", power_args.experiment, "1 or 2")
        ->check(CLI::IsMember({1, 2}))
        ->required();
    power_cmd->add_option("--hypothesis", power_args.hypothesis, "D,F,R,C1 or C2")->required();
    power_cmd->add_option("--mc", power_args.n_mc, "Monte Carlo repetitions");
    power_cmd->add_option("--params", power_args.params, "Fixed generator parameters");
    power_cmd->add_option("--n", power_args.n, "Samples per population per repetition");
    power_cmd->add_option("--grid", power_args.grid,
                          "Sweep a grid of this many points per shift axis");
    power_cmd->add_option("--seed", power_args.seed, "Seed");
    power_cmd->add_option("--B", power_args.B, "Resampling replicates");
    power_cmd->add_option("--alpha", power_args.alpha, "Significance level");
    power_cmd->add_option("--test-frac", power_args.test_fraction, "Test fraction");
    power_cmd->add_option("--l2", power_args.l2, "L2 strength");
    power_cmd->add_option("--bins", power_args.num_bins, "Bins for C1 with continuous labels");
    power_cmd->add_flag("--fix-conditional", power_args.fix_conditional,
                        "Use the known null conditional instead of fitting Q");
    power_cmd->add_option("--threads", power_args.threads, "Worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (run_cmd->parsed()) {
            if (!config_path.empty()) {
                const std::map<std::string, std::function<void(const std::string&)>> setters{
                    {"source", [&](const std::string& v) { config.source_path = v; }},
                    {"target", [&](const std::string& v) { config.target_path = v; }},
                    {"label", [&](const std::string& v) { config.label_column = v; }},
                    {"task", [&](const std::string& v) { task_name = v; }},
                    {"test-frac",
                     [&](const std::string& v) { config.test_fraction = std::stod(v); }},
                    {"B", [&](const std::string& v) { config.B = std::stoi(v); }},
                    {"alpha", [&](const std::string& v) { config.alpha = std::stod(v); }},
                    {"seed", [&](const std::string& v) { config.seed = std::stoull(v); }},
                    {"bins", [&](const std::string& v) { config.num_bins = std::stoi(v); }},
                    {"l2", [&](const std::string& v) { config.l2 = std::stod(v); }},
                    {"nu",
                     [&](const std::string& v) { config.noise_variance = std::stod(v); }},
                    {"reduce-joint-dim",
                     [&](const std::string& v) {
                         config.reduce_joint_dim = parse_bool(v, "reduce-joint-dim");
                     }},
                    {"shifts", [&](const std::string& v) { shifts = v; }},
                    {"out", [&](const std::string& v) { out_path = v; }},
                    {"summary",
                     [&](const std::string& v) { summary = parse_bool(v, "summary"); }},
                };
                apply_config_file(config_path, *run_cmd, setters);
            }
            for (const auto& [flag, value] :
                 {std::pair{"--source", &config.source_path},
                  {"--target", &config.target_path}, {"--label", &config.label_column}}) {
                if (value->empty()) {
                    throw driftkit::ConfigError(std::string(flag) +
                                                " is required (flag or config file)");
                }
            }
            config.task = driftkit::task_from_string(task_name);
            config.hypotheses = parse_shifts(shifts);
            const driftkit::ShiftReport report = driftkit::run(config);
            if (!out_path.empty()) {
                driftkit::write_report(report, out_path);
            }
            if (summary || out_path.empty()) {
                std::cout << driftkit::render_summary(report);
            }
        } else if (synth_cmd->parsed()) {
            run_synth(synth_args);
        } else if (power_cmd->parsed()) {
            run_power(power_args);
        }
    } catch (const driftkit::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const driftkit::UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const driftkit::DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
