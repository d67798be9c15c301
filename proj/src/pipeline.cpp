#include "driftkit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "driftkit/errors.hpp"
#include "driftkit/ratio.hpp"

namespace driftkit {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr Hypothesis kCanonicalOrder[] = {Hypothesis::kTotalD, Hypothesis::kFeatureF,
                                          Hypothesis::kResponseR, Hypothesis::kCond1,
                                          Hypothesis::kCond2};

// Substream layout of the master seed. Hypotheses keep fixed indices so a
// restricted run reproduces the p-values of a full one.
constexpr std::uint64_t kSplitStream = 0;
std::uint64_t hypothesis_stream(Hypothesis h) {
    return 1 + static_cast<std::uint64_t>(h);
}

void validate(const RunConfig& config) {
    if (!(config.test_fraction > 0.0 && config.test_fraction < 1.0)) {
        throw ConfigError("test_fraction must lie in (0, 1)");
    }
    if (config.B < 1) {
        throw ConfigError("B must be >= 1");
    }
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) {
        throw ConfigError("alpha must lie in (0, 1)");
    }
    if (config.num_bins < 2) {
        throw ConfigError("num_bins must be >= 2");
    }
    if (config.l2 < 0.0) {
        throw ConfigError("l2 must be >= 0");
    }
    if (!(config.noise_variance > 0.0)) {
        throw ConfigError("noise_variance must be positive");
    }
    if (config.hypotheses.empty()) {
        throw ConfigError("at least one hypothesis must be requested");
    }
}

std::vector<Hypothesis> canonical_hypotheses(const std::vector<Hypothesis>& requested) {
    std::vector<Hypothesis> out;
    for (Hypothesis h : kCanonicalOrder) {
        if (std::find(requested.begin(), requested.end(), h) != requested.end()) {
            out.push_back(h);
        }
    }
    return out;
}

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(name) + ": " + e.what());
    } catch (const UsageError& e) {
        throw UsageError(std::string(name) + ": " + e.what());
    } catch (const FitError& e) {
        throw FitError(std::string(name) + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(std::string(name) + ": " + e.what());
    }
}

double estimate_for(Hypothesis h, const KLEstimates& est) {
    switch (h) {
        case Hypothesis::kTotalD: return est.kl_joint;
        case Hypothesis::kFeatureF: return est.kl_x;
        case Hypothesis::kResponseR: return est.kl_y;
        case Hypothesis::kCond1: return est.kl_x_given_y;
        case Hypothesis::kCond2: return est.kl_y_given_x;
    }
    return 0.0;
}

}  // namespace

ShiftReport run_on_samples(const std::vector<LabeledSample>& source,
                           const std::vector<LabeledSample>& target, const RunConfig& config,
                           const ConditionalModel* fixed_conditional) {
    validate(config);

    ShiftReport report;
    report.config = config;
    report.config.hypotheses = canonical_hypotheses(config.hypotheses);

    Rng master(config.seed);
    const SplitDatasets split = stage("split", [&] {
        return augment_and_split(source, target, config.task, config.test_fraction,
                                 master.substream(kSplitStream).seed());
    });

    const DivergenceConfig div_config{config.l2, config.reduce_joint_dim};
    const RatioModelSet models =
        stage("fit", [&] { return fit_ratio_models(split.train, div_config); });
    report.estimates =
        stage("estimate", [&] { return compute_estimates(models, split.test); });

    auto& diag = report.diagnostics;
    diag.n_train_source = split.n_tr_1;
    diag.n_train_target = split.n_tr_2;
    diag.n_test_source = split.test.count_origin(1);
    diag.n_test_target = split.test.count_origin(2);

    const auto add_view_diagnostics = [&](const std::string& name, const RatioModel& model) {
        diag.validation_ce.emplace_back(name, ratio_validation_ce(model, split.test));
        const double sat = saturation_rate(model, split.test);
        diag.saturation.emplace_back(name, sat);
        if (!model.classifier.fit_info().converged) {
            diag.warnings.push_back("the " + name + " origin classifier did not converge in " +
                                    std::to_string(model.classifier.fit_info().iterations) +
                                    " iterations");
        }
        if (sat > 0.0) {
            std::ostringstream msg;
            msg << "the " << name << " origin classifier saturated on "
                << std::setprecision(3) << 100.0 * sat << "% of target test rows";
            diag.warnings.push_back(msg.str());
        }
    };
    add_view_diagnostics("joint", models.joint);
    add_view_diagnostics("x", models.x_only);
    if (models.y_only.has_value()) {
        add_view_diagnostics("y", *models.y_only);
    }

    // A plug-in term carried by only a handful of source rows is exact but
    // fragile; surface it.
    if (report.estimates.y_estimator == YEstimator::kPlugin) {
        for (const auto& term : plugin_kl_terms(split.test.labels_of_origin(1),
                                                split.test.labels_of_origin(2))) {
            if (term.source_count <= 5 || std::abs(term.contribution) >= 0.5) {
                std::ostringstream msg;
                msg << "plug-in KL term for label " << term.label << " contributes "
                    << std::setprecision(4) << term.contribution << " from only "
                    << term.source_count << " source test rows";
                diag.warnings.push_back(msg.str());
            }
        }
    }

    // Cond2 prerequisites.
    const std::vector<Hypothesis> requested = report.config.hypotheses;
    const bool wants_c2 =
        std::find(requested.begin(), requested.end(), Hypothesis::kCond2) != requested.end();
    std::optional<ConditionalModel> conditional;
    std::string conditional_error;
    if (wants_c2) {
        if (fixed_conditional != nullptr) {
            conditional = *fixed_conditional;
            diag.conditional_model = "fixed";
        } else {
            try {
                conditional = fit_conditional(split.train, config.task, config.l2);
                diag.conditional_model = "fitted";
                if (conditional->fallback()) {
                    diag.warnings.push_back(
                        "degenerate regression design; the conditional model fell back "
                        "to an intercept-only fit");
                }
            } catch (const Error& e) {
                conditional_error = e.what();
            }
        }
    }

    // Cond1 prerequisites: continuous labels are binned for the local
    // permutation only; the statistic stays on the unbinned models.
    const bool wants_c1 =
        std::find(requested.begin(), requested.end(), Hypothesis::kCond1) != requested.end();
    std::optional<BinningRule> binning;
    std::string binning_error;
    if (wants_c1 && config.task == Task::kRegression) {
        std::vector<double> test_labels;
        test_labels.reserve(split.test.size());
        for (const auto& row : split.test.rows) {
            test_labels.push_back(row.sample.label);
        }
        try {
            binning = make_binning(test_labels, config.num_bins);
        } catch (const Error& e) {
            binning_error = e.what();
        }
    }

    for (Hypothesis h : requested) {
        HypothesisResult entry;
        entry.hypothesis = h;
        if (h == Hypothesis::kCond2 && !conditional.has_value()) {
            entry.ok = false;
            entry.error = conditional_error.empty() ? "no conditional model available"
                                                    : conditional_error;
            report.tests.push_back(std::move(entry));
            continue;
        }
        if (h == Hypothesis::kCond1 && config.task == Task::kRegression &&
            !binning.has_value()) {
            entry.ok = false;
            entry.error = binning_error.empty() ? "no binning rule available" : binning_error;
            report.tests.push_back(std::move(entry));
            continue;
        }
        try {
            const TestResult result =
                p_value(make_statistic(h, models), split.test, h, config.B,
                        config.noise_variance, master.substream(hypothesis_stream(h)),
                        conditional.has_value() ? &*conditional : nullptr, binning);
            entry.kl = result.statistic;
            entry.p_value = result.p_value;
            entry.reject = result.p_value <= config.alpha;
        } catch (const Error& e) {
            entry.ok = false;
            entry.error = e.what();
        }
        report.tests.push_back(std::move(entry));
    }

    // The per-hypothesis statistic is the matching KL estimate by
    // construction; keep the emitted numbers coherent.
    for (const auto& entry : report.tests) {
        if (entry.ok && entry.kl != estimate_for(entry.hypothesis, report.estimates)) {
            throw UsageError("internal: test statistic diverged from the KL estimate");
        }
    }
    return report;
}

ShiftReport run(const RunConfig& config) {
    validate(config);
    CsvLoader loader(config.label_column, config.task);
    const auto samples = stage("ingest", [&] {
        loader.scan(config.source_path);
        loader.scan(config.target_path);
        return std::pair{loader.load(config.source_path), loader.load(config.target_path)};
    });
    return run_on_samples(samples.first, samples.second, config);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

ordered_json config_to_json(const RunConfig& config) {
    ordered_json j;
    j["source"] = config.source_path;
    j["target"] = config.target_path;
    j["label_column"] = config.label_column;
    j["task"] = to_string(config.task);
    j["test_fraction"] = config.test_fraction;
    j["B"] = config.B;
    j["alpha"] = config.alpha;
    j["seed"] = config.seed;
    j["num_bins"] = config.num_bins;
    j["l2"] = config.l2;
    j["noise_variance"] = config.noise_variance;
    j["reduce_joint_dim"] = config.reduce_joint_dim;
    ordered_json hyps = ordered_json::array();
    for (Hypothesis h : config.hypotheses) {
        hyps.push_back(to_string(h));
    }
    j["hypotheses"] = std::move(hyps);
    return j;
}

RunConfig config_from_json(const ordered_json& j) {
    RunConfig config;
    config.source_path = j.at("source").get<std::string>();
    config.target_path = j.at("target").get<std::string>();
    config.label_column = j.at("label_column").get<std::string>();
    config.task = task_from_string(j.at("task").get<std::string>());
    config.test_fraction = j.at("test_fraction").get<double>();
    config.B = j.at("B").get<int>();
    config.alpha = j.at("alpha").get<double>();
    config.seed = j.at("seed").get<std::uint64_t>();
    config.num_bins = j.at("num_bins").get<int>();
    config.l2 = j.at("l2").get<double>();
    config.noise_variance = j.at("noise_variance").get<double>();
    config.reduce_joint_dim = j.at("reduce_joint_dim").get<bool>();
    config.hypotheses.clear();
    for (const auto& name : j.at("hypotheses")) {
        config.hypotheses.push_back(hypothesis_from_string(name.get<std::string>()));
    }
    return config;
}

ordered_json pairs_to_json(const std::vector<std::pair<std::string, double>>& pairs) {
    ordered_json j;
    for (const auto& [key, value] : pairs) {
        j[key] = value;
    }
    return j;
}

std::vector<std::pair<std::string, double>> pairs_from_json(const ordered_json& j) {
    std::vector<std::pair<std::string, double>> pairs;
    for (const auto& [key, value] : j.items()) {
        pairs.emplace_back(key, value.get<double>());
    }
    return pairs;
}

}  // namespace

ordered_json to_json(const ShiftReport& report) {
    ordered_json j;
    j["version"] = report.version;
    j["config"] = config_to_json(report.config);

    ordered_json est;
    est["kl_joint"] = report.estimates.kl_joint;
    est["kl_x"] = report.estimates.kl_x;
    est["kl_y"] = report.estimates.kl_y;
    est["kl_x_given_y"] = report.estimates.kl_x_given_y;
    est["kl_y_given_x"] = report.estimates.kl_y_given_x;
    est["y_estimator"] =
        report.estimates.y_estimator == YEstimator::kPlugin ? "plugin" : "classifier";
    j["estimates"] = std::move(est);

    ordered_json tests = ordered_json::array();
    for (const auto& entry : report.tests) {
        ordered_json t;
        t["hypothesis"] = to_string(entry.hypothesis);
        if (entry.ok) {
            t["kl"] = entry.kl;
            t["p_value"] = entry.p_value;
            t["reject"] = entry.reject;
        } else {
            t["error"] = entry.error;
        }
        tests.push_back(std::move(t));
    }
    j["tests"] = std::move(tests);

    ordered_json diag;
    diag["n_train_source"] = report.diagnostics.n_train_source;
    diag["n_train_target"] = report.diagnostics.n_train_target;
    diag["n_test_source"] = report.diagnostics.n_test_source;
    diag["n_test_target"] = report.diagnostics.n_test_target;
    diag["validation_cross_entropy"] = pairs_to_json(report.diagnostics.validation_ce);
    diag["saturation_rate"] = pairs_to_json(report.diagnostics.saturation);
    diag["conditional_model"] = report.diagnostics.conditional_model;
    diag["warnings"] = report.diagnostics.warnings;
    j["diagnostics"] = std::move(diag);
    return j;
}

ShiftReport report_from_json(const ordered_json& j) {
    ShiftReport report;
    report.version = j.at("version").get<std::string>();
    report.config = config_from_json(j.at("config"));

    const auto& est = j.at("estimates");
    report.estimates.kl_joint = est.at("kl_joint").get<double>();
    report.estimates.kl_x = est.at("kl_x").get<double>();
    report.estimates.kl_y = est.at("kl_y").get<double>();
    report.estimates.kl_x_given_y = est.at("kl_x_given_y").get<double>();
    report.estimates.kl_y_given_x = est.at("kl_y_given_x").get<double>();
    report.estimates.y_estimator = est.at("y_estimator").get<std::string>() == "plugin"
                                       ? YEstimator::kPlugin
                                       : YEstimator::kClassifier;

    for (const auto& t : j.at("tests")) {
        HypothesisResult entry;
        entry.hypothesis = hypothesis_from_string(t.at("hypothesis").get<std::string>());
        if (t.contains("error")) {
            entry.ok = false;
            entry.error = t.at("error").get<std::string>();
        } else {
            entry.kl = t.at("kl").get<double>();
            entry.p_value = t.at("p_value").get<double>();
            entry.reject = t.at("reject").get<bool>();
        }
        report.tests.push_back(std::move(entry));
    }

    const auto& diag = j.at("diagnostics");
    report.diagnostics.n_train_source = diag.at("n_train_source").get<std::size_t>();
    report.diagnostics.n_train_target = diag.at("n_train_target").get<std::size_t>();
    report.diagnostics.n_test_source = diag.at("n_test_source").get<std::size_t>();
    report.diagnostics.n_test_target = diag.at("n_test_target").get<std::size_t>();
    report.diagnostics.validation_ce = pairs_from_json(diag.at("validation_cross_entropy"));
    report.diagnostics.saturation = pairs_from_json(diag.at("saturation_rate"));
    report.diagnostics.conditional_model = diag.at("conditional_model").get<std::string>();
    report.diagnostics.warnings =
        diag.at("warnings").get<std::vector<std::string>>();
    return report;
}

void write_report(const ShiftReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write '" + path + "'");
    }
    out << to_json(report).dump(2) << '\n';
    if (!out) {
        throw DataError("error while writing '" + path + "'");
    }
}

std::string render_summary(const ShiftReport& report) {
    std::ostringstream out;
    out << std::left << std::setw(12) << "hypothesis" << std::setw(16) << "kl"
        << std::setw(12) << "p_value" << "decision\n";
    for (const auto& entry : report.tests) {
        out << std::left << std::setw(12) << to_string(entry.hypothesis);
        if (!entry.ok) {
            out << "error: " << entry.error << '\n';
            continue;
        }
        out << std::setw(16) << std::setprecision(6) << entry.kl << std::setw(12)
            << std::setprecision(6) << entry.p_value
            << (entry.reject ? "reject" : "keep") << '\n';
    }
    return out.str();
}

}  // namespace driftkit
