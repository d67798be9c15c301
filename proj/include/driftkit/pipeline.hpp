#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "driftkit/data.hpp"
#include "driftkit/divergence.hpp"
#include "driftkit/model.hpp"
#include "driftkit/testing.hpp"

namespace driftkit {

inline constexpr const char* kVersion = "0.1.0";

/// Everything one detection run needs. Paths may stay empty when samples
/// are passed in memory.
struct RunConfig {
    std::string source_path;
    std::string target_path;
    std::string label_column = "y";
    Task task = Task::kClassification;
    double test_fraction = 0.1;
    int B = 100;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    int num_bins = 10;
    double l2 = 1e-4;
    double noise_variance = 1e-10;
    bool reduce_joint_dim = false;
    /// Hypotheses to test; canonicalized to the order D, F, R, C1, C2.
    std::vector<Hypothesis> hypotheses = {Hypothesis::kTotalD, Hypothesis::kFeatureF,
                                          Hypothesis::kResponseR, Hypothesis::kCond1,
                                          Hypothesis::kCond2};
};

/// Result (or error) of one hypothesis test within a run.
struct HypothesisResult {
    Hypothesis hypothesis = Hypothesis::kTotalD;
    bool ok = true;
    double kl = 0.0;
    double p_value = 1.0;
    bool reject = false;
    std::string error;  // set when !ok
};

struct Diagnostics {
    std::size_t n_train_source = 0;
    std::size_t n_train_target = 0;
    std::size_t n_test_source = 0;
    std::size_t n_test_target = 0;
    /// Mean cross-entropy of each origin classifier on the test set,
    /// keyed by view name (joint, x, y).
    std::vector<std::pair<std::string, double>> validation_ce;
    /// Fraction of target test rows with clipped classifier output, per view.
    std::vector<std::pair<std::string, double>> saturation;
    std::string conditional_model = "none";  // none | fitted | fixed
    std::vector<std::string> warnings;
};

struct ShiftReport {
    std::string version = kVersion;
    RunConfig config;
    KLEstimates estimates;
    std::vector<HypothesisResult> tests;
    Diagnostics diagnostics;
};

/// Full detection run on in-memory samples. A fixed conditional model (for
/// Cond2) overrides the fitted one when provided. Throws on stage
/// failures; inapplicable hypotheses become error entries instead.
ShiftReport run_on_samples(const std::vector<LabeledSample>& source,
                           const std::vector<LabeledSample>& target, const RunConfig& config,
                           const ConditionalModel* fixed_conditional = nullptr);

/// Loads the configured CSV files and runs on them.
ShiftReport run(const RunConfig& config);

nlohmann::ordered_json to_json(const ShiftReport& report);
ShiftReport report_from_json(const nlohmann::ordered_json& j);

/// Writes the JSON report with stable field order and exact round-trip
/// floating-point values.
void write_report(const ShiftReport& report, const std::string& path);

/// Plain-text table: one row per hypothesis in the order D, F, R, C1, C2.
std::string render_summary(const ShiftReport& report);

}  // namespace driftkit
