#pragma once

#include <cstdint>
#include <vector>

#include "driftkit/data.hpp"
#include "driftkit/model.hpp"
#include "driftkit/pipeline.hpp"

namespace driftkit {

/// First synthetic process (classification): Y is Bernoulli, X|Y an
/// isotropic Gaussian around Y*1_d. delta shifts the label frequency of
/// the target population, gamma shifts its class-conditional means.
struct Experiment1Params {
    double delta = 0.0;
    double gamma = 0.0;
    int d = 3;
    std::size_t n = 2500;
};

/// Second synthetic process (regression): X standard normal, Y|X normal
/// around X. lambda shifts the target feature mean, theta the target
/// conditional mean. pad_dims appends independent standard normal columns
/// to both populations.
struct Experiment2Params {
    double lambda = 0.0;
    double theta = 0.0;
    int pad_dims = 0;
    std::size_t n = 2500;
};

/// Draws n samples from population 1 (source) or 2 (target). Population 1
/// ignores the shift parameters. Pad columns are drawn after all core
/// values, so the core data is unchanged when pad_dims varies.
std::vector<LabeledSample> gen_experiment1(const Experiment1Params& params, int population,
                                           Rng& rng);
std::vector<LabeledSample> gen_experiment2(const Experiment2Params& params, int population,
                                           Rng& rng);

/// The exact null conditionals of each process, for runs where Q_{Y|X} is
/// fixed rather than fitted.
ConditionalModel true_conditional_experiment1(int d);
ConditionalModel true_conditional_experiment2(int pad_dims);

struct PowerEstimate {
    double power = 0.0;
    double standard_error = 0.0;
    int n_mc = 0;
    int rejections = 0;
};

/// Shared settings for the Monte Carlo protocol; the synthetic protocol
/// splits train/test evenly.
struct PowerConfig {
    double test_fraction = 0.5;
    int B = 100;
    double alpha = 0.05;
    double l2 = 1e-4;
    int num_bins = 10;
    double noise_variance = 1e-10;
    /// Use the known null conditional instead of fitting Q_{Y|X}.
    bool fix_true_conditional = false;
    /// Worker threads for the repetitions (they are independent given
    /// per-repetition substreams); <= 1 runs sequentially.
    int threads = 1;
};

/// Rejection frequency of the hypothesis test over n_mc fresh draws from
/// the process, with its binomial standard error. The result does not
/// depend on thread scheduling.
PowerEstimate estimate_power(const Experiment1Params& params, Hypothesis hypothesis,
                             int n_mc, const PowerConfig& config, const Rng& rng);
PowerEstimate estimate_power(const Experiment2Params& params, Hypothesis hypothesis,
                             int n_mc, const PowerConfig& config, const Rng& rng);

}  // namespace driftkit
