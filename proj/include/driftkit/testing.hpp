#pragma once

#include <functional>
#include <optional>

#include "driftkit/data.hpp"
#include "driftkit/model.hpp"

namespace driftkit {

/// Outcome of one simulated test.
struct TestResult {
    Hypothesis hypothesis = Hypothesis::kTotalD;
    double statistic = 0.0;  // noiseless T on the original target test rows
    double p_value = 1.0;
    int B = 0;
    double noise_variance = 0.0;
    std::uint64_t seed = 0;
};

/// Uniformly random permutation of the origin column over all test rows;
/// features and labels stay with their rows.
AugmentedDataset permute_global(const AugmentedDataset& test, Rng& rng);

/// Permutes the origin column independently within each label level, so
/// per-level origin counts are preserved exactly. Continuous labels need a
/// binning rule to define the levels; single-row levels are no-ops.
AugmentedDataset permute_local(const AugmentedDataset& test, Rng& rng,
                               const std::optional<BinningRule>& binning = std::nullopt);

/// Replaces the label of every origin-2 row by a draw from the conditional
/// model at that row's features; features and origins are untouched. The
/// conditional must have been fitted on training data only.
AugmentedDataset crt_resample(const AugmentedDataset& test, const ConditionalModel& conditional,
                              Rng& rng);

/// Simulated p-value for one hypothesis: T0 is the statistic on the test
/// set plus N(0, noise_variance) tie-break noise; each of the B replicates
/// rebuilds the test set under the hypothesis's resampling scheme and adds
/// its own noise; p = (1 + #{T0 <= Tj}) / (B + 1).
///
/// Randomness layout: substream 0 of rng drives T0's noise; substream j
/// (1..B) drives replicate j's resampling followed by its noise, so
/// replicates are order-independent.
TestResult p_value(const std::function<double(const AugmentedDataset&)>& statistic,
                   const AugmentedDataset& test, Hypothesis hypothesis, int B,
                   double noise_variance, const Rng& rng,
                   const ConditionalModel* conditional = nullptr,
                   const std::optional<BinningRule>& binning = std::nullopt);

}  // namespace driftkit
