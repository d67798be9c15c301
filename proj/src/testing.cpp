#include "driftkit/testing.hpp"

#include <cmath>
#include <map>

#include "driftkit/errors.hpp"

namespace driftkit {

AugmentedDataset permute_global(const AugmentedDataset& test, Rng& rng) {
    std::vector<int> origins;
    origins.reserve(test.size());
    for (const auto& row : test.rows) {
        origins.push_back(row.origin);
    }
    shuffle(origins, rng);

    AugmentedDataset out = test;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.rows[i].origin = origins[i];
    }
    return out;
}

AugmentedDataset permute_local(const AugmentedDataset& test, Rng& rng,
                               const std::optional<BinningRule>& binning) {
    if (test.task == Task::kRegression && !binning.has_value()) {
        throw UsageError("local permutation of a continuous label needs a binning rule");
    }

    // Row indices per label level, in dataset order.
    std::map<int, std::vector<std::size_t>> levels;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const double label = test.rows[i].sample.label;
        const int level = binning.has_value() ? apply_binning(*binning, label)
                                              : static_cast<int>(std::lround(label));
        levels[level].push_back(i);
    }

    AugmentedDataset out = test;
    std::vector<int> origins;
    for (const auto& [level, indices] : levels) {
        origins.clear();
        for (std::size_t i : indices) {
            origins.push_back(test.rows[i].origin);
        }
        shuffle(origins, rng);
        for (std::size_t k = 0; k < indices.size(); ++k) {
            out.rows[indices[k]].origin = origins[k];
        }
    }
    return out;
}

AugmentedDataset crt_resample(const AugmentedDataset& test, const ConditionalModel& conditional,
                              Rng& rng) {
    AugmentedDataset out = test;
    for (auto& row : out.rows) {
        if (row.origin != 2) continue;
        row.sample.label = sample_conditional(conditional, row.sample.features, rng);
    }
    return out;
}

TestResult p_value(const std::function<double(const AugmentedDataset&)>& statistic,
                   const AugmentedDataset& test, Hypothesis hypothesis, int B,
                   double noise_variance, const Rng& rng,
                   const ConditionalModel* conditional,
                   const std::optional<BinningRule>& binning) {
    if (B < 1) {
        throw ConfigError("B must be >= 1");
    }
    if (!(noise_variance > 0.0)) {
        throw ConfigError("the tie-break noise variance must be positive");
    }
    if (hypothesis == Hypothesis::kCond2 && conditional == nullptr) {
        throw UsageError("testing for conditional shift type 2 needs a conditional model");
    }
    if (hypothesis == Hypothesis::kCond1 && test.task == Task::kRegression &&
        !binning.has_value()) {
        throw UsageError("testing for conditional shift type 1 with a continuous label "
                         "needs a binning rule");
    }

    const double noise_sd = std::sqrt(noise_variance);

    const double raw = statistic(test);
    Rng noise_stream = rng.substream(0);
    const double t0 = raw + noise_sd * noise_stream.normal();

    int count = 0;
    for (int j = 1; j <= B; ++j) {
        Rng replicate = rng.substream(static_cast<std::uint64_t>(j));
        AugmentedDataset modified = [&] {
            switch (hypothesis) {
                case Hypothesis::kTotalD:
                case Hypothesis::kFeatureF:
                case Hypothesis::kResponseR:
                    return permute_global(test, replicate);
                case Hypothesis::kCond1:
                    return permute_local(test, replicate, binning);
                case Hypothesis::kCond2:
                    return crt_resample(test, *conditional, replicate);
            }
            throw UsageError("unknown hypothesis");
        }();
        const double tj = statistic(modified) + noise_sd * replicate.normal();
        count += (t0 <= tj);
    }

    TestResult result;
    result.hypothesis = hypothesis;
    result.statistic = raw;
    result.p_value = static_cast<double>(count + 1) / static_cast<double>(B + 1);
    result.B = B;
    result.noise_variance = noise_variance;
    result.seed = rng.seed();
    return result;
}

}  // namespace driftkit
