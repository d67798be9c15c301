#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "driftkit/data.hpp"
#include "driftkit/ratio.hpp"

namespace driftkit {

/// Which estimator produced kl_y.
enum class YEstimator { kPlugin, kClassifier };

/// The five KL point estimates. The conditional entries are defined by the
/// divergence decomposition, so kl_x_given_y == kl_joint - kl_y and
/// kl_y_given_x == kl_joint - kl_x hold exactly as floating-point
/// subtractions.
struct KLEstimates {
    double kl_joint = 0.0;
    double kl_x = 0.0;
    double kl_y = 0.0;
    double kl_x_given_y = 0.0;
    double kl_y_given_x = 0.0;
    YEstimator y_estimator = YEstimator::kPlugin;
};

/// The ratio models a run needs: the Y-only model exists only for
/// regression tasks (discrete labels use the plug-in estimator instead).
struct RatioModelSet {
    RatioModel joint;
    RatioModel x_only;
    std::optional<RatioModel> y_only;
};

struct DivergenceConfig {
    double l2 = 1e-4;
    bool reduce_joint_dim = false;
};

RatioModelSet fit_ratio_models(const AugmentedDataset& train, const DivergenceConfig& config);

/// Empirical-average KL estimate: mean log-ratio over the origin-2 rows of
/// the test set. May be negative in finite samples; reported as-is.
double estimate_kl(const RatioModel& model, const AugmentedDataset& test);

/// Plug-in KL for a discrete label from the empirical test frequencies.
/// Throws DataError when a target label is missing from the source test
/// rows (the estimator's support requirement).
double plugin_kl_y(const std::vector<int>& source_test_labels,
                   const std::vector<int>& target_test_labels);

/// Per-label contribution to the plug-in sum, with the label's source-test
/// count. Lets callers surface terms that ride on a handful of source
/// rows, where the estimate is exact but fragile.
struct PluginTerm {
    int label = 0;
    double contribution = 0.0;
    std::size_t source_count = 0;
};
std::vector<PluginTerm> plugin_kl_terms(const std::vector<int>& source_test_labels,
                                        const std::vector<int>& target_test_labels);

/// All five estimates from fitted models and a test set.
KLEstimates compute_estimates(const RatioModelSet& models, const AugmentedDataset& test);

/// Convenience: fit on train, evaluate on test.
KLEstimates compute_all(const SplitDatasets& split, const DivergenceConfig& config);

/// Test statistic over a (possibly modified) test set for one hypothesis,
/// matching the corresponding KLEstimates entry on the unmodified set. The
/// returned function recomputes everything from the dataset it is given,
/// including both plug-in label frequencies under permuted assignments; a
/// permutation that empties the source support of a target label yields
/// +infinity rather than an error.
std::function<double(const AugmentedDataset&)> make_statistic(Hypothesis hypothesis,
                                                              const RatioModelSet& models);

}  // namespace driftkit
