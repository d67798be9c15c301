#include "driftkit/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "driftkit/errors.hpp"

namespace driftkit {

namespace {

double mean_log_ratio_origin2(const RatioModel& model, const AugmentedDataset& test) {
    std::vector<double> values;
    values.reserve(test.size());
    for (const auto& row : test.rows) {
        if (row.origin != 2) continue;
        values.push_back(model.log_ratio(row.sample));
    }
    if (values.empty()) {
        throw UsageError("KL estimation needs at least one target row in the test set");
    }
    // Summing in sorted order makes the estimate exactly invariant to the
    // order of the test rows.
    std::sort(values.begin(), values.end());
    double total = 0.0;
    for (double v : values) {
        total += v;
    }
    return total / static_cast<double>(values.size());
}

std::map<int, std::size_t> label_counts(const std::vector<int>& labels) {
    std::map<int, std::size_t> counts;
    for (int label : labels) {
        ++counts[label];
    }
    return counts;
}

// Plug-in sum; out-of-support target labels give +inf when allowed
// (permutation replicates) and a DataError otherwise.
double plugin_kl_impl(const std::vector<int>& source_labels,
                      const std::vector<int>& target_labels, bool allow_infinite) {
    if (source_labels.empty() || target_labels.empty()) {
        throw UsageError("plug-in KL needs labels from both test populations");
    }
    const auto source = label_counts(source_labels);
    const auto target = label_counts(target_labels);
    const double n1 = static_cast<double>(source_labels.size());
    const double n2 = static_cast<double>(target_labels.size());

    double kl = 0.0;
    for (const auto& [label, count2] : target) {
        const auto it = source.find(label);
        if (it == source.end()) {
            if (allow_infinite) {
                return std::numeric_limits<double>::infinity();
            }
            throw DataError("label " + std::to_string(label) +
                            " appears in the target test rows but not in the source "
                            "test rows; the plug-in KL estimator is undefined");
        }
        const double p2 = static_cast<double>(count2) / n2;
        const double p1 = static_cast<double>(it->second) / n1;
        kl += p2 * std::log(p2 / p1);
    }
    return kl;
}

double response_statistic(const RatioModelSet& models, const AugmentedDataset& test) {
    if (models.y_only.has_value()) {
        return mean_log_ratio_origin2(*models.y_only, test);
    }
    return plugin_kl_impl(test.labels_of_origin(1), test.labels_of_origin(2),
                          /*allow_infinite=*/true);
}

}  // namespace

RatioModelSet fit_ratio_models(const AugmentedDataset& train, const DivergenceConfig& config) {
    RatioModelSet models;
    models.joint = fit_ratio(train, FeatureView::kJointXY, config.l2, config.reduce_joint_dim);
    models.x_only = fit_ratio(train, FeatureView::kXOnly, config.l2);
    if (train.task == Task::kRegression) {
        models.y_only = fit_ratio(train, FeatureView::kYOnly, config.l2);
    }
    return models;
}

double estimate_kl(const RatioModel& model, const AugmentedDataset& test) {
    return mean_log_ratio_origin2(model, test);
}

double plugin_kl_y(const std::vector<int>& source_test_labels,
                   const std::vector<int>& target_test_labels) {
    return plugin_kl_impl(source_test_labels, target_test_labels, /*allow_infinite=*/false);
}

std::vector<PluginTerm> plugin_kl_terms(const std::vector<int>& source_test_labels,
                                        const std::vector<int>& target_test_labels) {
    if (source_test_labels.empty() || target_test_labels.empty()) {
        throw UsageError("plug-in KL needs labels from both test populations");
    }
    const auto source = label_counts(source_test_labels);
    const auto target = label_counts(target_test_labels);
    const double n1 = static_cast<double>(source_test_labels.size());
    const double n2 = static_cast<double>(target_test_labels.size());

    std::vector<PluginTerm> terms;
    terms.reserve(target.size());
    for (const auto& [label, count2] : target) {
        const auto it = source.find(label);
        if (it == source.end()) {
            throw DataError("label " + std::to_string(label) +
                            " appears in the target test rows but not in the source "
                            "test rows; the plug-in KL estimator is undefined");
        }
        const double p2 = static_cast<double>(count2) / n2;
        const double p1 = static_cast<double>(it->second) / n1;
        terms.push_back({label, p2 * std::log(p2 / p1), it->second});
    }
    return terms;
}

KLEstimates compute_estimates(const RatioModelSet& models, const AugmentedDataset& test) {
    KLEstimates est;
    est.kl_joint = mean_log_ratio_origin2(models.joint, test);
    est.kl_x = mean_log_ratio_origin2(models.x_only, test);
    if (models.y_only.has_value()) {
        est.kl_y = mean_log_ratio_origin2(*models.y_only, test);
        est.y_estimator = YEstimator::kClassifier;
    } else {
        est.kl_y = plugin_kl_y(test.labels_of_origin(1), test.labels_of_origin(2));
        est.y_estimator = YEstimator::kPlugin;
    }
    est.kl_x_given_y = est.kl_joint - est.kl_y;
    est.kl_y_given_x = est.kl_joint - est.kl_x;
    return est;
}

KLEstimates compute_all(const SplitDatasets& split, const DivergenceConfig& config) {
    const RatioModelSet models = fit_ratio_models(split.train, config);
    return compute_estimates(models, split.test);
}

std::function<double(const AugmentedDataset&)> make_statistic(Hypothesis hypothesis,
                                                              const RatioModelSet& models) {
    // Captured by value so the statistic stays valid on its own; the
    // models are small linear classifiers.
    switch (hypothesis) {
        case Hypothesis::kTotalD:
            return [joint = models.joint](const AugmentedDataset& test) {
                return mean_log_ratio_origin2(joint, test);
            };
        case Hypothesis::kFeatureF:
            return [x_only = models.x_only](const AugmentedDataset& test) {
                return mean_log_ratio_origin2(x_only, test);
            };
        case Hypothesis::kResponseR:
            return [models](const AugmentedDataset& test) {
                return response_statistic(models, test);
            };
        case Hypothesis::kCond1:
            return [models](const AugmentedDataset& test) {
                return mean_log_ratio_origin2(models.joint, test) -
                       response_statistic(models, test);
            };
        case Hypothesis::kCond2:
            return [models](const AugmentedDataset& test) {
                return mean_log_ratio_origin2(models.joint, test) -
                       mean_log_ratio_origin2(models.x_only, test);
            };
    }
    throw UsageError("unknown hypothesis");
}

}  // namespace driftkit
