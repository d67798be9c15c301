#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "driftkit/data.hpp"
#include "driftkit/model.hpp"

namespace driftkit {

/// Which part of a sample feeds the origin classifier.
enum class FeatureView { kJointXY, kXOnly, kYOnly };

std::string to_string(FeatureView view);

/// Maps samples to classifier inputs for one view. Categorical labels are
/// one-hot encoded over the classes observed in the training set (appended
/// after X for the joint view); an unseen test label encodes as all zeros.
/// An optional reducer classifier replaces the raw X block of the joint
/// view by the scalar p(Z=2 | X).
class ViewProjector {
public:
    ViewProjector() = default;

    static ViewProjector make(FeatureView view, const AugmentedDataset& train);

    Eigen::VectorXd project(const LabeledSample& sample) const;
    int dim() const { return dim_; }
    FeatureView view() const { return view_; }
    const std::vector<int>& label_classes() const { return label_classes_; }

    /// Installs the X -> p(Z=2|X) reduction for the joint view.
    void set_x_reducer(std::shared_ptr<const ProbabilisticClassifier> reducer);

private:
    FeatureView view_ = FeatureView::kXOnly;
    Task task_ = Task::kClassification;
    int feature_dim_ = 0;
    int dim_ = 0;
    std::vector<int> label_classes_;  // sorted; empty for regression
    std::shared_ptr<const ProbabilisticClassifier> x_reducer_;
};

/// Log Radon-Nikodym derivative estimate for one view: a binary classifier
/// that discriminates the target (Z=2) from the source (Z=1), rescaled by
/// the training class counts. Setting custom_scorer swaps any externally
/// trained probability source in for the built-in classifier; it must
/// order its two classes as (Z=1, Z=2).
struct RatioModel {
    ViewProjector projector;
    ProbabilisticClassifier classifier;
    std::shared_ptr<const ProbabilitySource> custom_scorer;
    std::size_t n_tr_1 = 0;
    std::size_t n_tr_2 = 0;

    const ProbabilitySource& scorer() const {
        return custom_scorer ? *custom_scorer : classifier;
    }

    /// ln(n_tr_1/n_tr_2) + ln p(Z=2|v) - ln p(Z=1|v); finite by clipping.
    double log_ratio(const LabeledSample& sample) const;

    /// True when the scorer's output for Z=2 reaches the clip bounds for
    /// this sample (the absolute-continuity assumption may be failing
    /// there).
    bool saturated(const LabeledSample& sample) const;
};

/// Fits the origin classifier for the view on the training rows.
/// reduce_joint_dim enables the two-stage trick for the joint view: first
/// fit on X alone, then train on (p(Z=2|X), Y-encoding).
RatioModel fit_ratio(const AugmentedDataset& train, FeatureView view, double l2,
                     bool reduce_joint_dim = false);

/// Mean validation cross-entropy of the origin classifier on a dataset.
double ratio_validation_ce(const RatioModel& model, const AugmentedDataset& data);

/// Fraction of origin-2 rows whose classifier output is clipped.
double saturation_rate(const RatioModel& model, const AugmentedDataset& data);

}  // namespace driftkit
