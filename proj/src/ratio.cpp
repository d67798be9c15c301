#include "driftkit/ratio.hpp"

#include <algorithm>
#include <cmath>

#include "driftkit/errors.hpp"

namespace driftkit {

std::string to_string(FeatureView view) {
    switch (view) {
        case FeatureView::kJointXY: return "joint";
        case FeatureView::kXOnly: return "x";
        case FeatureView::kYOnly: return "y";
    }
    return "?";
}

ViewProjector ViewProjector::make(FeatureView view, const AugmentedDataset& train) {
    ViewProjector p;
    p.view_ = view;
    p.task_ = train.task;
    p.feature_dim_ = static_cast<int>(train.feature_dim());

    int label_dim = 1;
    if (train.task == Task::kClassification) {
        std::vector<int> classes;
        for (const auto& row : train.rows) {
            classes.push_back(static_cast<int>(std::lround(row.sample.label)));
        }
        std::sort(classes.begin(), classes.end());
        classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
        p.label_classes_ = std::move(classes);
        label_dim = static_cast<int>(p.label_classes_.size());
    }

    switch (view) {
        case FeatureView::kJointXY: p.dim_ = p.feature_dim_ + label_dim; break;
        case FeatureView::kXOnly: p.dim_ = p.feature_dim_; break;
        case FeatureView::kYOnly: p.dim_ = label_dim; break;
    }
    return p;
}

void ViewProjector::set_x_reducer(std::shared_ptr<const ProbabilisticClassifier> reducer) {
    if (view_ != FeatureView::kJointXY) {
        throw UsageError("the X reducer only applies to the joint view");
    }
    x_reducer_ = std::move(reducer);
    dim_ = 1 + (task_ == Task::kClassification ? static_cast<int>(label_classes_.size()) : 1);
}

Eigen::VectorXd ViewProjector::project(const LabeledSample& sample) const {
    if (static_cast<int>(sample.features.size()) != feature_dim_) {
        throw UsageError("sample has feature dimension " +
                         std::to_string(sample.features.size()) + ", view expects " +
                         std::to_string(feature_dim_));
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dim_);
    int offset = 0;
    if (view_ != FeatureView::kYOnly) {
        if (x_reducer_) {
            const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(
                sample.features.data(), static_cast<Eigen::Index>(sample.features.size()));
            out(0) = x_reducer_->predict_proba(x)(1);  // p(Z=2|X)
            offset = 1;
        } else {
            for (int j = 0; j < feature_dim_; ++j) {
                out(j) = sample.features[static_cast<std::size_t>(j)];
            }
            offset = feature_dim_;
        }
    }
    if (view_ == FeatureView::kXOnly) {
        return out;
    }
    if (task_ == Task::kRegression) {
        out(offset) = sample.label;
    } else {
        const int label = static_cast<int>(std::lround(sample.label));
        const auto it =
            std::lower_bound(label_classes_.begin(), label_classes_.end(), label);
        if (it != label_classes_.end() && *it == label) {
            out(offset + static_cast<int>(std::distance(label_classes_.begin(), it))) = 1.0;
        }
        // Unseen labels keep the all-zero encoding.
    }
    return out;
}

double RatioModel::log_ratio(const LabeledSample& sample) const {
    const Eigen::VectorXd p = scorer().predict_proba(projector.project(sample));
    return std::log(static_cast<double>(n_tr_1) / static_cast<double>(n_tr_2)) +
           std::log(p(1)) - std::log(p(0));
}

bool RatioModel::saturated(const LabeledSample& sample) const {
    const Eigen::VectorXd p = scorer().predict_proba(projector.project(sample));
    constexpr double lo = ProbabilisticClassifier::kProbClip;
    return p(1) <= lo || p(1) >= 1.0 - lo;
}

namespace {

Eigen::MatrixXd project_all(const ViewProjector& projector, const AugmentedDataset& data) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(data.size()), projector.dim());
    for (std::size_t i = 0; i < data.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) =
            projector.project(data.rows[i].sample).transpose();
    }
    return out;
}

std::vector<int> origins_of(const AugmentedDataset& data) {
    std::vector<int> z(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        z[i] = data.rows[i].origin;
    }
    return z;
}

}  // namespace

RatioModel fit_ratio(const AugmentedDataset& train, FeatureView view, double l2,
                     bool reduce_joint_dim) {
    const std::size_t n1 = train.count_origin(1);
    const std::size_t n2 = train.count_origin(2);
    if (n1 == 0 || n2 == 0) {
        throw ConfigError("ratio fitting needs training rows from both populations");
    }

    RatioModel model;
    model.n_tr_1 = n1;
    model.n_tr_2 = n2;
    model.projector = ViewProjector::make(view, train);

    if (view == FeatureView::kJointXY && reduce_joint_dim) {
        RatioModel x_stage = fit_ratio(train, FeatureView::kXOnly, l2);
        model.projector.set_x_reducer(std::make_shared<const ProbabilisticClassifier>(
            std::move(x_stage.classifier)));
    }

    const Eigen::MatrixXd features = project_all(model.projector, train);
    model.classifier = fit_logistic(features, origins_of(train), l2);
    return model;
}

double ratio_validation_ce(const RatioModel& model, const AugmentedDataset& data) {
    const Eigen::MatrixXd features = project_all(model.projector, data);
    return mean_cross_entropy(model.scorer(), features, origins_of(data));
}

double saturation_rate(const RatioModel& model, const AugmentedDataset& data) {
    std::size_t saturated = 0;
    std::size_t total = 0;
    for (const auto& row : data.rows) {
        if (row.origin != 2) continue;
        ++total;
        saturated += model.saturated(row.sample);
    }
    return total == 0 ? 0.0 : static_cast<double>(saturated) / static_cast<double>(total);
}

}  // namespace driftkit
