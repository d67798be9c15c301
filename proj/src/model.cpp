#include "driftkit/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "driftkit/errors.hpp"

namespace driftkit {

namespace {

// Class scores with an implicit 0 for the baseline class: s = [0, W * xt].
Eigen::VectorXd class_scores(const Eigen::MatrixXd& weights, const Eigen::VectorXd& xt) {
    const int num_classes = static_cast<int>(weights.rows()) + 1;
    Eigen::VectorXd scores(num_classes);
    scores(0) = 0.0;
    scores.tail(num_classes - 1) = weights * xt;
    return scores;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
    const double shift = scores.maxCoeff();
    Eigen::VectorXd p = (scores.array() - shift).exp();
    return p / p.sum();
}

Eigen::VectorXd clip_and_renormalize(Eigen::VectorXd p) {
    constexpr double lo = ProbabilisticClassifier::kProbClip;
    constexpr double hi = 1.0 - ProbabilisticClassifier::kProbClip;
    p = p.array().min(hi).max(lo);
    p /= p.sum();
    p = p.array().max(lo);  // renormalization can nudge a component below the floor
    return p;
}

// Maps raw labels to contiguous class indices following class_ids order.
std::vector<int> to_class_indices(const std::vector<int>& labels,
                                  const std::vector<int>& class_ids) {
    std::vector<int> indices(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto it = std::lower_bound(class_ids.begin(), class_ids.end(), labels[i]);
        if (it == class_ids.end() || *it != labels[i]) {
            throw UsageError("label " + std::to_string(labels[i]) +
                             " is not among the model's classes");
        }
        indices[i] = static_cast<int>(std::distance(class_ids.begin(), it));
    }
    return indices;
}

// Adds the intercept column: rows are [1, x_i].
Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& features) {
    Eigen::MatrixXd design(features.rows(), features.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(features.cols()) = features;
    return design;
}

struct LossAndGradient {
    double loss = 0.0;
    Eigen::MatrixXd gradient;  // same shape as the weights
};

// Penalized NLL and its gradient, sharing one pass over the data.
LossAndGradient loss_and_gradient(const Eigen::MatrixXd& design,
                                  const std::vector<int>& class_indices, int num_classes,
                                  const Eigen::MatrixXd& weights, double l2) {
    LossAndGradient out;
    out.gradient = l2 * weights;
    out.loss = 0.5 * l2 * weights.squaredNorm();
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        const Eigen::VectorXd xt = design.row(i);
        const Eigen::VectorXd scores = class_scores(weights, xt);
        const double shift = scores.maxCoeff();
        const Eigen::VectorXd exps = (scores.array() - shift).exp();
        const double logsum = shift + std::log(exps.sum());
        out.loss += logsum - scores(class_indices[static_cast<std::size_t>(i)]);
        const Eigen::VectorXd p = exps / exps.sum();
        for (int c = 1; c < num_classes; ++c) {
            const double delta =
                p(c) - (class_indices[static_cast<std::size_t>(i)] == c ? 1.0 : 0.0);
            out.gradient.row(c - 1) += delta * xt.transpose();
        }
    }
    return out;
}

// Full multinomial Hessian of the penalized NLL, in the flattened
// (class-major) parameter order used by the Newton solve.
Eigen::MatrixXd hessian(const Eigen::MatrixXd& design,
                        const int num_classes, const Eigen::MatrixXd& weights, double l2) {
    const Eigen::Index dim = design.cols();
    const Eigen::Index blocks = num_classes - 1;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(blocks * dim, blocks * dim);
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        const Eigen::VectorXd xt = design.row(i);
        const Eigen::VectorXd p = softmax(class_scores(weights, xt));
        const Eigen::MatrixXd outer = xt * xt.transpose();
        for (Eigen::Index a = 0; a < blocks; ++a) {
            for (Eigen::Index b = 0; b < blocks; ++b) {
                const double w = p(a + 1) * ((a == b ? 1.0 : 0.0) - p(b + 1));
                h.block(a * dim, b * dim, dim, dim) += w * outer;
            }
        }
    }
    h += l2 * Eigen::MatrixXd::Identity(blocks * dim, blocks * dim);
    return h;
}

}  // namespace

ProbabilisticClassifier::ProbabilisticClassifier(Eigen::MatrixXd weights,
                                                 std::vector<int> class_ids, double l2)
    : weights_(std::move(weights)), class_ids_(std::move(class_ids)), l2_(l2) {
    if (weights_.rows() + 1 != static_cast<Eigen::Index>(class_ids_.size())) {
        throw UsageError("weight rows must equal num_classes - 1");
    }
}

Eigen::VectorXd ProbabilisticClassifier::predict_proba(const Eigen::VectorXd& x) const {
    if (x.size() != input_dim()) {
        throw UsageError("input has dimension " + std::to_string(x.size()) +
                         ", model expects " + std::to_string(input_dim()));
    }
    Eigen::VectorXd xt(x.size() + 1);
    xt(0) = 1.0;
    xt.tail(x.size()) = x;
    return clip_and_renormalize(softmax(class_scores(weights_, xt)));
}

ProbabilisticClassifier fit_logistic(const Eigen::MatrixXd& features,
                                     const std::vector<int>& labels, double l2,
                                     int max_iter, double tol) {
    if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
        throw UsageError("features and labels disagree on the number of rows");
    }
    if (l2 < 0.0) {
        throw ConfigError("l2 must be >= 0");
    }
    std::vector<int> class_ids(labels.begin(), labels.end());
    std::sort(class_ids.begin(), class_ids.end());
    class_ids.erase(std::unique(class_ids.begin(), class_ids.end()), class_ids.end());
    if (class_ids.size() < 2) {
        throw FitError("logistic regression needs at least two classes in the labels");
    }
    const int num_classes = static_cast<int>(class_ids.size());
    const std::vector<int> class_indices = to_class_indices(labels, class_ids);
    const Eigen::MatrixXd design = with_intercept(features);
    const Eigen::Index dim = design.cols();

    Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(num_classes - 1, dim);
    auto state = loss_and_gradient(design, class_indices, num_classes, weights, l2);
    if (!std::isfinite(state.loss)) {
        throw FitError("non-finite loss at the starting point");
    }

    FitInfo info;
    info.loss_trace.push_back(state.loss);
    info.converged = false;
    int iter = 0;
    for (; iter < max_iter; ++iter) {
        if (state.gradient.cwiseAbs().maxCoeff() < tol) {
            info.converged = true;
            break;
        }
        const Eigen::MatrixXd h = hessian(design, num_classes, weights, l2);
        const Eigen::VectorXd flat_grad =
            state.gradient.reshaped<Eigen::RowMajor>();
        Eigen::VectorXd step_flat = h.ldlt().solve(flat_grad);
        Eigen::MatrixXd step = step_flat.reshaped<Eigen::RowMajor>(num_classes - 1, dim);

        // Step halving keeps the penalized loss monotone non-increasing.
        double t = 1.0;
        bool improved = false;
        for (int halving = 0; halving < 60; ++halving) {
            const Eigen::MatrixXd candidate = weights - t * step;
            const auto next = loss_and_gradient(design, class_indices, num_classes,
                                                candidate, l2);
            if (!std::isfinite(next.loss)) {
                throw FitError("non-finite loss during optimization");
            }
            if (next.loss <= state.loss) {
                weights = candidate;
                state = next;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        info.loss_trace.push_back(state.loss);
        if (!improved) {
            // No descent direction left at this scale; treat as converged
            // if the gradient is small, otherwise report non-convergence.
            info.converged = state.gradient.cwiseAbs().maxCoeff() < tol;
            ++iter;
            break;
        }
    }
    if (iter == max_iter) {
        info.converged = state.gradient.cwiseAbs().maxCoeff() < tol;
    }
    info.iterations = iter;

    ProbabilisticClassifier model(std::move(weights), std::move(class_ids), l2);
    model.fit_info_ = std::move(info);
    return model;
}

double logistic_loss(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                     const std::vector<int>& class_ids, const Eigen::MatrixXd& weights,
                     double l2) {
    const std::vector<int> class_indices = to_class_indices(labels, class_ids);
    const Eigen::MatrixXd design = with_intercept(features);
    return loss_and_gradient(design, class_indices, static_cast<int>(class_ids.size()),
                             weights, l2)
        .loss;
}

double gradient_check(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                      const std::vector<int>& class_ids, const Eigen::MatrixXd& weights,
                      double l2) {
    const std::vector<int> class_indices = to_class_indices(labels, class_ids);
    const Eigen::MatrixXd design = with_intercept(features);
    const int num_classes = static_cast<int>(class_ids.size());
    const Eigen::MatrixXd analytic =
        loss_and_gradient(design, class_indices, num_classes, weights, l2).gradient;

    constexpr double h = 1e-5;
    double worst = 0.0;
    for (Eigen::Index r = 0; r < weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < weights.cols(); ++c) {
            Eigen::MatrixXd shifted = weights;
            shifted(r, c) = weights(r, c) + h;
            const double up =
                loss_and_gradient(design, class_indices, num_classes, shifted, l2).loss;
            shifted(r, c) = weights(r, c) - h;
            const double down =
                loss_and_gradient(design, class_indices, num_classes, shifted, l2).loss;
            const double numeric = (up - down) / (2.0 * h);
            const double denom = std::max({1.0, std::abs(numeric), std::abs(analytic(r, c))});
            worst = std::max(worst, std::abs(numeric - analytic(r, c)) / denom);
        }
    }
    return worst;
}

double mean_cross_entropy(const ProbabilitySource& model,
                          const Eigen::MatrixXd& features,
                          const std::vector<int>& labels) {
    if (labels.empty()) {
        throw ConfigError("validation set is empty");
    }
    const std::vector<int> class_indices = to_class_indices(labels, model.class_ids());
    double total = 0.0;
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const Eigen::VectorXd p = model.predict_proba(features.row(i).transpose());
        total -= std::log(p(class_indices[static_cast<std::size_t>(i)]));
    }
    return total / static_cast<double>(labels.size());
}

std::size_t select_model(const std::vector<ProbabilisticClassifier>& candidates,
                         const Eigen::MatrixXd& validation_features,
                         const std::vector<int>& validation_labels) {
    if (candidates.empty()) {
        throw ConfigError("select_model needs at least one candidate");
    }
    std::size_t best = 0;
    double best_ce = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const double ce =
            mean_cross_entropy(candidates[i], validation_features, validation_labels);
        if (ce < best_ce) {
            best_ce = ce;
            best = i;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Conditional model
// ---------------------------------------------------------------------------

ConditionalModel ConditionalModel::categorical(ProbabilisticClassifier classifier) {
    ConditionalModel m;
    m.kind_ = Kind::kCategorical;
    m.classifier_ = std::move(classifier);
    return m;
}

ConditionalModel ConditionalModel::categorical(
    std::shared_ptr<const ProbabilitySource> source) {
    if (!source) {
        throw UsageError("categorical conditional needs a probability source");
    }
    ConditionalModel m;
    m.kind_ = Kind::kCategorical;
    m.custom_ = std::move(source);
    return m;
}

const ProbabilitySource& ConditionalModel::distribution() const {
    if (kind_ != Kind::kCategorical) {
        throw UsageError("distribution() is only defined for the categorical head");
    }
    return custom_ ? *custom_ : classifier_;
}

ConditionalModel ConditionalModel::gaussian(Eigen::VectorXd beta, double sigma2) {
    ConditionalModel m;
    m.kind_ = Kind::kGaussian;
    m.beta_ = std::move(beta);
    m.sigma2_ = std::max(sigma2, kVarianceFloor);
    return m;
}

double ConditionalModel::mean_at(const Eigen::VectorXd& x) const {
    if (kind_ != Kind::kGaussian) {
        throw UsageError("mean_at is only defined for the gaussian head");
    }
    if (x.size() + 1 != beta_.size()) {
        throw UsageError("feature dimension does not match the regression coefficients");
    }
    return beta_(0) + beta_.tail(x.size()).dot(x);
}

ConditionalModel fit_conditional(const AugmentedDataset& train, Task task, double l2) {
    if (train.rows.empty()) {
        throw ConfigError("cannot fit a conditional model on an empty training set");
    }
    const std::size_t n = train.size();
    const std::size_t dim = train.feature_dim();

    if (task == Task::kClassification) {
        Eigen::MatrixXd features(n, dim);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < dim; ++j) {
                features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    train.rows[i].sample.features[j];
            }
            labels[i] = static_cast<int>(std::lround(train.rows[i].sample.label));
        }
        return ConditionalModel::categorical(fit_logistic(features, labels, l2));
    }

    const std::size_t n_fit = std::max<std::size_t>(1, (3 * n) / 4);
    Eigen::MatrixXd design(n_fit, dim + 1);
    Eigen::VectorXd y_fit(n_fit);
    for (std::size_t i = 0; i < n_fit; ++i) {
        design(static_cast<Eigen::Index>(i), 0) = 1.0;
        for (std::size_t j = 0; j < dim; ++j) {
            design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j) + 1) =
                train.rows[i].sample.features[j];
        }
        y_fit(static_cast<Eigen::Index>(i)) = train.rows[i].sample.label;
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    bool fallback = qr.rank() < design.cols();
    Eigen::VectorXd beta;
    if (fallback) {
        beta = Eigen::VectorXd::Zero(dim + 1);
        beta(0) = y_fit.mean();
    } else {
        beta = qr.solve(y_fit);
    }

    // Residual variance from the held-out tail; falls back to fit residuals
    // when the training set is too small to hold anything out.
    double ss = 0.0;
    std::size_t count = 0;
    const std::size_t holdout_begin = (n_fit < n) ? n_fit : 0;
    const std::size_t holdout_end = (n_fit < n) ? n : n_fit;
    for (std::size_t i = holdout_begin; i < holdout_end; ++i) {
        double mean = beta(0);
        for (std::size_t j = 0; j < dim; ++j) {
            mean += beta(static_cast<Eigen::Index>(j) + 1) * train.rows[i].sample.features[j];
        }
        const double r = train.rows[i].sample.label - mean;
        ss += r * r;
        ++count;
    }
    const double sigma2 = count > 0 ? ss / static_cast<double>(count) : 0.0;

    ConditionalModel model = ConditionalModel::gaussian(std::move(beta), sigma2);
    model.fallback_ = fallback;
    return model;
}

double sample_conditional(const ConditionalModel& model, const std::vector<double>& features,
                          Rng& rng) {
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(
        features.data(), static_cast<Eigen::Index>(features.size()));
    if (model.kind() == ConditionalModel::Kind::kGaussian) {
        return model.mean_at(x) + std::sqrt(model.sigma2()) * rng.normal();
    }
    const Eigen::VectorXd p = model.distribution().predict_proba(x);
    const double u = rng.uniform();
    double cum = 0.0;
    const auto& ids = model.distribution().class_ids();
    for (Eigen::Index c = 0; c < p.size(); ++c) {
        cum += p(c);
        if (u < cum) {
            return static_cast<double>(ids[static_cast<std::size_t>(c)]);
        }
    }
    return static_cast<double>(ids.back());
}

}  // namespace driftkit
