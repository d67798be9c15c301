#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <vector>

#include "driftkit/data.hpp"
#include "driftkit/rng.hpp"

namespace driftkit {

/// Convergence record of an iterative fit.
struct FitInfo {
    bool converged = true;
    int iterations = 0;
    std::vector<double> loss_trace;  // penalized NLL after each Newton step
};

/// Anything that turns an input vector into class probabilities. The
/// built-in logistic classifier implements it; adapters around
/// gradient-boosted or deep models can be swapped in wherever a
/// ProbabilitySource is consumed.
class ProbabilitySource {
public:
    virtual ~ProbabilitySource() = default;
    /// Probability vector aligned with class_ids().
    virtual Eigen::VectorXd predict_proba(const Eigen::VectorXd& x) const = 0;
    virtual const std::vector<int>& class_ids() const = 0;
    virtual int input_dim() const = 0;
};

/// Linear probabilistic classifier (binary or multinomial logistic).
///
/// Weights are a (K-1) x (d+1) matrix; column 0 is the intercept, row c
/// holds the logits of class_ids[c+1] relative to the baseline class_ids[0].
/// Predicted probabilities are clipped into [1e-10, 1 - 1e-10] and
/// renormalized so downstream log-ratios stay finite.
class ProbabilisticClassifier : public ProbabilitySource {
public:
    static constexpr double kProbClip = 1e-10;

    ProbabilisticClassifier() = default;
    ProbabilisticClassifier(Eigen::MatrixXd weights, std::vector<int> class_ids, double l2);

    Eigen::VectorXd predict_proba(const Eigen::VectorXd& x) const override;
    const std::vector<int>& class_ids() const override { return class_ids_; }
    int input_dim() const override { return static_cast<int>(weights_.cols()) - 1; }

    const Eigen::MatrixXd& weights() const { return weights_; }
    double l2() const { return l2_; }
    const FitInfo& fit_info() const { return fit_info_; }

private:
    friend ProbabilisticClassifier fit_logistic(const Eigen::MatrixXd&,
                                                const std::vector<int>&, double, int,
                                                double);
    Eigen::MatrixXd weights_;
    std::vector<int> class_ids_;
    double l2_ = 0.0;
    FitInfo fit_info_;
};

/// Fits an L2-penalized (multinomial) logistic regression by Newton's
/// method with step halving; the penalty (l2/2)*||W||^2 covers the
/// intercept. Converges when the gradient max-norm drops below tol;
/// hitting max_iter is reported through fit_info(), not an error.
/// Throws FitError when fewer than two classes are present or the loss
/// turns non-finite.
ProbabilisticClassifier fit_logistic(const Eigen::MatrixXd& features,
                                     const std::vector<int>& labels, double l2,
                                     int max_iter = 100, double tol = 1e-8);

/// Penalized negative log-likelihood of a weight matrix on (features,
/// labels); the objective fit_logistic minimizes.
double logistic_loss(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                     const std::vector<int>& class_ids, const Eigen::MatrixXd& weights,
                     double l2);

/// Compares the analytic gradient of the penalized cross-entropy at
/// `weights` with central finite differences (h = 1e-5); returns the
/// maximum relative deviation. Test support for small instances.
double gradient_check(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                      const std::vector<int>& class_ids, const Eigen::MatrixXd& weights,
                      double l2);

/// Mean cross-entropy of the model on a validation set. Labels must use
/// class ids.
double mean_cross_entropy(const ProbabilitySource& model,
                          const Eigen::MatrixXd& features,
                          const std::vector<int>& labels);

/// Index of the candidate with minimal mean validation cross-entropy;
/// ties break toward the earlier candidate.
std::size_t select_model(const std::vector<ProbabilisticClassifier>& candidates,
                         const Eigen::MatrixXd& validation_features,
                         const std::vector<int>& validation_labels);

/// Estimate of the conditional law of Y given X, used by the conditional
/// randomization test. Classification tasks get a multinomial logistic
/// head; regression tasks a linear-Gaussian head whose residual variance
/// comes from a holdout disjoint from the coefficient fit.
class ConditionalModel {
public:
    enum class Kind { kCategorical, kGaussian };
    static constexpr double kVarianceFloor = 1e-8;

    static ConditionalModel categorical(ProbabilisticClassifier classifier);
    /// Categorical head backed by any probability source (for swapped-in
    /// classifiers).
    static ConditionalModel categorical(std::shared_ptr<const ProbabilitySource> source);
    /// beta has d+1 entries, intercept first. sigma2 is floored.
    static ConditionalModel gaussian(Eigen::VectorXd beta, double sigma2);

    Kind kind() const { return kind_; }
    bool fallback() const { return fallback_; }
    /// Class probabilities of the categorical head.
    const ProbabilitySource& distribution() const;
    const Eigen::VectorXd& beta() const { return beta_; }
    double sigma2() const { return sigma2_; }

    /// Conditional mean of Y at x (gaussian head only).
    double mean_at(const Eigen::VectorXd& x) const;

private:
    Kind kind_ = Kind::kGaussian;
    ProbabilisticClassifier classifier_;
    std::shared_ptr<const ProbabilitySource> custom_;
    Eigen::VectorXd beta_;
    double sigma2_ = kVarianceFloor;
    bool fallback_ = false;
    friend ConditionalModel fit_conditional(const AugmentedDataset&, Task, double);
};

/// Fits Q_{Y|X} on the training rows of both populations. Regression uses
/// the first 75% of rows (as ordered, which the split already randomized)
/// for the least-squares coefficients and the remaining 25% for the
/// residual variance; a rank-deficient design falls back to an
/// intercept-only model, flagged via ConditionalModel::fallback().
ConditionalModel fit_conditional(const AugmentedDataset& train, Task task, double l2);

/// Random draw from the fitted conditional at the sample's features.
double sample_conditional(const ConditionalModel& model, const std::vector<double>& features,
                          Rng& rng);

}  // namespace driftkit
