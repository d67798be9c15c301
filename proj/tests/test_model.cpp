#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "driftkit/errors.hpp"
#include "driftkit/model.hpp"
#include "driftkit/synth.hpp"

using namespace driftkit;
using Catch::Approx;

namespace {

// Finite difference of the penalized loss along one coordinate.
double loss_derivative(const Eigen::MatrixXd& X, const std::vector<int>& y,
                       const std::vector<int>& class_ids, Eigen::MatrixXd W, double l2,
                       Eigen::Index r, Eigen::Index c) {
    const double h = 1e-6;
    const double w0 = W(r, c);
    W(r, c) = w0 + h;
    const double up = logistic_loss(X, y, class_ids, W, l2);
    W(r, c) = w0 - h;
    const double down = logistic_loss(X, y, class_ids, W, l2);
    return (up - down) / (2.0 * h);
}

}  // namespace

TEST_CASE("balanced labels with constant features give a coin-flip model") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(20, 1);
    std::vector<int> y(20);
    for (int i = 0; i < 20; ++i) y[i] = i % 2;
    const auto model = fit_logistic(X, y, 0.1);
    const Eigen::VectorXd p = model.predict_proba(Eigen::VectorXd::Zero(1));
    CHECK(p(0) == Approx(0.5).margin(1e-9));
    CHECK(p(1) == Approx(0.5).margin(1e-9));
}

TEST_CASE("separable 1-D data stays finite under L2 and beats ln 2") {
    Eigen::MatrixXd X(8, 1);
    std::vector<int> y(8);
    for (int i = 0; i < 8; ++i) {
        X(i, 0) = (i < 4) ? -1.0 - 0.2 * i : 1.0 + 0.2 * (i - 4);
        y[i] = (i < 4) ? 0 : 1;
    }
    const double l2 = 1.0;
    const auto model = fit_logistic(X, y, l2);
    REQUIRE(model.weights().allFinite());

    const double ce = mean_cross_entropy(model, X, y);
    CHECK(ce < std::numbers::ln2);

    // Independent grid-search oracle on the same penalized objective:
    // Newton's optimum must not lose to any grid point.
    const double newton_loss =
        logistic_loss(X, y, model.class_ids(), model.weights(), l2);
    double grid_best = std::numeric_limits<double>::infinity();
    for (double b = -3.0; b <= 3.0; b += 0.05) {
        for (double w = -3.0; w <= 3.0; w += 0.05) {
            Eigen::MatrixXd W(1, 2);
            W << b, w;
            grid_best = std::min(grid_best, logistic_loss(X, y, model.class_ids(), W, l2));
        }
    }
    CHECK(newton_loss <= grid_best + 1e-6);
}

TEST_CASE("single-class labels are a fitting error") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(5, 2);
    std::vector<int> y(5, 1);
    REQUIRE_THROWS_AS(fit_logistic(X, y, 0.1), FitError);
}

TEST_CASE("predict_proba matches hand-computed softmax values") {
    SECTION("zero weights give the uniform vector") {
        ProbabilisticClassifier model(Eigen::MatrixXd::Zero(2, 3), {0, 1, 2}, 0.0);
        const Eigen::VectorXd p = model.predict_proba(Eigen::VectorXd::Random(2));
        for (int c = 0; c < 3; ++c) CHECK(p(c) == Approx(1.0 / 3).epsilon(1e-12));
    }
    SECTION("binary score 0 gives (0.5, 0.5)") {
        Eigen::MatrixXd W(1, 2);
        W << 0.0, 1.0;
        ProbabilisticClassifier model(W, {1, 2}, 0.0);
        const Eigen::VectorXd p = model.predict_proba(Eigen::VectorXd::Zero(1));
        CHECK(p(0) == Approx(0.5).epsilon(1e-12));
    }
    SECTION("binary score ln 3 gives (0.25, 0.75)") {
        Eigen::MatrixXd W(1, 2);
        W << std::log(3.0), 0.0;
        ProbabilisticClassifier model(W, {1, 2}, 0.0);
        const Eigen::VectorXd p = model.predict_proba(Eigen::VectorXd::Zero(1));
        CHECK(p(0) == Approx(0.25).epsilon(1e-12));
        CHECK(p(1) == Approx(0.75).epsilon(1e-12));
    }
    SECTION("dimension mismatch is a usage error") {
        ProbabilisticClassifier model(Eigen::MatrixXd::Zero(1, 3), {0, 1}, 0.0);
        REQUIRE_THROWS_AS(model.predict_proba(Eigen::VectorXd::Zero(5)), UsageError);
    }
}

TEST_CASE("probability vectors are clipped, positive and normalized") {
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const int num_classes = 2 + static_cast<int>(rng.uniform_int(4));
        const int dim = 1 + static_cast<int>(rng.uniform_int(4));
        Eigen::MatrixXd W(num_classes - 1, dim + 1);
        for (Eigen::Index r = 0; r < W.rows(); ++r) {
            for (Eigen::Index c = 0; c < W.cols(); ++c) {
                W(r, c) = 40.0 * rng.normal();  // occasionally saturating scores
            }
        }
        std::vector<int> ids(num_classes);
        std::iota(ids.begin(), ids.end(), 0);
        ProbabilisticClassifier model(W, ids, 0.0);
        Eigen::VectorXd x(dim);
        for (int j = 0; j < dim; ++j) x(j) = rng.normal();

        const Eigen::VectorXd p = model.predict_proba(x);
        CHECK(std::abs(p.sum() - 1.0) < 1e-9);
        for (Eigen::Index c = 0; c < p.size(); ++c) {
            CHECK(p(c) >= ProbabilisticClassifier::kProbClip);
            CHECK(p(c) <= 1.0 - ProbabilisticClassifier::kProbClip);
        }
    }
}

TEST_CASE("analytic gradients match finite differences") {
    Rng rng(31);
    for (int trial = 0; trial < 5; ++trial) {
        const int n = 10 + static_cast<int>(rng.uniform_int(40));
        const int d = 1 + static_cast<int>(rng.uniform_int(4));
        const int num_classes = 2 + static_cast<int>(rng.uniform_int(2));
        Eigen::MatrixXd X(n, d);
        std::vector<int> y(n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j) X(i, j) = rng.normal();
            y[i] = static_cast<int>(rng.uniform_int(num_classes));
        }
        std::vector<int> ids(num_classes);
        std::iota(ids.begin(), ids.end(), 0);
        Eigen::MatrixXd W(num_classes - 1, d + 1);
        for (Eigen::Index r = 0; r < W.rows(); ++r) {
            for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = 0.5 * rng.normal();
        }
        CHECK(gradient_check(X, y, ids, W, 0.37) < 1e-5);
    }
}

TEST_CASE("intercept gradient vanishes for balanced centered data") {
    Eigen::MatrixXd X(4, 1);
    X << -2.0, -1.0, 1.0, 2.0;
    std::vector<int> y = {0, 1, 0, 1};
    const Eigen::MatrixXd W = Eigen::MatrixXd::Zero(1, 2);
    CHECK(std::abs(loss_derivative(X, y, {0, 1}, W, 0.0, 0, 0)) < 1e-8);
}

TEST_CASE("huge L2 makes the gradient the penalty term") {
    Eigen::MatrixXd X(6, 1);
    X << -1.5, -0.5, 0.25, 0.5, 1.0, 2.0;
    std::vector<int> y = {0, 0, 1, 0, 1, 1};
    Eigen::MatrixXd W(1, 2);
    W << 0.4, -0.7;
    const double l2 = 1e8;
    for (Eigen::Index c = 0; c < 2; ++c) {
        const double derivative = loss_derivative(X, y, {0, 1}, W, l2, 0, c);
        CHECK(derivative == Approx(l2 * W(0, c)).epsilon(1e-4));
    }
}

TEST_CASE("Newton's loss trace is monotone non-increasing") {
    Rng rng(41);
    const int n = 60;
    Eigen::MatrixXd X(n, 2);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = rng.normal();
        X(i, 1) = rng.normal();
        y[i] = (X(i, 0) + 0.5 * rng.normal() > 0) ? 1 : 0;
    }
    const auto model = fit_logistic(X, y, 1e-4);
    const auto& trace = model.fit_info().loss_trace;
    REQUIRE(trace.size() >= 2);
    for (std::size_t i = 1; i < trace.size(); ++i) {
        CHECK(trace[i] <= trace[i - 1] + 1e-12);
    }
    CHECK(model.fit_info().converged);
}

TEST_CASE("conditional regression head recovers the generating law") {
    Experiment2Params params;
    params.n = 4000;
    Rng rng(51);
    const auto samples = gen_experiment2(params, 1, rng);
    AugmentedDataset train;
    train.task = Task::kRegression;
    for (const auto& s : samples) train.rows.push_back({s, 1});

    const auto model = fit_conditional(train, Task::kRegression, 1e-4);
    REQUIRE(model.kind() == ConditionalModel::Kind::kGaussian);
    CHECK_FALSE(model.fallback());
    CHECK(model.beta()(0) == Approx(0.0).margin(0.08));
    CHECK(model.beta()(1) == Approx(1.0).margin(0.08));
    CHECK(model.sigma2() == Approx(1.0).margin(0.12));
}

TEST_CASE("noiseless regression hits the variance floor") {
    AugmentedDataset train;
    train.task = Task::kRegression;
    Rng rng(61);
    for (int i = 0; i < 40; ++i) {
        const double x = rng.normal();
        train.rows.push_back({{{x}, x}, 1});
    }
    const auto model = fit_conditional(train, Task::kRegression, 1e-4);
    CHECK(model.sigma2() == ConditionalModel::kVarianceFloor);
}

TEST_CASE("degenerate regression design falls back to intercept-only") {
    AugmentedDataset train;
    train.task = Task::kRegression;
    for (int i = 0; i < 24; ++i) {
        train.rows.push_back({{{3.0}, static_cast<double>(i % 5)}, 1});
    }
    const auto model = fit_conditional(train, Task::kRegression, 1e-4);
    CHECK(model.fallback());
    CHECK(model.beta()(1) == 0.0);
}

TEST_CASE("conditional classification head tracks class frequencies") {
    AugmentedDataset train;
    train.task = Task::kClassification;
    Rng rng(71);
    int ones = 0;
    const int n = 2000;
    for (int i = 0; i < n; ++i) {
        const int label = rng.uniform() < 0.3 ? 1 : 0;  // independent of X
        ones += label;
        train.rows.push_back({{{rng.normal(), rng.normal()}, static_cast<double>(label)}, 1});
    }
    const auto model = fit_conditional(train, Task::kClassification, 1e-4);
    REQUIRE(model.kind() == ConditionalModel::Kind::kCategorical);
    const Eigen::VectorXd p =
        model.distribution().predict_proba(Eigen::VectorXd::Zero(2));
    CHECK(p(1) == Approx(static_cast<double>(ones) / n).margin(0.05));
}

TEST_CASE("sample_conditional draws reproducibly from the fitted law") {
    SECTION("point-mass categorical") {
        Eigen::MatrixXd W(2, 2);
        W << -60.0, 0.0, -60.0, 0.0;  // classes 1 and 2 are impossible
        const auto model =
            ConditionalModel::categorical(ProbabilisticClassifier(W, {0, 1, 2}, 0.0));
        Rng rng(81);
        for (int i = 0; i < 500; ++i) {
            CHECK(sample_conditional(model, {0.5}, rng) == 0.0);
        }
    }
    SECTION("variance floor is effectively deterministic") {
        Eigen::VectorXd beta(2);
        beta << 0.25, 2.0;
        const auto model = ConditionalModel::gaussian(beta, 0.0);
        Rng rng(91);
        const double draw = sample_conditional(model, {1.5}, rng);
        CHECK(draw == Approx(0.25 + 3.0).margin(1e-3));
    }
    SECTION("same seed, same draws") {
        Eigen::VectorXd beta(2);
        beta << 0.0, 1.0;
        const auto model = ConditionalModel::gaussian(beta, 1.0);
        Rng a(101), b(101);
        for (int i = 0; i < 10; ++i) {
            CHECK(sample_conditional(model, {0.3}, a) ==
                  sample_conditional(model, {0.3}, b));
        }
    }
    SECTION("law of large numbers at the fitted parameters") {
        Experiment2Params params;
        params.n = 3000;
        Rng data_rng(111);
        const auto samples = gen_experiment2(params, 1, data_rng);
        AugmentedDataset train;
        train.task = Task::kRegression;
        for (const auto& s : samples) train.rows.push_back({s, 1});
        const auto model = fit_conditional(train, Task::kRegression, 1e-4);

        const std::vector<double> x = {2.0};
        const double want_mean = model.mean_at(Eigen::VectorXd::Constant(1, 2.0));
        Rng rng(121);
        const int draws = 10000;
        double sum = 0.0, sum_sq = 0.0;
        for (int i = 0; i < draws; ++i) {
            const double v = sample_conditional(model, x, rng);
            sum += v;
            sum_sq += v * v;
        }
        const double mean = sum / draws;
        const double variance = sum_sq / draws - mean * mean;
        CHECK(std::abs(mean - want_mean) < 0.05 * std::abs(want_mean));
        CHECK(std::abs(variance - model.sigma2()) < 0.05 * model.sigma2());
    }
}

TEST_CASE("select_model picks the lowest validation cross-entropy") {
    Eigen::MatrixXd X(4, 1);
    X << -1.0, -0.5, 0.5, 1.0;
    const std::vector<int> y = {0, 0, 1, 1};

    Eigen::MatrixXd uniform = Eigen::MatrixXd::Zero(1, 2);
    Eigen::MatrixXd certain_wrong(1, 2);
    certain_wrong << 0.0, -80.0;  // confidently predicts the flipped labels

    const ProbabilisticClassifier coin(uniform, {0, 1}, 0.0);
    const ProbabilisticClassifier wrong(certain_wrong, {0, 1}, 0.0);

    SECTION("a single candidate is returned unchanged") {
        CHECK(select_model({wrong}, X, y) == 0);
    }
    SECTION("clipped-certain wrong predictions lose to the coin flip") {
        const double wrong_ce = mean_cross_entropy(wrong, X, y);
        const double coin_ce = mean_cross_entropy(coin, X, y);
        CHECK(wrong_ce == Approx(-std::log(1e-10)).epsilon(0.01));  // about 23
        CHECK(coin_ce == Approx(std::numbers::ln2).epsilon(1e-9));
        CHECK(select_model({wrong, coin}, X, y) == 1);
    }
    SECTION("ties break toward the first candidate") {
        CHECK(select_model({coin, coin}, X, y) == 0);
    }
    SECTION("empty validation set is a configuration error") {
        REQUIRE_THROWS_AS(select_model({coin}, Eigen::MatrixXd(0, 1), std::vector<int>{}),
                          ConfigError);
    }
}
