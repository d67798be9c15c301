#include "driftkit/synth.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "driftkit/errors.hpp"

namespace driftkit {

namespace {

void check_population(int population) {
    if (population != 1 && population != 2) {
        throw ConfigError("population must be 1 (source) or 2 (target)");
    }
}

}  // namespace

std::vector<LabeledSample> gen_experiment1(const Experiment1Params& params, int population,
                                           Rng& rng) {
    check_population(population);
    if (params.d < 1) {
        throw ConfigError("d must be >= 1");
    }
    const double p_one = population == 1 ? 0.5 : 0.5 + params.delta;
    if (!(p_one > 0.0 && p_one < 1.0)) {
        throw ConfigError("0.5 + delta must lie in (0, 1)");
    }
    const double mean_shift = population == 1 ? 0.0 : params.gamma;

    std::vector<LabeledSample> samples(params.n);
    for (auto& sample : samples) {
        const int y = rng.uniform() < p_one ? 1 : 0;
        sample.label = y;
        sample.features.resize(static_cast<std::size_t>(params.d));
        const double mean = static_cast<double>(y) + mean_shift;
        for (auto& x : sample.features) {
            x = mean + rng.normal();
        }
    }
    return samples;
}

std::vector<LabeledSample> gen_experiment2(const Experiment2Params& params, int population,
                                           Rng& rng) {
    check_population(population);
    if (params.pad_dims < 0) {
        throw ConfigError("pad_dims must be >= 0");
    }
    const double x_shift = population == 1 ? 0.0 : params.lambda;
    const double y_shift = population == 1 ? 0.0 : params.theta;

    std::vector<LabeledSample> samples(params.n);
    for (auto& sample : samples) {
        sample.features.resize(1 + static_cast<std::size_t>(params.pad_dims));
        const double x = x_shift + rng.normal();
        sample.features[0] = x;
        sample.label = x + y_shift + rng.normal();
    }
    // Pads are drawn after all core values, so the core data is identical
    // across pad_dims settings for a given generator state.
    for (auto& sample : samples) {
        for (int j = 0; j < params.pad_dims; ++j) {
            sample.features[1 + static_cast<std::size_t>(j)] = rng.normal();
        }
    }
    return samples;
}

ConditionalModel true_conditional_experiment1(int d) {
    // Under the null, P(Y=1|x) = sigmoid(sum(x) - d/2): the log odds of two
    // unit Gaussians centered at 0 and 1 per coordinate.
    Eigen::MatrixXd weights(1, d + 1);
    weights(0, 0) = -0.5 * static_cast<double>(d);
    weights.row(0).tail(d).setOnes();
    return ConditionalModel::categorical(
        ProbabilisticClassifier(std::move(weights), {0, 1}, 0.0));
}

ConditionalModel true_conditional_experiment2(int pad_dims) {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(2 + pad_dims);
    beta(1) = 1.0;  // Y | X ~ N(x_1, 1)
    return ConditionalModel::gaussian(std::move(beta), 1.0);
}

namespace {

// Shared Monte Carlo loop: generate() draws (source, target) for
// repetition i; each repetition gets substreams (3i, 3i+1, 3i+2) of the
// master stream for source, target and the pipeline seed.
template <typename GenFn>
PowerEstimate power_loop(GenFn&& generate, Task task, Hypothesis hypothesis, int n_mc,
                         const PowerConfig& config, const Rng& rng,
                         const ConditionalModel* fixed_conditional) {
    if (n_mc < 1) {
        throw ConfigError("n_mc must be >= 1");
    }

    RunConfig run_config;
    run_config.task = task;
    run_config.test_fraction = config.test_fraction;
    run_config.B = config.B;
    run_config.alpha = config.alpha;
    run_config.l2 = config.l2;
    run_config.num_bins = config.num_bins;
    run_config.noise_variance = config.noise_variance;
    run_config.hypotheses = {hypothesis};

    std::vector<char> rejected(static_cast<std::size_t>(n_mc), 0);
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    const auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n_mc) return;
            try {
                const Rng rep = rng.substream(static_cast<std::uint64_t>(i));
                Rng source_rng = rep.substream(0);
                Rng target_rng = rep.substream(1);
                const auto source = generate(1, source_rng);
                const auto target = generate(2, target_rng);
                RunConfig local = run_config;
                local.seed = rep.substream(2).seed();
                const ShiftReport report =
                    run_on_samples(source, target, local, fixed_conditional);
                if (!report.tests.front().ok) {
                    throw DataError("hypothesis " + to_string(hypothesis) +
                                    " failed in repetition " + std::to_string(i) + ": " +
                                    report.tests.front().error);
                }
                rejected[static_cast<std::size_t>(i)] = report.tests.front().reject ? 1 : 0;
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    const int threads = std::max(1, config.threads);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    PowerEstimate estimate;
    estimate.n_mc = n_mc;
    for (char r : rejected) {
        estimate.rejections += r;
    }
    estimate.power = static_cast<double>(estimate.rejections) / static_cast<double>(n_mc);
    estimate.standard_error =
        std::sqrt(estimate.power * (1.0 - estimate.power) / static_cast<double>(n_mc));
    return estimate;
}

}  // namespace

PowerEstimate estimate_power(const Experiment1Params& params, Hypothesis hypothesis,
                             int n_mc, const PowerConfig& config, const Rng& rng) {
    std::optional<ConditionalModel> fixed;
    if (config.fix_true_conditional) {
        fixed = true_conditional_experiment1(params.d);
    }
    return power_loop(
        [&params](int population, Rng& r) { return gen_experiment1(params, population, r); },
        Task::kClassification, hypothesis, n_mc, config, rng,
        fixed.has_value() ? &*fixed : nullptr);
}

PowerEstimate estimate_power(const Experiment2Params& params, Hypothesis hypothesis,
                             int n_mc, const PowerConfig& config, const Rng& rng) {
    std::optional<ConditionalModel> fixed;
    if (config.fix_true_conditional) {
        fixed = true_conditional_experiment2(params.pad_dims);
    }
    return power_loop(
        [&params](int population, Rng& r) { return gen_experiment2(params, population, r); },
        Task::kRegression, hypothesis, n_mc, config, rng,
        fixed.has_value() ? &*fixed : nullptr);
}

}  // namespace driftkit
