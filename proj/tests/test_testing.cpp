#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <memory>
#include <set>

#include "driftkit/divergence.hpp"
#include "driftkit/errors.hpp"
#include "driftkit/synth.hpp"
#include "driftkit/testing.hpp"

using namespace driftkit;
using Catch::Approx;

namespace {

AugmentedDataset pool(const std::vector<LabeledSample>& source,
                      const std::vector<LabeledSample>& target, Task task) {
    AugmentedDataset data;
    data.task = task;
    for (const auto& s : source) data.rows.push_back({s, 1});
    for (const auto& s : target) data.rows.push_back({s, 2});
    return data;
}

AugmentedDataset tiny_test_set() {
    return pool({{{0.0}, 0.0}, {{1.0}, 1.0}}, {{{2.0}, 0.0}, {{3.0}, 1.0}},
                Task::kClassification);
}

// A statistic that ignores the data and plays back scripted values.
std::function<double(const AugmentedDataset&)> scripted(std::vector<double> values) {
    auto state = std::make_shared<std::pair<std::vector<double>, std::size_t>>(
        std::move(values), 0);
    return [state](const AugmentedDataset&) {
        return state->first[state->second++ % state->first.size()];
    };
}

std::string origin_signature(const AugmentedDataset& data) {
    std::string s;
    for (const auto& row : data.rows) {
        s += static_cast<char>('0' + row.origin);
    }
    return s;
}

}  // namespace

TEST_CASE("p-values follow the rank formula") {
    const auto test = tiny_test_set();
    const int B = 100;

    SECTION("a strictly largest T0 gives 1/(B+1)") {
        std::vector<double> values = {1000.0};
        for (int j = 1; j <= B; ++j) values.push_back(-static_cast<double>(j));
        const auto result = p_value(scripted(values), test, Hypothesis::kTotalD, B, 1e-10,
                                    Rng(3));
        CHECK(result.p_value == Approx(1.0 / (B + 1)).epsilon(1e-12));
        CHECK(result.statistic == 1000.0);
    }
    SECTION("a strictly smallest T0 gives 1") {
        std::vector<double> values = {-1000.0};
        for (int j = 1; j <= B; ++j) values.push_back(static_cast<double>(j));
        const auto result = p_value(scripted(values), test, Hypothesis::kTotalD, B, 1e-10,
                                    Rng(4));
        CHECK(result.p_value == 1.0);
    }
    SECTION("exactly 4 replicates above T0 give 5/101") {
        std::vector<double> values = {0.0};
        for (int j = 1; j <= B; ++j) values.push_back(j <= 4 ? 10.0 : -10.0);
        const auto result = p_value(scripted(values), test, Hypothesis::kTotalD, B, 1e-10,
                                    Rng(5));
        CHECK(result.p_value == Approx(5.0 / 101.0).epsilon(1e-12));
    }
}

TEST_CASE("p-values land on the grid k/(B+1)") {
    const auto test = tiny_test_set();
    Rng seeds(11);
    for (int trial = 0; trial < 40; ++trial) {
        const int B = 1 + static_cast<int>(seeds.uniform_int(60));
        std::vector<double> values;
        Rng stat_rng = seeds.substream(static_cast<std::uint64_t>(trial));
        for (int j = 0; j <= B; ++j) values.push_back(stat_rng.normal());
        const auto result = p_value(scripted(values), test, Hypothesis::kTotalD, B, 1e-10,
                                    Rng(seeds.next_u64()));
        const double k = result.p_value * (B + 1);
        CHECK(std::abs(k - std::round(k)) < 1e-9);
        CHECK(result.p_value >= 1.0 / (B + 1) - 1e-12);
        CHECK(result.p_value <= 1.0);
    }
}

TEST_CASE("p_value validates its inputs") {
    const auto test = tiny_test_set();
    const auto stat = scripted({0.0});
    CHECK_THROWS_AS(p_value(stat, test, Hypothesis::kTotalD, 0, 1e-10, Rng(1)), ConfigError);
    CHECK_THROWS_AS(p_value(stat, test, Hypothesis::kTotalD, 10, 0.0, Rng(1)), ConfigError);
    CHECK_THROWS_AS(p_value(stat, test, Hypothesis::kCond2, 10, 1e-10, Rng(1)), UsageError);

    auto regression = tiny_test_set();
    regression.task = Task::kRegression;
    CHECK_THROWS_AS(p_value(stat, regression, Hypothesis::kCond1, 10, 1e-10, Rng(1)),
                    UsageError);
}

TEST_CASE("global permutation keeps counts and reaches all assignments uniformly") {
    const auto test = tiny_test_set();  // 2 source + 2 target rows
    Rng rng(21);

    std::map<std::string, int> histogram;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        const auto permuted = permute_global(test, rng);
        REQUIRE(permuted.count_origin(2) == 2);
        REQUIRE(permuted.size() == 4);
        histogram[origin_signature(permuted)]++;
        for (std::size_t r = 0; r < permuted.size(); ++r) {
            REQUIRE(permuted.rows[r].sample.features == test.rows[r].sample.features);
        }
    }

    // Enumeration oracle: permuting {1,1,2,2} reaches C(4,2) = 6 equally
    // likely assignments.
    REQUIRE(histogram.size() == 6);
    CHECK(histogram.count("1122") == 1);  // identity assignment occurs

    const double expected = draws / 6.0;
    double chi2 = 0.0;
    for (const auto& [pattern, count] : histogram) {
        chi2 += (count - expected) * (count - expected) / expected;
    }
    CHECK(chi2 < 25.0);  // chi-square_{0.9999}(5) is about 25.7
}

TEST_CASE("local permutation shuffles only within label levels") {
    // Two levels with three rows each; level 0 holds one target row,
    // level 1 holds two.
    const auto test = pool({{{0.0}, 0.0}, {{1.0}, 0.0}, {{2.0}, 1.0}},
                           {{{3.0}, 0.0}, {{4.0}, 1.0}, {{5.0}, 1.0}},
                           Task::kClassification);
    Rng rng(31);

    std::map<std::string, int> histogram;
    const int draws = 9000;
    for (int i = 0; i < draws; ++i) {
        const auto permuted = permute_local(test, rng);
        // Per-level origin counts are preserved exactly.
        std::map<int, int> level_targets;
        for (const auto& row : permuted.rows) {
            if (row.origin == 2) {
                level_targets[static_cast<int>(row.sample.label)]++;
            }
        }
        REQUIRE(level_targets[0] == 1);
        REQUIRE(level_targets[1] == 2);
        for (std::size_t r = 0; r < permuted.size(); ++r) {
            REQUIRE(permuted.rows[r].sample.label == test.rows[r].sample.label);
        }
        histogram[origin_signature(permuted)]++;
    }

    // Enumeration oracle: 3 assignments within level 0 times 3 within
    // level 1 = 9 equally likely patterns.
    REQUIRE(histogram.size() == 9);
    const double expected = draws / 9.0;
    double chi2 = 0.0;
    for (const auto& [pattern, count] : histogram) {
        chi2 += (count - expected) * (count - expected) / expected;
    }
    CHECK(chi2 < 32.0);  // chi-square_{0.9999}(8) is about 31.8
}

TEST_CASE("a level without target rows contributes none after permutation") {
    const auto test = pool({{{0.0}, 0.0}, {{1.0}, 0.0}, {{2.0}, 1.0}}, {{{3.0}, 1.0}},
                           Task::kClassification);
    Rng rng(41);
    for (int i = 0; i < 200; ++i) {
        const auto permuted = permute_local(test, rng);
        for (const auto& row : permuted.rows) {
            if (static_cast<int>(row.sample.label) == 0) {
                CHECK(row.origin == 1);
            }
        }
    }
}

TEST_CASE("local permutation of continuous labels uses the binning rule") {
    auto test = pool({{{0.0}, 0.1}, {{1.0}, 0.2}, {{2.0}, 10.1}},
                     {{{3.0}, 0.3}, {{4.0}, 10.2}, {{5.0}, 10.3}}, Task::kRegression);
    std::vector<double> labels;
    for (const auto& row : test.rows) labels.push_back(row.sample.label);
    const auto rule = make_binning(labels, 2);

    Rng rng(51);
    for (int i = 0; i < 300; ++i) {
        const auto permuted = permute_local(test, rng, rule);
        std::map<int, int> bin_targets;
        for (const auto& row : permuted.rows) {
            if (row.origin == 2) bin_targets[apply_binning(rule, row.sample.label)]++;
        }
        REQUIRE(bin_targets[0] == 1);
        REQUIRE(bin_targets[1] == 2);
    }
}

TEST_CASE("CRT resampling changes only target labels") {
    Experiment2Params params;
    params.n = 50;
    Rng data_rng(61);
    Rng src = data_rng.substream(0), tgt = data_rng.substream(1);
    const auto test = pool(gen_experiment2(params, 1, src), gen_experiment2(params, 2, tgt),
                           Task::kRegression);

    Eigen::VectorXd beta(2);
    beta << 0.0, 1.0;

    SECTION("features and origins are bit-identical") {
        const auto q = ConditionalModel::gaussian(beta, 1.0);
        Rng rng(71);
        const auto resampled = crt_resample(test, q, rng);
        REQUIRE(resampled.size() == test.size());
        bool some_label_changed = false;
        for (std::size_t i = 0; i < test.size(); ++i) {
            CHECK(resampled.rows[i].sample.features == test.rows[i].sample.features);
            CHECK(resampled.rows[i].origin == test.rows[i].origin);
            if (test.rows[i].origin == 1) {
                CHECK(resampled.rows[i].sample.label == test.rows[i].sample.label);
            } else if (resampled.rows[i].sample.label != test.rows[i].sample.label) {
                some_label_changed = true;
            }
        }
        CHECK(some_label_changed);
    }
    SECTION("a floored variance makes resampling deterministic") {
        const auto q = ConditionalModel::gaussian(beta, 0.0);
        Rng rng(81);
        const auto resampled = crt_resample(test, q, rng);
        for (const auto& row : resampled.rows) {
            if (row.origin != 2) continue;
            CHECK(row.sample.label == Approx(row.sample.features[0]).margin(1e-3));
        }
    }
    SECTION("resampled labels match the conditional mean row-wise") {
        const auto q = ConditionalModel::gaussian(beta, 1.0);
        const int draws = 10000;
        std::vector<double> sums(test.size(), 0.0);
        Rng rng(91);
        for (int d = 0; d < draws; ++d) {
            const auto resampled = crt_resample(test, q, rng);
            for (std::size_t i = 0; i < test.size(); ++i) {
                sums[i] += resampled.rows[i].sample.label;
            }
        }
        const double se = 1.0 / std::sqrt(static_cast<double>(draws));
        for (std::size_t i = 0; i < test.size(); ++i) {
            if (test.rows[i].origin != 2) continue;
            const double mean = sums[i] / draws;
            CHECK(mean == Approx(test.rows[i].sample.features[0]).margin(3.0 * se));
        }
    }
}

TEST_CASE("point-mass categorical CRT pins every resampled label") {
    const auto test = pool({{{0.0}, 0.0}}, {{{1.0}, 1.0}, {{2.0}, 0.0}},
                           Task::kClassification);
    Eigen::MatrixXd W(1, 2);
    W << 60.0, 0.0;  // class 1 is near-certain
    const auto q = ConditionalModel::categorical(ProbabilisticClassifier(W, {0, 1}, 0.0));
    Rng rng(101);
    for (int i = 0; i < 200; ++i) {
        const auto resampled = crt_resample(test, q, rng);
        for (const auto& row : resampled.rows) {
            if (row.origin == 2) CHECK(row.sample.label == 1.0);
        }
    }
}

TEST_CASE("tie-break noise moves well-separated p-values by at most one grid step") {
    Experiment2Params params;
    params.lambda = 3.0;  // huge shift: T0 dominates every replicate
    params.n = 400;
    Rng data_rng(111);
    Rng src = data_rng.substream(0), tgt = data_rng.substream(1);
    const auto split = augment_and_split(gen_experiment2(params, 1, src),
                                         gen_experiment2(params, 2, tgt), Task::kRegression,
                                         0.5, data_rng.substream(2).seed());
    const auto models = fit_ratio_models(split.train, DivergenceConfig{});
    const auto stat = make_statistic(Hypothesis::kFeatureF, models);

    const int B = 100;
    const auto a = p_value(stat, split.test, Hypothesis::kFeatureF, B, 1e-10, Rng(1));
    const auto b = p_value(stat, split.test, Hypothesis::kFeatureF, B, 1e-10, Rng(2));
    CHECK(std::abs(a.p_value - b.p_value) <= 1.0 / (B + 1) + 1e-12);
    CHECK(a.p_value == Approx(1.0 / (B + 1)).epsilon(1e-12));
    CHECK(a.statistic == b.statistic);  // noise never touches the reported statistic
}

TEST_CASE("identical populations keep the empirical size near the nominal level") {
    // Type-I smoke test at unit scale; the acceptance suite runs the full
    // 500-repetition protocol.
    Experiment1Params params;
    params.n = 150;
    PowerConfig config;
    config.B = 60;
    config.threads = 2;
    const auto estimate = estimate_power(params, Hypothesis::kTotalD, 150, config, Rng(121));
    CHECK(estimate.power <= 0.05 + 0.06);
}
