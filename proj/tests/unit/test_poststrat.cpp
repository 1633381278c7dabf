#include "oracles/oracles.hpp"
#include "sae/diagnostics.hpp"
#include "sae/error.hpp"
#include "sae/poststrat.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

namespace ps = sae::poststrat;

namespace {

ps::CellTable one_cell(long big_n, long n, long positives) {
    ps::CellTable t;
    t.area = {0};
    t.population_count = {big_n};
    t.sample_count = {n};
    t.sample_positives = {positives};
    t.area_count = 1;
    return t;
}

ps::CellDrawFn constant_prob(double p) {
    return [p](int, std::span<double> prob, std::span<long>) {
        std::fill(prob.begin(), prob.end(), p);
    };
}

} // namespace

TEST(Predict, CensusAreaIsDegenerate) {
    const auto t = one_cell(12, 12, 5);
    const auto d = ps::predict_area_means(t, 200, constant_prob(0.9));
    for (Eigen::Index k = 0; k < d.means.rows(); ++k) {
        EXPECT_DOUBLE_EQ(d.means(k, 0), 5.0 / 12.0);
    }
}

TEST(Predict, ZeroProbabilityKeepsObservedPositives) {
    ps::CellTable t;
    t.area = {0, 0, 1};
    t.population_count = {30, 20, 40};
    t.sample_count = {5, 4, 6};
    t.sample_positives = {2, 1, 6};
    t.area_count = 2;
    const auto d = ps::predict_area_means(t, 50, constant_prob(0.0));
    for (Eigen::Index k = 0; k < 50; ++k) {
        EXPECT_DOUBLE_EQ(d.means(k, 0), 3.0 / 50.0);
        EXPECT_DOUBLE_EQ(d.means(k, 1), 6.0 / 40.0);
        EXPECT_EQ(d.positives(k, 0), 3);
    }
    EXPECT_EQ(d.area_sizes, (std::vector<long>{50, 40}));
}

TEST(Predict, BinomialMoments) {
    const auto t = one_cell(10, 0, 0);
    const int draws = 40000;
    const auto d = ps::predict_area_means(t, draws, constant_prob(0.5), {.seed = 3});
    const Eigen::VectorXd y = d.means.col(0);
    const double mean = y.mean();
    const Eigen::ArrayXd c = y.array() - mean;
    const double var = (c * c).sum() / (draws - 1);
    const double m4 = (c * c * c * c).mean();
    EXPECT_NEAR(mean, 0.5, 3.0 * std::sqrt(0.025 / draws));
    EXPECT_NEAR(var, 0.025, 3.0 * std::sqrt((m4 - var * var) / draws));
}

TEST(Predict, RegenerateAllIgnoresObservedValues) {
    const auto t = one_cell(10, 10, 10);
    const auto d = ps::predict_area_means(t, 2000, constant_prob(0.0),
                                          {.seed = 1, .regenerate_all = true});
    EXPECT_DOUBLE_EQ(d.means.col(0).maxCoeff(), 0.0);
}

TEST(Predict, WorkerCountDoesNotChangeResults) {
    ps::CellTable t;
    t.area = {0, 1, 1, 2};
    t.population_count = {100, 60, 70, 30};
    t.sample_count = {10, 5, 6, 0};
    t.sample_positives = {3, 1, 2, 0};
    t.area_count = 3;
    auto fn = [](int k, std::span<double> prob, std::span<long>) {
        for (std::size_t c = 0; c < prob.size(); ++c) {
            prob[c] = 0.1 + 0.2 * static_cast<double>(c) + 0.001 * (k % 7);
        }
    };
    const auto a = ps::predict_area_means(t, 300, fn, {.seed = 9, .workers = 1});
    const auto b = ps::predict_area_means(t, 300, fn, {.seed = 9, .workers = 3});
    EXPECT_EQ(a.positives, b.positives);
}

TEST(Predict, CellWithFewerUnitsThanSampleThrows) {
    const auto t = one_cell(3, 5, 1);
    EXPECT_THROW(t.validate(), sae::ConfigError);
    EXPECT_THROW((void)ps::predict_area_means(t, 10, constant_prob(0.5)), sae::ConfigError);
}

TEST(Predict, Model1DrawsUseLinearPredictor) {
    // Two areas, one binary covariate. beta = (-40, 0) pushes every nonsampled unit to y = 0.
    std::vector<sae::PoststratCell> cells{
        {0, {0}, 10, 2, 1, 0.0}, {0, {1}, 5, 1, 1, 0.0}, {1, {0}, 8, 0, 0, 0.0}};
    sae::PosteriorDraws draws;
    draws.names = {"beta[0]", "beta[1]", "z_u[0]", "z_u[1]", "sigma_u"};
    draws.chains = 1;
    draws.iterations = 3;
    draws.draws = Eigen::MatrixXd(3, 5);
    draws.draws << -40, 0, 0, 0, 1, -40, 0, 0, 0, 1, -40, 0, 0, 0, 1;
    const std::vector<int> levels{2};
    const auto d = ps::predict_area_means_model1(draws, cells, levels, 2);
    for (Eigen::Index k = 0; k < 3; ++k) {
        EXPECT_DOUBLE_EQ(d.means(k, 0), 2.0 / 15.0);
        EXPECT_DOUBLE_EQ(d.means(k, 1), 0.0);
    }
    // and +40 fills every nonsampled unit with y = 1
    draws.draws.col(0).setConstant(40.0);
    const auto full = ps::predict_area_means_model1(draws, cells, levels, 2);
    EXPECT_DOUBLE_EQ(full.means(0, 0), (2.0 + 12.0) / 15.0);
    EXPECT_DOUBLE_EQ(full.means(0, 1), 1.0);
}

TEST(CellSizes, LargestRemainderRounding) {
    const std::vector<double> phi{0.26, 0.34, 0.4};
    const auto r = ps::largest_remainder_round(phi, 10);
    EXPECT_EQ(r, (std::vector<long>{3, 3, 4}));
    const std::vector<long> minimum{0, 5, 0};
    const auto m = ps::largest_remainder_round(phi, 10, minimum);
    EXPECT_EQ(std::accumulate(m.begin(), m.end(), 0L), 10);
    EXPECT_GE(m[1], 5);
    const std::vector<long> too_many{6, 6, 0};
    EXPECT_THROW((void)ps::largest_remainder_round(phi, 10, too_many), sae::ConfigError);
}

TEST(CellSizes, SingleCellGetsAreaTotal) {
    const std::vector<long> counts{7};
    const std::vector<double> weights{3.0};
    sae::HmcConfig cfg;
    cfg.chains = 1;
    cfg.iterations = 20;
    const auto sizes = ps::multinomial_cell_sizes(counts, weights, 40, cfg);
    ASSERT_EQ(sizes.size(), 20u);
    for (const auto &row : sizes) {
        EXPECT_EQ(row, std::vector<long>{40});
    }
}

TEST(CellSizes, EqualWeightsGiveDirichletPosterior) {
    // Weights cancel: phi | n ~ Dirichlet(n + 1) under the flat prior.
    const std::vector<long> counts{12, 3, 5};
    const std::vector<double> weights(3, 2.0);
    const auto density = ps::multinomial_cell_density(counts, weights);
    sae::HmcConfig cfg;
    cfg.warmup = 500;
    cfg.iterations = 2000;
    cfg.seed = 5;
    const auto draws = sae::hmc_sample(density, cfg);
    const double total = 20.0 + 3.0;
    for (std::size_t l = 0; l < 3; ++l) {
        sae::ChainSet chains{draws.chain_values(l, 0), draws.chain_values(l, 1)};
        const auto s = sae::summarise("phi", chains);
        EXPECT_NEAR(s.mean, (static_cast<double>(counts[l]) + 1.0) / total, 3.0 * s.mcse_mean)
            << l;
    }
}

TEST(CellSizes, TwoCellPosteriorMatchesGrid) {
    const std::vector<long> counts{8, 2};
    const std::vector<double> weights{1.0, 4.0};
    sae::HmcConfig cfg;
    cfg.warmup = 500;
    cfg.iterations = 2000;
    cfg.seed = 11;
    const auto sizes = ps::multinomial_cell_sizes(counts, weights, 100, cfg);
    double mean = 0.0;
    for (const auto &row : sizes) {
        EXPECT_EQ(row[0] + row[1], 100);
        EXPECT_GE(row[0], 8);
        EXPECT_GE(row[1], 2);
        mean += static_cast<double>(row[0]);
    }
    mean /= static_cast<double>(sizes.size());
    const double oracle = sae::oracle::two_cell_posterior_mean(8, 2, 1.0, 4.0, 100);
    EXPECT_NEAR(mean / oracle, 1.0, 0.02);
}

TEST(Summaries, ConstantDraws) {
    const std::vector<double> v(50, 0.42);
    const auto s = ps::summarise_draws(v);
    EXPECT_DOUBLE_EQ(s.mean, 0.42);
    EXPECT_DOUBLE_EQ(s.sd, 0.0);
    EXPECT_DOUBLE_EQ(s.lo95, 0.42);
    EXPECT_DOUBLE_EQ(s.hi95, 0.42);
}

TEST(Summaries, NormalQuantiles) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> z(0.3, 0.01);
    std::vector<double> v(10000);
    for (auto &x : v) {
        x = z(rng);
    }
    const auto s = ps::summarise_draws(v);
    // sd of the 2.5% sample quantile: sqrt(q(1-q)/n) / phi(z_q) * sigma ~ 0.00027
    EXPECT_NEAR(s.lo95, 0.2804, 0.001);
    EXPECT_NEAR(s.hi95, 0.3196, 0.001);
    EXPECT_NEAR(s.sd, 0.01, 0.0003);
}

TEST(Summaries, StateAggregateIsPopulationWeighted) {
    Eigen::MatrixXd means(2, 2);
    means << 0.1, 0.5, 0.3, 0.7;
    const std::vector<long> sizes{100, 300};
    const auto agg = ps::aggregate(means, sizes);
    ASSERT_EQ(agg.state_draws.size(), 2u);
    EXPECT_NEAR(agg.state_draws[0], 0.25 * 0.1 + 0.75 * 0.5, 1e-15);
    EXPECT_NEAR(agg.state_draws[1], 0.25 * 0.3 + 0.75 * 0.7, 1e-15);
    EXPECT_NEAR(agg.areas[1].mean, 0.6, 1e-15);
}
