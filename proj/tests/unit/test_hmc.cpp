#include "sae/diagnostics.hpp"
#include "sae/error.hpp"
#include "sae/hmc.hpp"
#include "sae/model_density.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace ad = sae::ad;

namespace {

sae::ModelDensity gaussian(std::size_t dim, double mean, double sd) {
    sae::ParamSpace space;
    space.add("x", dim);
    return {space,
            [=](std::span<const ad::Var> x) {
                ad::Var s{0.0};
                for (const auto &v : x) {
                    s -= 0.5 * ad::square((v - mean) / sd);
                }
                return s;
            },
            "gaussian"};
}

sae::ChainSet chains_of(const sae::PosteriorDraws &d, std::size_t col) {
    sae::ChainSet out;
    for (int c = 0; c < d.chains; ++c) {
        out.push_back(d.chain_values(col, c));
    }
    return out;
}

} // namespace

TEST(Hmc, StandardNormal) {
    sae::HmcConfig cfg;
    cfg.chains = 2;
    cfg.warmup = 500;
    cfg.iterations = 1000;
    cfg.seed = 4;
    const auto d = sae::hmc_sample(gaussian(1, 0.0, 1.0), cfg);
    ASSERT_EQ(d.draws.rows(), 2000);
    const auto s = sae::summarise("x", chains_of(d, 0));
    EXPECT_NEAR(s.mean, 0.0, 3.0 * s.mcse_mean);
    EXPECT_NEAR(s.sd, 1.0, 3.0 * s.mcse_sd);
    EXPECT_EQ(d.divergences, 0);
    ASSERT_TRUE(s.rhat.has_value());
    EXPECT_LT(*s.rhat, 1.05);
}

TEST(Hmc, ConjugateNormalPosterior) {
    // Prior N(0, 1), one observation y = 2 with unit noise: posterior N(1, 1/2).
    sae::ParamSpace space;
    space.add("mu", 1);
    const sae::ModelDensity model{space,
                                  [](std::span<const ad::Var> x) {
                                      return -0.5 * ad::square(x[0]) -
                                             0.5 * ad::square(2.0 - x[0]);
                                  },
                                  "conjugate"};
    sae::HmcConfig cfg;
    cfg.warmup = 500;
    cfg.iterations = 1000;
    cfg.seed = 8;
    const auto d = sae::hmc_sample(model, cfg);
    const auto s = sae::summarise("mu", chains_of(d, 0));
    EXPECT_NEAR(s.mean, 1.0, 3.0 * s.mcse_mean);
    EXPECT_NEAR(s.sd, std::sqrt(0.5), 3.0 * s.mcse_sd);
}

TEST(Hmc, CorrelatedGaussianMeans) {
    // AR(1) covariance with rho = 0.6 and mean m_k = k / 3; the precision is tridiagonal.
    const int dim = 10;
    const double rho = 0.6;
    sae::ParamSpace space;
    space.add("x", dim);
    const sae::ModelDensity model{
        space,
        [=](std::span<const ad::Var> x) {
            std::vector<ad::Var> e;
            for (int k = 0; k < dim; ++k) {
                e.push_back(x[static_cast<std::size_t>(k)] - k / 3.0);
            }
            ad::Var q = ad::square(e[0]);
            for (int k = 1; k < dim; ++k) {
                q += ad::square(e[static_cast<std::size_t>(k)] -
                                rho * e[static_cast<std::size_t>(k - 1)]) /
                     (1.0 - rho * rho);
            }
            return -0.5 * q;
        },
        "ar1 gaussian"};
    sae::HmcConfig cfg;
    cfg.warmup = 600;
    cfg.iterations = 1000;
    cfg.seed = 21;
    const auto d = sae::hmc_sample(model, cfg);
    for (int k = 0; k < dim; ++k) {
        const auto s = sae::summarise("x", chains_of(d, static_cast<std::size_t>(k)));
        EXPECT_NEAR(s.mean, k / 3.0, 3.0 * s.mcse_mean) << k;
        EXPECT_NEAR(s.sd, 1.0, 0.15) << k;
    }
}

TEST(Hmc, PositiveTransformRecoversLogNormal) {
    sae::ParamSpace space;
    space.add("sigma", 1, sae::Transform::Positive);
    const sae::ModelDensity model{space,
                                  [](std::span<const ad::Var> x) {
                                      const ad::Var l = ad::log(x[0]);
                                      return -0.5 * l * l - l;
                                  },
                                  "log-normal"};
    sae::HmcConfig cfg;
    cfg.warmup = 500;
    cfg.iterations = 2000;
    cfg.seed = 3;
    const auto d = sae::hmc_sample(model, cfg);
    // median of a standard log-normal is 1
    std::vector<double> all(d.draws.col(0).data(), d.draws.col(0).data() + d.draws.rows());
    EXPECT_NEAR(sae::quantile(all, 0.5), 1.0, 0.08);
    for (double v : all) {
        ASSERT_GT(v, 0.0);
    }
}

TEST(Hmc, SameSeedSameDraws) {
    sae::HmcConfig cfg;
    cfg.warmup = 100;
    cfg.iterations = 50;
    cfg.seed = 99;
    const auto a = sae::hmc_sample(gaussian(2, 1.0, 2.0), cfg);
    cfg.parallel = false;
    const auto b = sae::hmc_sample(gaussian(2, 1.0, 2.0), cfg);
    EXPECT_EQ(a.draws, b.draws);
    EXPECT_EQ(a.names, (std::vector<std::string>{"x[0]", "x[1]"}));
}

TEST(Hmc, NonFiniteEverywhereIsHardError) {
    sae::ParamSpace space;
    space.add("x", 1);
    const sae::ModelDensity model{
        space, [](std::span<const ad::Var>) { return ad::Var{std::nan("")}; }, "broken"};
    sae::HmcConfig cfg;
    cfg.warmup = 10;
    cfg.iterations = 10;
    EXPECT_THROW((void)sae::hmc_sample(model, cfg), sae::NumericalError);
}

TEST(Hmc, InvalidConfigThrows) {
    sae::HmcConfig cfg;
    cfg.target_accept = 1.0;
    EXPECT_THROW((void)sae::hmc_sample(gaussian(1, 0, 1), cfg), sae::ConfigError);
    cfg = {};
    cfg.chains = 0;
    EXPECT_THROW((void)sae::hmc_sample(gaussian(1, 0, 1), cfg), sae::ConfigError);
}

TEST(Diagnostics, IdenticalChainsHaveNoBetweenVariance) {
    // Two copies of a chain whose halves coincide: the between-chain term is zero, so R-hat
    // reduces to sqrt((S - 1) / S) for half length S.
    std::vector<double> half{0.3, -1.2, 0.8, 2.0, -0.4, 0.1, 1.1, -0.9};
    std::vector<double> chain = half;
    chain.insert(chain.end(), half.begin(), half.end());
    const sae::ChainSet chains{chain, chain};
    const double s = static_cast<double>(half.size());
    EXPECT_NEAR(*sae::split_rhat_basic(chains), std::sqrt((s - 1.0) / s), 1e-12);
    EXPECT_NEAR(*sae::split_rhat(chains), std::sqrt((s - 1.0) / s), 1e-12);
}

TEST(Diagnostics, ShiftedChainsFlagged) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z;
    sae::ChainSet chains(2);
    for (int t = 0; t < 500; ++t) {
        chains[0].push_back(-5.0 + z(rng));
        chains[1].push_back(5.0 + z(rng));
    }
    EXPECT_GT(*sae::split_rhat(chains), 1.5);
    EXPECT_GT(*sae::split_rhat_basic(chains), 1.5);
}

TEST(Diagnostics, IidEssNearDrawCount) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> z;
    sae::ChainSet chains(4);
    for (auto &c : chains) {
        for (int t = 0; t < 1000; ++t) {
            c.push_back(z(rng));
        }
    }
    EXPECT_NEAR(sae::ess_bulk(chains), 4000.0, 800.0);
    EXPECT_NEAR(sae::ess_basic(chains), 4000.0, 800.0);
}

TEST(Diagnostics, SingleChainHasNoRhat) {
    const sae::ChainSet chains{{1.0, 2.0, 3.0, 4.0, 5.0, 6.0}};
    EXPECT_FALSE(sae::split_rhat(chains).has_value());
    EXPECT_FALSE(sae::summarise("x", chains).rhat.has_value());
}

TEST(Diagnostics, AutocorrelatedChainHasSmallerEss) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> z;
    sae::ChainSet chains(2);
    for (auto &c : chains) {
        double x = 0.0;
        for (int t = 0; t < 2000; ++t) {
            x = 0.9 * x + z(rng);
            c.push_back(x);
        }
    }
    // AR(1) with phi = 0.9: ESS / N = (1 - phi) / (1 + phi)
    EXPECT_NEAR(sae::ess_basic(chains) / 4000.0, 0.1 / 1.9, 0.03);
}

TEST(Diagnostics, QuantileType7) {
    EXPECT_DOUBLE_EQ(sae::quantile({1, 2, 3, 4}, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(sae::quantile({4, 1, 3, 2}, 0.25), 1.75);
    EXPECT_DOUBLE_EQ(sae::quantile({7}, 0.9), 7.0);
    EXPECT_THROW((void)sae::quantile({}, 0.5), sae::ConfigError);
}
