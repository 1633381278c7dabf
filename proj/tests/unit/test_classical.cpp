#include "oracles/oracles.hpp"
#include "sae/adjusted_likelihood.hpp"
#include "sae/direct.hpp"
#include "sae/error.hpp"
#include "sae/nested_error.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

namespace cl = sae::classical;

namespace {

struct NerData {
    Eigen::VectorXd y;
    Eigen::MatrixXd X;
    std::vector<int> area;
    Eigen::MatrixXd xbar_pop;
    std::vector<long> big_n;
};

// y = 1 + 2 x + v_i + e with x ~ N(area / m, 1).
NerData simulate_ner(int m, int n_per_area, double s2v, double s2e, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    NerData d;
    const int n = m * n_per_area;
    d.y.resize(n);
    d.X.resize(n, 2);
    d.xbar_pop.resize(m, 2);
    for (int a = 0; a < m; ++a) {
        const double v = std::sqrt(s2v) * z(rng);
        for (int j = 0; j < n_per_area; ++j) {
            const int k = a * n_per_area + j;
            const double x = static_cast<double>(a) / m + z(rng);
            d.X(k, 0) = 1.0;
            d.X(k, 1) = x;
            d.y(k) = 1.0 + 2.0 * x + v + std::sqrt(s2e) * z(rng);
            d.area.push_back(a);
        }
        d.xbar_pop(a, 0) = 1.0;
        d.xbar_pop(a, 1) = static_cast<double>(a) / m + 0.1;
        d.big_n.push_back(10L * n_per_area);
    }
    return d;
}

} // namespace

TEST(Ner, ZeroAreaVarianceRecoversOls) {
    const auto d = simulate_ner(50, 100, 0.0, 1.0, 1);
    const auto fit = cl::fit_ner(d.y, d.X, d.area, 50);
    EXPECT_LE(fit.sigma2_v, 0.05);
    const Eigen::VectorXd ols = d.X.colPivHouseholderQr().solve(d.y);
    for (int k = 0; k < 2; ++k) {
        EXPECT_NEAR(fit.beta(k), ols(k), 2.0 * std::sqrt(fit.beta_cov(k, k)));
    }
}

TEST(Ner, KnownComponentsMatchDenseGls) {
    // 2 areas x 3 units
    Eigen::VectorXd y(6);
    y << 1.2, 0.4, 2.2, -0.3, 0.9, 0.1;
    Eigen::MatrixXd X(6, 2);
    X << 1, 0.5, 1, -1.0, 1, 2.0, 1, 0.3, 1, 1.1, 1, -0.7;
    const std::vector<int> area{0, 0, 0, 1, 1, 1};
    Eigen::MatrixXd xbar_pop(2, 2);
    xbar_pop << 1, 0.4, 1, 0.2;
    const std::vector<long> big_n{10, 7};
    const auto fit = cl::fit_ner_known(y, X, area, 2, 0.7, 1.3);
    const auto beta = sae::oracle::dense_gls_beta(y, X, area, 0.7, 1.3);
    EXPECT_LT((fit.beta - beta).lpNorm<Eigen::Infinity>(), 1e-10);
    const auto means = cl::blup_area_means(fit, xbar_pop, big_n);
    const auto dense = sae::oracle::dense_blup_means(y, X, area, 2, 0.7, 1.3, xbar_pop, big_n);
    EXPECT_LT((means - dense).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(Ner, MomentEstimatesUnbiasedOnAverage) {
    double s2v = 0.0;
    double s2e = 0.0;
    const int reps = 100;
    for (int r = 0; r < reps; ++r) {
        const auto d = simulate_ner(40, 20, 1.0, 4.0, 100 + static_cast<std::uint64_t>(r));
        const auto fit = cl::fit_ner(d.y, d.X, d.area, 40);
        s2v += fit.sigma2_v;
        s2e += fit.sigma2_e;
    }
    EXPECT_NEAR(s2v / reps, 1.0, 0.2);
    EXPECT_NEAR(s2e / reps, 4.0, 0.8);
}

TEST(Ner, RankDeficientDesignListsColumns) {
    Eigen::MatrixXd X(4, 3);
    X << 1, 1, 2, 1, 2, 4, 1, 3, 6, 1, 4, 8;
    const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(4, 0.0, 1.0);
    const std::vector<int> area{0, 0, 1, 1};
    try {
        (void)cl::fit_ner(y, X, area, 2);
        FAIL() << "expected ConfigError";
    } catch (const sae::ConfigError &e) {
        EXPECT_NE(std::string{e.what()}.find("collinear"), std::string::npos);
    }
}

TEST(Blup, CensusAreaEqualsSampleMean) {
    const auto d = simulate_ner(3, 5, 1.0, 1.0, 7);
    const auto fit = cl::fit_ner_known(d.y, d.X, d.area, 3, 1.0, 1.0);
    std::vector<long> big_n{5, 50, 50};
    // a census area's covariate mean is its sample mean
    Eigen::MatrixXd xbar_pop = d.xbar_pop;
    xbar_pop.row(0) = d.X.topRows(5).colwise().mean();
    const auto means = cl::blup_area_means(fit, xbar_pop, big_n);
    EXPECT_NEAR(means(0), d.y.head(5).mean(), 1e-12);
}

TEST(Blup, ZeroAreaVarianceIsSynthetic) {
    const auto d = simulate_ner(3, 5, 1.0, 1.0, 8);
    const auto fit = cl::fit_ner_known(d.y, d.X, d.area, 3, 0.0, 1.0);
    const auto means = cl::blup_area_means(fit, d.xbar_pop, d.big_n);
    for (int a = 0; a < 3; ++a) {
        const double n = 5.0;
        const double big_n = static_cast<double>(d.big_n[static_cast<std::size_t>(a)]);
        const Eigen::RowVectorXd xs = d.X.middleRows(a * 5, 5).colwise().mean();
        const double expected = (n * d.y.segment(a * 5, 5).mean() +
                                 (big_n * d.xbar_pop.row(a) - n * xs).dot(fit.beta)) /
                                big_n;
        EXPECT_NEAR(means(a), expected, 1e-12);
    }
}

TEST(Blup, ThreeAreaHandEvaluation) {
    // Intercept-only model, one unit per area plus a second in area 2.
    Eigen::VectorXd y(4);
    y << 1.0, 3.0, 2.0, 4.0;
    const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(4, 1);
    const std::vector<int> area{0, 1, 2, 2};
    // s2v = 1, s2e = 1: gamma = 1/2, 1/2, 2/3. GLS weights n_i / (s2e + n_i s2v) = 1/2, 1/2, 2/3.
    const double beta = (0.5 * 1.0 + 0.5 * 3.0 + (2.0 / 3.0) * 3.0) / (0.5 + 0.5 + 2.0 / 3.0);
    const auto fit = cl::fit_ner_known(y, X, area, 3, 1.0, 1.0);
    EXPECT_NEAR(fit.beta(0), beta, 1e-12);
    const Eigen::MatrixXd xbar_pop = Eigen::MatrixXd::Ones(3, 1);
    const std::vector<long> big_n{4, 4, 4};
    const auto means = cl::blup_area_means(fit, xbar_pop, big_n);
    const double v0 = 0.5 * (1.0 - beta);
    const double v1 = 0.5 * (3.0 - beta);
    const double v2 = (2.0 / 3.0) * (3.0 - beta);
    EXPECT_NEAR(means(0), (1.0 + 3.0 * (beta + v0)) / 4.0, 1e-12);
    EXPECT_NEAR(means(1), (3.0 + 3.0 * (beta + v1)) / 4.0, 1e-12);
    EXPECT_NEAR(means(2), (6.0 + 2.0 * (beta + v2)) / 4.0, 1e-12);
}

TEST(Blup, MissingPopulationMeansThrow) {
    const auto d = simulate_ner(3, 5, 1.0, 1.0, 9);
    const auto fit = cl::fit_ner_known(d.y, d.X, d.area, 3, 1.0, 1.0);
    EXPECT_THROW((void)cl::blup_area_means(fit, d.xbar_pop.topRows(2), d.big_n), sae::ConfigError);
}

TEST(PseudoEblup, EqualWeightsReduceToGls) {
    const auto d = simulate_ner(10, 8, 1.0, 2.0, 11);
    const std::vector<double> w(d.y.size(), 3.0);
    const auto ps = cl::fit_pseudo_eblup(d.y, d.X, w, d.area, 10, 1.0, 2.0);
    const auto gls = cl::fit_ner_known(d.y, d.X, d.area, 10, 1.0, 2.0);
    EXPECT_LT((ps.beta_w - gls.beta).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(PseudoEblup, MatchesExplicitWeightedFormula) {
    const auto d = simulate_ner(6, 7, 0.5, 1.5, 12);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(1.0, 5.0);
    std::vector<double> w;
    for (Eigen::Index k = 0; k < d.y.size(); ++k) {
        w.push_back(u(rng));
    }
    const auto ps = cl::fit_pseudo_eblup(d.y, d.X, w, d.area, 6, 0.5, 1.5);
    const auto ref = sae::oracle::you_rao_beta(d.y, d.X, w, d.area, 6, 0.5, 1.5);
    EXPECT_LT((ps.beta_w - ref).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(PseudoEblup, HalfShrinkageIsMidpoint) {
    const auto d = simulate_ner(4, 5, 1.0, 1.0, 13);
    const std::vector<double> w(d.y.size(), 1.0);
    // delta2 = 1/5 with equal weights, so s2v = s2e / 5 gives gamma = 1/2.
    const auto ps = cl::fit_pseudo_eblup(d.y, d.X, w, d.area, 4, 0.2, 1.0);
    const auto theta = cl::pseudo_eblup_means(ps, d.xbar_pop);
    for (int a = 0; a < 4; ++a) {
        EXPECT_NEAR(ps.gamma_w(a), 0.5, 1e-14);
        const double expected = 0.5 * ps.ybar_w(a) +
                                (d.xbar_pop.row(a) - 0.5 * ps.xbar_w.row(a)).dot(ps.beta_w);
        EXPECT_NEAR(theta(a), expected, 1e-12);
    }
}

TEST(PseudoEblup, EstimatedComponentsComeFromNer) {
    const auto d = simulate_ner(8, 10, 1.0, 2.0, 14);
    std::vector<double> w(d.y.size(), 2.0);
    w[0] = 5.0;
    const auto ps = cl::fit_pseudo_eblup(d.y, d.X, w, d.area, 8);
    const auto ner = cl::fit_ner(d.y, d.X, d.area, 8);
    EXPECT_DOUBLE_EQ(ps.sigma2_v, ner.sigma2_v);
    EXPECT_DOUBLE_EQ(ps.sigma2_e, ner.sigma2_e);
}

TEST(Guadarrama, ShrinkageLimits) {
    Eigen::VectorXd beta(2);
    beta << 0.5, 2.0;
    Eigen::VectorXd x(2);
    x << 1.0, 0.3;
    Eigen::VectorXd xbar(2);
    xbar << 1.0, 0.6;
    EXPECT_DOUBLE_EQ(cl::guadarrama_predict(beta, 0.0, x, 4.0, xbar), 0.5 + 0.6);
    EXPECT_NEAR(cl::guadarrama_predict(beta, 1.0, x, 4.0, xbar), 1.1 + (4.0 - 1.7), 1e-15);
    // gamma = 0.25, hand value 1.1 + 0.25 * 2.3
    EXPECT_NEAR(cl::guadarrama_predict(beta, 0.25, x, 4.0, xbar), 1.675, 1e-15);
}

TEST(Pfeffermann, ZeroSlopeIsStandardPredictor) {
    const auto d = simulate_ner(5, 6, 1.0, 1.0, 15);
    const auto fit = cl::fit_ner_known(d.y, d.X, d.area, 5, 1.0, 1.0);
    const auto corrected = cl::pfeffermann_corrected_mean(fit, 0.0, d.xbar_pop, d.big_n);
    for (int a = 0; a < 5; ++a) {
        const double big_n = static_cast<double>(d.big_n[static_cast<std::size_t>(a)]);
        const double n = 6.0;
        const double theta = fit.vtilde(a) + d.xbar_pop.row(a).dot(fit.beta);
        const double direct =
            fit.ybar(a) + (d.xbar_pop.row(a) - fit.xbar.row(a)).dot(fit.beta);
        EXPECT_NEAR(corrected(a), ((big_n - n) * theta + n * direct) / big_n, 1e-12);
    }
    std::vector<long> census(5, 6);
    const auto at_census = cl::pfeffermann_corrected_mean(fit, 0.7, d.xbar_pop, census);
    for (int a = 0; a < 5; ++a) {
        EXPECT_NEAR(at_census(a),
                    fit.ybar(a) + (d.xbar_pop.row(a) - fit.xbar.row(a)).dot(fit.beta), 1e-12);
    }
}

TEST(WeightModel, RecoversSlopeOnY) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    const int n = 4000;
    Eigen::VectorXd y(n);
    Eigen::MatrixXd X(n, 2);
    std::vector<double> w(n);
    for (int k = 0; k < n; ++k) {
        X(k, 0) = 1.0;
        X(k, 1) = z(rng);
        y(k) = X(k, 1) + z(rng);
        w[static_cast<std::size_t>(k)] = std::exp(1.0 + 0.3 * X(k, 1) - 0.5 * y(k) + 0.1 * z(rng));
    }
    EXPECT_NEAR(cl::weight_model_b(w, y, X), -0.5, 0.01);
}

TEST(Malec, UnitWeightsGiveBinomial) {
    const std::vector<cl::MalecCell> cells{{3, 10, 0.4, 1.0, 1.0}, {1, 4, 0.2, 1.0, 1.0}};
    const double binom = 3 * std::log(0.4) + 7 * std::log(0.6) + std::log(0.2) + 3 * std::log(0.8);
    EXPECT_NEAR(cl::malec_adjusted_loglik(cells), binom, 1e-13);
}

TEST(Malec, EqualWeightsShiftByConstant) {
    const double c = 3.0;
    for (double p : {0.2, 0.5, 0.7}) {
        const std::vector<cl::MalecCell> base{{3, 10, p, 1.0, 1.0}};
        const std::vector<cl::MalecCell> scaled{{3, 10, p, c, c}};
        EXPECT_NEAR(cl::malec_adjusted_loglik(scaled) - cl::malec_adjusted_loglik(base),
                    10.0 * std::log(c), 1e-12);
    }
}

TEST(Malec, HandCase) {
    const std::vector<cl::MalecCell> cells{{1, 2, 0.5, 2.0, 1.0}};
    EXPECT_NEAR(cl::malec_adjusted_loglik(cells), -2.0 * std::log(2.0) - 2.0 * std::log(0.75),
                1e-14);
}

TEST(Malec, ProbabilityOutsideUnitIntervalThrows) {
    const std::vector<cl::MalecCell> cells{{1, 2, 1.0, 2.0, 1.0}};
    EXPECT_THROW((void)cl::malec_adjusted_loglik(cells), sae::DomainError);
}

TEST(Malec, GroupWeightMeans) {
    const std::vector<double> y{1, 0, 1, 0, 1};
    const std::vector<double> w{2, 4, 6, 1, 3};
    const std::vector<int> g{0, 0, 0, 1, 1};
    const auto gm = cl::group_weight_means(y, w, g, 3);
    EXPECT_DOUBLE_EQ(gm.wbar1[0], 4.0);
    EXPECT_DOUBLE_EQ(gm.wbar0[0], 4.0);
    EXPECT_DOUBLE_EQ(gm.wbar1[1], 3.0);
    EXPECT_DOUBLE_EQ(gm.wbar0[1], 1.0);
    EXPECT_DOUBLE_EQ(gm.wbar1[2], 0.0);
}

TEST(PseudoEmpirical, EqualWeightsMeanIsSampleMean) {
    const std::vector<double> y{0, 1, 1, 0, 1, 1};
    const std::vector<double> w(6, 2.0);
    auto rng = sae::make_stream(4);
    const auto th = cl::bayes_pseudo_empirical(y, w, 0.0, 100000, rng);
    const double mean = std::accumulate(th.begin(), th.end(), 0.0) / th.size();
    EXPECT_NEAR(mean, 4.0 / 6.0, 0.005);
}

TEST(PseudoEmpirical, MeanIsHajek) {
    const std::vector<double> y{0, 1, 1, 0, 1, 0, 0};
    const std::vector<double> w{1, 5, 2, 3, 1, 8, 2};
    const std::vector<int> area(7, 0);
    const double hajek = *sae::direct::hajek_mean(y, w, area, 1)[0];
    auto rng = sae::make_stream(5);
    const auto th = cl::bayes_pseudo_empirical(y, w, 0.0, 100000, rng);
    double mean = 0.0;
    double sq = 0.0;
    for (double t : th) {
        mean += t;
        sq += t * t;
    }
    mean /= th.size();
    const double sd = std::sqrt(sq / th.size() - mean * mean);
    EXPECT_NEAR(mean, hajek, 4.0 * sd / std::sqrt(static_cast<double>(th.size())));
}

TEST(PseudoEmpirical, ConstantResponse) {
    const std::vector<double> y(5, 1.0);
    const std::vector<double> w{1, 2, 3, 4, 5};
    auto rng = sae::make_stream(6);
    for (double t : cl::bayes_pseudo_empirical(y, w, 0.5, 200, rng)) {
        EXPECT_NEAR(t, 1.0, 1e-12);
    }
    EXPECT_THROW((void)cl::bayes_pseudo_empirical(y, w, -5.0, 10, rng), sae::ConfigError);
}
