#include "oracles/oracles.hpp"
#include "sae/error.hpp"
#include "sae/population.hpp"
#include "sae/sampling.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace {

double sum(const std::vector<double> &v) { return std::accumulate(v.begin(), v.end(), 0.0); }

} // namespace

TEST(Midzuno, FourUnitExample) {
    const std::vector<double> sizes{0.4, 0.3, 0.2, 0.1};
    const auto pi = sae::midzuno_inclusion_probs(sizes, 2);
    const std::vector<double> expected{0.6, 1.6 / 3.0, 1.4 / 3.0, 0.4};
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_NEAR(pi[i], expected[i], 1e-12);
    }
    EXPECT_NEAR(sum(pi), 2.0, 1e-12);
    const auto brute = sae::oracle::midzuno_enumerated(sizes, 2);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_NEAR(pi[i], brute[i], 1e-12);
    }
}

TEST(Midzuno, EqualSizesGiveSrs) {
    const std::vector<double> sizes(9, 3.5);
    for (double p : sae::midzuno_inclusion_probs(sizes, 4)) {
        EXPECT_NEAR(p, 4.0 / 9.0, 1e-15);
    }
}

TEST(Midzuno, SkewedFiveUnitsMatchEnumeration) {
    const std::vector<double> sizes{5, 1, 1, 1, 1};
    const auto pi = sae::midzuno_inclusion_probs(sizes, 3);
    const auto brute = sae::oracle::midzuno_enumerated(sae::midzuno_first_draw_probs(sizes), 3);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_NEAR(pi[i], brute[i], 1e-12);
    }
}

TEST(Midzuno, FullSampleIsCertain) {
    const std::vector<double> sizes{1, 2, 3};
    std::vector<std::size_t> certain;
    const auto pi = sae::midzuno_inclusion_probs(sizes, 3, &certain);
    EXPECT_EQ(certain.size(), 3u);
    auto rng = sae::make_stream(9);
    const auto draw = sae::draw_midzuno(sizes, 3, rng);
    EXPECT_EQ(draw.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_DOUBLE_EQ(pi[i], 1.0);
        EXPECT_DOUBLE_EQ(draw.pi[i], 1.0);
        EXPECT_DOUBLE_EQ(draw.weights[i], 1.0);
    }
}

TEST(Midzuno, SampleLargerThanPopulationThrows) {
    const std::vector<double> sizes{1, 2};
    EXPECT_THROW((void)sae::midzuno_inclusion_probs(sizes, 3), sae::DesignError);
    EXPECT_THROW((void)sae::pps_inclusion_probs(sizes, 3), sae::DesignError);
    auto rng = sae::make_stream(1);
    EXPECT_THROW((void)sae::draw_midzuno(sizes, 3, rng), sae::DesignError);
}

TEST(Midzuno, MonteCarloFrequenciesMatchAnalytic) {
    const std::vector<double> sizes{1, 2, 3, 4, 10};
    const auto pi = sae::midzuno_inclusion_probs(sizes, 2);
    const int reps = 100000;
    std::vector<double> hits(5, 0.0);
    auto rng = sae::make_stream(2024);
    for (int r = 0; r < reps; ++r) {
        const auto draw = sae::draw_midzuno(sizes, 2, rng);
        ASSERT_EQ(draw.size(), 2u);
        for (auto pos : draw.positions) {
            hits[pos] += 1.0;
        }
    }
    for (std::size_t i = 0; i < 5; ++i) {
        const double se = std::sqrt(pi[i] * (1.0 - pi[i]) / reps);
        EXPECT_NEAR(hits[i] / reps, pi[i], 3.0 * se) << i;
    }
}

TEST(Midzuno, ExactPpsMonteCarloFrequencies) {
    const std::vector<double> sizes{1, 2, 3, 4, 10, 30};
    const auto pi = sae::pps_inclusion_probs(sizes, 3);
    EXPECT_NEAR(sum(pi), 3.0, 1e-12);
    EXPECT_DOUBLE_EQ(pi[5], 1.0); // 3 * 30 / 50 > 1
    const int reps = 100000;
    std::vector<double> hits(6, 0.0);
    auto rng = sae::make_stream(77);
    for (int r = 0; r < reps; ++r) {
        const auto draw = sae::draw_midzuno_exact(sizes, 3, rng);
        ASSERT_EQ(draw.size(), 3u);
        std::set<std::size_t> distinct(draw.positions.begin(), draw.positions.end());
        ASSERT_EQ(distinct.size(), 3u);
        for (auto pos : draw.positions) {
            hits[pos] += 1.0;
        }
    }
    for (std::size_t i = 0; i < 6; ++i) {
        const double se = std::sqrt(pi[i] * (1.0 - pi[i]) / reps);
        EXPECT_NEAR(hits[i] / reps, pi[i], 3.0 * se + 1e-12) << i;
    }
}

TEST(Midzuno, PpsProbabilitiesProportionalBelowCap) {
    const std::vector<double> sizes{1, 2, 3, 4};
    const auto pi = sae::pps_inclusion_probs(sizes, 2);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_NEAR(pi[i], 2.0 * sizes[i] / 10.0, 1e-15);
    }
}

TEST(Sampling, DrawsAreReproducible) {
    sae::GeneratorConfig c;
    c.areas = 3;
    c.area_size = 200;
    const auto pop = sae::generate_population(c);
    for (auto tag : {sae::DesignTag::SRS, sae::DesignTag::StratifiedSRS,
                     sae::DesignTag::MidzunoPPS, sae::DesignTag::MidzunoExactPPS}) {
        auto a = sae::make_stream(5);
        auto b = sae::make_stream(5);
        const auto da = sae::draw_sample(pop, tag, 60, a);
        EXPECT_EQ(da, sae::draw_sample(pop, tag, 60, b));
        EXPECT_EQ(da.size(), 60u) << sae::to_string(tag);
        for (std::size_t k = 0; k < da.size(); ++k) {
            EXPECT_DOUBLE_EQ(da.weights[k], 1.0 / da.pi[k]);
            EXPECT_EQ(da.unit_ids[k], pop[da.positions[k]].unit_id);
        }
    }
}

TEST(Sampling, StratifiedSrsTakesEqualCounts) {
    sae::GeneratorConfig c;
    c.areas = 4;
    c.area_sizes = {10, 50, 50, 100};
    const auto pop = sae::generate_population(c);
    auto rng = sae::make_stream(11);
    const auto draw = sae::draw_stratified_srs(pop, 5, rng);
    const auto frame = sae::make_sample_frame(pop, draw);
    EXPECT_EQ(frame.area_sample_sizes(), (std::vector<long>{5, 5, 5, 5}));
    for (std::size_t k = 0; k < frame.size(); ++k) {
        const double big_n = static_cast<double>(pop.area_sizes()[static_cast<std::size_t>(
            frame.units[k].area_id)]);
        EXPECT_DOUBLE_EQ(frame.pi[k], 5.0 / big_n);
    }
}

TEST(Sampling, DesignNamesRoundTrip) {
    for (auto tag : {sae::DesignTag::SRS, sae::DesignTag::StratifiedSRS,
                     sae::DesignTag::MidzunoPPS, sae::DesignTag::MidzunoExactPPS}) {
        EXPECT_EQ(sae::design_tag_from_string(sae::to_string(tag)), tag);
    }
    EXPECT_THROW((void)sae::design_tag_from_string("cluster"), sae::ConfigError);
}

TEST(ScaleWeights, EqualWeightsAreaScalingGivesOnes) {
    const std::vector<double> w{3, 3, 3, 3, 3};
    const std::vector<int> g{0, 0, 1, 1, 1};
    for (double v : sae::scale_weights(w, g, sae::WeightScaling::SumToAreaSampleSize)) {
        EXPECT_DOUBLE_EQ(v, 1.0);
    }
}

TEST(ScaleWeights, KishTarget) {
    const std::vector<double> w{1, 1, 2};
    const std::vector<int> g{0, 0, 0};
    const auto out = sae::scale_weights(w, g, sae::WeightScaling::EffectiveSampleSize);
    EXPECT_NEAR(sum(out), 16.0 / 6.0, 1e-14);
}

TEST(ScaleWeights, UnscaledIsBitwiseIdentity) {
    const std::vector<double> w{0.1, 1.0 / 3.0, 7.25};
    const std::vector<int> g{0, 1, 0};
    EXPECT_EQ(sae::scale_weights(w, g, sae::WeightScaling::Unscaled), w);
}

TEST(ScaleWeights, TotalAndAreaSums) {
    const std::vector<double> w{1, 2, 3, 4, 10};
    const std::vector<int> g{0, 0, 1, 1, 1};
    EXPECT_NEAR(sum(sae::scale_weights(w, g, sae::WeightScaling::SumToTotalSampleSize)), 5.0,
                1e-14);
    const auto area = sae::scale_weights(w, g, sae::WeightScaling::SumToAreaSampleSize);
    EXPECT_NEAR(area[0] + area[1], 2.0, 1e-14);
    EXPECT_NEAR(area[2] + area[3] + area[4], 3.0, 1e-14);
}

TEST(ScaleWeights, InvariantToRawWeightMultiple) {
    const std::vector<double> w{1, 2, 3, 4, 10};
    std::vector<double> w10;
    for (double v : w) {
        w10.push_back(10.0 * v);
    }
    const std::vector<int> g{0, 0, 1, 1, 1};
    for (auto m : {sae::WeightScaling::SumToAreaSampleSize, sae::WeightScaling::EffectiveSampleSize,
                   sae::WeightScaling::SumToTotalSampleSize}) {
        const auto a = sae::scale_weights(w, g, m);
        const auto b = sae::scale_weights(w10, g, m);
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_NEAR(a[i], b[i], 1e-14);
        }
    }
}

TEST(ScaleWeights, EmptyGroupThrows) {
    const std::vector<double> w{1, 2};
    const std::vector<int> g{0, 2};
    EXPECT_THROW((void)sae::scale_weights(w, g, sae::WeightScaling::SumToAreaSampleSize),
                 sae::ConfigError);
    EXPECT_THROW((void)sae::weight_scaling_from_string("sum-to-one"), sae::ConfigError);
}

TEST(Informativeness, EqualWeightsGiveEqualMeans) {
    const std::vector<double> y{0, 1, 1, 0, 1};
    const std::vector<double> w(5, 4.0);
    const auto r = sae::informativeness_check(y, w);
    EXPECT_TRUE(r.sufficient);
    EXPECT_EQ(r.weighted_mean, r.unweighted_mean);
    EXPECT_FALSE(r.informative);
}

TEST(Informativeness, SingleUnitIsInsufficient) {
    const std::vector<double> y{1};
    const std::vector<double> w{2};
    const auto r = sae::informativeness_check(y, w);
    EXPECT_FALSE(r.sufficient);
    EXPECT_EQ(r.note, "insufficient sample");
}

TEST(Informativeness, FlagsInformativeDesign) {
    sae::GeneratorConfig c;
    c.c1 = 1.0;
    const auto pop = sae::generate_population(c);
    int flagged = 0;
    for (int r = 0; r < 100; ++r) {
        auto rng = sae::make_stream(500, {static_cast<std::uint64_t>(r)});
        const auto draw = sae::draw_midzuno_exact(pop, 1000, rng);
        const auto frame = sae::make_sample_frame(pop, draw);
        flagged += sae::informativeness_check(frame.y_binary(), frame.weights).informative ? 1 : 0;
    }
    EXPECT_GE(flagged, 95);
}
