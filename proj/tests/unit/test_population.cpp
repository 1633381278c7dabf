#include "sae/error.hpp"
#include "sae/population.hpp"
#include "sae/sampling.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace {

sae::GeneratorConfig small_config() {
    sae::GeneratorConfig c;
    c.areas = 4;
    c.area_size = 250;
    return c;
}

// Spearman correlation between two samples (average ranks for ties).
double spearman(const std::vector<double> &a, const std::vector<double> &b) {
    auto ranks = [](const std::vector<double> &v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return v[x] < v[y]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) {
                ++j;
            }
            for (std::size_t k = i; k <= j; ++k) {
                r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
            }
            i = j + 1;
        }
        return r;
    };
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    return saa > 0.0 && sbb > 0.0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

} // namespace

TEST(Population, GeneratorIsDeterministic) {
    auto c = small_config();
    c.seed = 42;
    EXPECT_EQ(sae::generate_population(c), sae::generate_population(c));
    c.seed = 43;
    auto other = sae::generate_population(c);
    c.seed = 42;
    EXPECT_NE(sae::generate_population(c), other);
}

TEST(Population, AreaSizesPartitionUnits) {
    auto c = small_config();
    c.area_sizes = {10, 20, 30, 40};
    const auto pop = sae::generate_population(c);
    EXPECT_EQ(pop.size(), 100u);
    EXPECT_EQ(pop.area_sizes(), (std::vector<long>{10, 20, 30, 40}));
    for (const auto &u : pop.units()) {
        EXPECT_GT(u.size_value, 0.0);
        EXPECT_TRUE(u.y_binary == 0 || u.y_binary == 1);
    }
}

TEST(Population, SymmetricCaseGivesHalf) {
    auto c = small_config();
    c.areas = 2;
    c.area_size = 20000;
    c.sigma_u = 0.0;
    std::fill(c.beta.begin(), c.beta.end(), 0.0);
    const auto pop = sae::generate_population(c);
    for (double p : pop.area_proportions()) {
        // 5 binomial standard errors at N = 20000
        EXPECT_NEAR(p, 0.5, 5.0 * std::sqrt(0.25 / 20000.0));
    }
}

TEST(Population, NoninformativeSizesIndependentOfY) {
    auto c = small_config();
    c.areas = 1;
    c.area_size = 40000;
    c.c1 = 0.0;
    c.log_size_step = 0.0;
    const auto pop = sae::generate_population(c);
    double s1 = 0, s0 = 0, n1 = 0, n0 = 0;
    for (const auto &u : pop.units()) {
        (u.y_binary ? s1 : s0) += std::log(u.size_value);
        (u.y_binary ? n1 : n0) += 1;
    }
    // difference of mean log size: sd 0.5 per unit
    EXPECT_NEAR(s1 / n1 - s0 / n0, 0.0, 5.0 * 0.5 * std::sqrt(1.0 / n1 + 1.0 / n0));
}

TEST(Population, InformativenessIncreasesWithC1) {
    // Average Spearman correlation between size and y over replicated populations.
    const std::vector<double> c1s{0.0, 0.5, 1.0};
    std::vector<double> mean_rho;
    for (double c1 : c1s) {
        double total = 0.0;
        const int reps = 200;
        for (int r = 0; r < reps; ++r) {
            sae::GeneratorConfig c;
            c.areas = 2;
            c.area_size = 100;
            c.c1 = c1;
            c.seed = 1000 + static_cast<std::uint64_t>(r);
            const auto pop = sae::generate_population(c);
            std::vector<double> size, y;
            for (const auto &u : pop.units()) {
                size.push_back(u.size_value);
                y.push_back(u.y_binary);
            }
            total += spearman(size, y);
        }
        mean_rho.push_back(total / reps);
    }
    EXPECT_LT(mean_rho[0], mean_rho[1]);
    EXPECT_LT(mean_rho[1], mean_rho[2]);
    EXPECT_NEAR(mean_rho[0], 0.0, 0.02);
}

TEST(Population, InvalidConfigThrows) {
    auto c = small_config();
    c.beta = {1.0, 2.0};
    EXPECT_THROW((void)sae::generate_population(c), sae::ConfigError);
    c = small_config();
    c.area_sizes = {1, 2};
    EXPECT_THROW((void)sae::generate_population(c), sae::ConfigError);
    c = small_config();
    c.sigma_u = -1.0;
    EXPECT_THROW((void)sae::generate_population(c), sae::ConfigError);
}

TEST(Population, ConstructorRejectsBadUnits) {
    std::vector<sae::Unit> units{{0, 0, {0}, 1, 0.0, -1.0}};
    EXPECT_THROW(sae::Population(units, {"sex"}, {2}), sae::ConfigError);
    EXPECT_THROW(sae::Population({}, {"sex"}, {2}), sae::ConfigError);
    // area 1 empty while area 2 has units
    std::vector<sae::Unit> gap{{0, 0, {0}, 1, 0.0, 1.0}, {1, 2, {1}, 0, 0.0, 1.0}};
    EXPECT_THROW(sae::Population(gap, {"sex"}, {2}), sae::ConfigError);
}

TEST(Population, SingleCellHoldsEveryUnit) {
    std::vector<sae::Unit> units;
    for (int i = 0; i < 7; ++i) {
        units.push_back({i, 0, {0}, i % 2, 0.0, 1.0});
    }
    const sae::Population pop(units, {"x"}, {1});
    sae::SampleDraw none;
    const auto cells = sae::index_cells(pop, none);
    ASSERT_EQ(cells.size(), 1u);
    EXPECT_EQ(cells[0].population_count, 7);
    EXPECT_EQ(cells[0].sample_count, 0);
}

TEST(Population, HandCountedCells) {
    // 2 areas x 2 sex levels, 8 units.
    //   area 0: sex 0 x3, sex 1 x1; area 1: sex 0 x1, sex 1 x3
    std::vector<sae::Unit> units{
        {0, 0, {0}, 1, 0.0, 1.0}, {1, 0, {0}, 0, 0.0, 1.0}, {2, 0, {0}, 1, 0.0, 1.0},
        {3, 0, {1}, 0, 0.0, 1.0}, {4, 1, {0}, 1, 0.0, 1.0}, {5, 1, {1}, 1, 0.0, 1.0},
        {6, 1, {1}, 0, 0.0, 1.0}, {7, 1, {1}, 0, 0.0, 1.0},
    };
    const sae::Population pop(units, {"sex"}, {2});
    sae::SampleDraw draw;
    draw.positions = {0, 2, 5, 6};
    draw.unit_ids = {0, 2, 5, 6};
    draw.pi = {0.5, 0.5, 0.5, 0.5};
    draw.weights = {2, 2, 2, 2};
    const auto cells = sae::index_cells(pop, draw);
    ASSERT_EQ(cells.size(), 4u);
    const std::vector<long> pop_counts{3, 1, 1, 3};
    const std::vector<long> sample_counts{2, 0, 0, 2};
    const std::vector<long> positives{2, 0, 0, 1};
    long total = 0;
    for (std::size_t c = 0; c < 4; ++c) {
        EXPECT_EQ(cells[c].population_count, pop_counts[c]) << c;
        EXPECT_EQ(cells[c].sample_count, sample_counts[c]) << c;
        EXPECT_EQ(cells[c].sample_positives, positives[c]) << c;
        total += cells[c].population_count;
    }
    EXPECT_EQ(total, 8);
}

TEST(Population, CellsPartitionGeneratedPopulation) {
    const auto pop = sae::generate_population(small_config());
    auto rng = sae::make_stream(3);
    const auto draw = sae::draw_srs(pop, 100, rng);
    const auto cells = sae::index_cells(pop, draw);
    long n_pop = 0, n_sample = 0;
    for (const auto &c : cells) {
        EXPECT_GE(c.population_count, c.sample_count);
        n_pop += c.population_count;
        n_sample += c.sample_count;
    }
    EXPECT_EQ(n_pop, static_cast<long>(pop.size()));
    EXPECT_EQ(n_sample, 100);
}

TEST(Population, DesignRowIsTreatmentCoded) {
    const std::vector<int> levels{3, 2};
    EXPECT_EQ(sae::design_width(levels), 4);
    const std::vector<int> key{2, 1};
    const auto row = sae::design_row(key, levels);
    EXPECT_EQ(row.size(), 4);
    EXPECT_DOUBLE_EQ(row(0), 1.0);
    EXPECT_DOUBLE_EQ(row(1), 0.0);
    EXPECT_DOUBLE_EQ(row(2), 1.0);
    EXPECT_DOUBLE_EQ(row(3), 1.0);
}
