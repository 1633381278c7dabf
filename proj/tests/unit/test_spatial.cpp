#include "sae/bayes_models.hpp"
#include "sae/error.hpp"
#include "sae/spatial.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

namespace sp = sae::spatial;

namespace {

// Dense log N(u | 0, tau (D - alpha W)^{-1}).
double dense_car_logpdf(const sp::Adjacency &adj, const std::vector<double> &u, double alpha,
                        double tau) {
    const Eigen::MatrixXd q = sp::car_precision(adj, alpha, tau);
    const Eigen::Map<const Eigen::VectorXd> v(u.data(), static_cast<Eigen::Index>(u.size()));
    const Eigen::LLT<Eigen::MatrixXd> llt(q);
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return 0.5 * logdet - 0.5 * v.dot(q * v) -
           0.5 * static_cast<double>(u.size()) * std::log(2.0 * std::numbers::pi);
}

sp::Adjacency two_component_graph() {
    // 0-1-2 path, 3-4 pair, 5 island
    const std::vector<std::pair<int, int>> e{{0, 1}, {2, 1}, {1, 0}, {3, 4}};
    return sp::Adjacency(6, e);
}

} // namespace

TEST(Adjacency, MergesDuplicatesAndReversals) {
    const auto adj = two_component_graph();
    EXPECT_EQ(adj.size(), 6);
    EXPECT_EQ(adj.edges().size(), 3u);
    EXPECT_EQ(adj.degree(1), 2);
    EXPECT_EQ(adj.islands(), std::vector<int>{5});
    const auto d = adj.car_diagonal();
    EXPECT_DOUBLE_EQ(d(5), 1.0);
    EXPECT_DOUBLE_EQ(d(1), 2.0);
    const auto w = adj.matrix();
    EXPECT_EQ(w, w.transpose());
    EXPECT_DOUBLE_EQ(w.sum(), 6.0);
}

TEST(Adjacency, RejectsBadEdges) {
    const std::vector<std::pair<int, int>> loop{{1, 1}};
    EXPECT_THROW(sp::Adjacency(3, loop), sae::ConfigError);
    const std::vector<std::pair<int, int>> outside{{0, 3}};
    EXPECT_THROW(sp::Adjacency(3, outside), sae::ConfigError);
}

TEST(Adjacency, LatticeAndComponents) {
    const auto adj = sp::make_lattice_adjacency(20);
    EXPECT_EQ(adj.size(), 20);
    EXPECT_TRUE(adj.islands().empty());
    EXPECT_EQ(sp::connected_components(adj).size(), 1u);
    // 5 x 4 grid (near-square): 4*4 horizontal + 5*3 vertical edges or the transpose
    EXPECT_EQ(adj.edges().size(), 31u);
    const auto comps = sp::connected_components(two_component_graph());
    ASSERT_EQ(comps.size(), 3u);
    EXPECT_EQ(comps[0], (std::vector<int>{0, 1, 2}));
    EXPECT_EQ(comps[1], (std::vector<int>{3, 4}));
    EXPECT_EQ(comps[2], (std::vector<int>{5}));
}

TEST(Car, LogDensityMatchesDense) {
    const auto adj = sp::make_lattice_adjacency(9);
    const sp::CarPrior prior(adj);
    const std::vector<double> u{0.3, -0.2, 1.0, 0.5, -1.1, 0.0, 0.7, 0.2, -0.4};
    for (double alpha : {-0.8, 0.0, 0.5, 0.95}) {
        for (double tau : {0.3, 2.0}) {
            EXPECT_NEAR(prior.log_density(u, alpha, tau), dense_car_logpdf(adj, u, alpha, tau),
                        1e-10)
                << alpha << " " << tau;
        }
    }
}

TEST(Car, ZeroAlphaDecouples) {
    const auto adj = two_component_graph();
    const sp::CarPrior prior(adj);
    const std::vector<double> u{0.1, 0.4, -0.6, 1.2, 0.3, -0.9};
    const auto d = adj.car_diagonal();
    double expected = 0.0;
    for (int i = 0; i < 6; ++i) {
        const double var = 1.7 / d(i);
        expected += -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * u[i] * u[i] / var;
    }
    EXPECT_NEAR(prior.log_density(u, 0.0, 1.7), expected, 1e-12);
}

TEST(Car, AutodiffMatchesDouble) {
    const auto adj = sp::make_lattice_adjacency(6);
    const sp::CarPrior prior(adj);
    const std::vector<double> u{0.3, -0.2, 1.0, 0.5, -1.1, 0.0};
    sae::ad::tape().clear();
    std::vector<sae::ad::Var> uv;
    for (double v : u) {
        uv.push_back(sae::ad::Var::variable(v));
    }
    const auto alpha = sae::ad::Var::variable(0.4);
    const auto tau = sae::ad::Var::variable(0.8);
    const auto lp = prior.log_density(uv, alpha, tau);
    EXPECT_NEAR(lp.value(), prior.log_density(u, 0.4, 0.8), 1e-12);
    sae::ad::tape().backward(lp.index());
    const double h = 1e-6;
    const double d_alpha =
        (prior.log_density(u, 0.4 + h, 0.8) - prior.log_density(u, 0.4 - h, 0.8)) / (2 * h);
    EXPECT_NEAR(sae::ad::tape().adjoint(alpha.index()), d_alpha, 1e-6);
}

TEST(Car, OutOfRangeThrows) {
    const sp::CarPrior prior(sp::make_lattice_adjacency(4));
    const std::vector<double> u(4, 0.0);
    EXPECT_THROW((void)prior.log_density(u, 1.0, 1.0), sae::DomainError);
    EXPECT_THROW((void)prior.log_density(u, 0.5, 0.0), sae::DomainError);
}

TEST(Car, EigenvaluesWithinUnitInterval) {
    const auto ev = sp::car_eigenvalues(sp::make_lattice_adjacency(12));
    EXPECT_NEAR(ev.maxCoeff(), 1.0, 1e-10);
    EXPECT_GE(ev.minCoeff(), -1.0 - 1e-10);
}

TEST(Icar, QuadraticFormAndConditional) {
    const auto adj = two_component_graph();
    const std::vector<double> u{1.0, 2.0, 4.0, 0.0, 3.0, 7.0};
    EXPECT_DOUBLE_EQ(sp::icar_quadratic_form(u, adj), 1.0 + 4.0 + 9.0);
    const std::vector<double> flat{5.0, 2.5, 5.0, 0.0, 0.0, 0.0};
    const auto [mean, var] = sp::icar_conditional(flat, adj, 1, 0.8);
    EXPECT_DOUBLE_EQ(mean, 5.0);
    EXPECT_DOUBLE_EQ(var, 0.4);
    EXPECT_THROW((void)sp::icar_conditional(flat, adj, 5, 1.0), sae::ConfigError);
}

TEST(Icar, BasisSumsToZeroPerComponent) {
    const auto adj = two_component_graph();
    const sp::IcarBasis basis(adj);
    EXPECT_EQ(basis.component_count(), 3u);
    // 6 areas - 3 components; the island carries no free coordinate
    EXPECT_EQ(basis.free_dimension(), 3u);
    const std::vector<double> free{0.4, -1.3, 2.2};
    const auto u = basis.expand(free);
    ASSERT_EQ(u.size(), 6u);
    EXPECT_NEAR(u[0] + u[1] + u[2], 0.0, 1e-14);
    EXPECT_NEAR(u[3] + u[4], 0.0, 1e-14);
    EXPECT_DOUBLE_EQ(u[5], 0.0);
}

TEST(Kernel, DiagonalAndOffDiagonal) {
    const std::vector<double> w{0.0, 1.0};
    const auto k = sae::models::se_kernel(w, 1.0, 1.0);
    EXPECT_DOUBLE_EQ(k(0, 0), 1.0 + 1e-8);
    EXPECT_NEAR(k(0, 1), std::exp(-0.5), 1e-15);
    const auto k2 = sae::models::se_kernel(w, 2.0, 1.0);
    EXPECT_DOUBLE_EQ(k2(1, 1), 4.0 * (1.0 + 1e-8));
}

TEST(Kernel, CholeskyReconstructs) {
    const std::vector<double> w{1.0, 1.5, 2.0, 4.0, 9.0};
    const auto k = sae::models::se_kernel(w, 1.3, 2.0);
    const auto l = sae::models::kernel_cholesky(k);
    EXPECT_LT((l * l.transpose() - k).lpNorm<Eigen::Infinity>(), 1e-12);
    Eigen::MatrixXd bad = Eigen::MatrixXd::Ones(2, 2);
    bad(0, 1) = bad(1, 0) = 2.0;
    EXPECT_THROW((void)sae::models::kernel_cholesky(bad), sae::NumericalError);
}
