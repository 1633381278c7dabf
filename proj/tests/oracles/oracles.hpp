#pragma once

// Brute-force reference computations used by the unit and acceptance tests. None of these
// call into the library code they are used to check.

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace sae::oracle {

/// Inclusion probabilities of "first unit with probability q_i, then n - 1 by SRSWOR" by
/// summing over every (first unit, remaining subset) outcome.
std::vector<double> midzuno_enumerated(std::span<const double> first_draw_probs, std::size_t n);

/// Area means of the nested error BLUP with known variance components, built from the full
/// n x n covariance matrix V, its explicit inverse and the GLS normal equations.
Eigen::VectorXd dense_blup_means(const Eigen::VectorXd &y, const Eigen::MatrixXd &X,
                                 std::span<const int> area_ids, int area_count, double sigma2_v,
                                 double sigma2_e, const Eigen::MatrixXd &xbar_pop,
                                 std::span<const long> area_sizes);

/// GLS beta from the dense V.
Eigen::VectorXd dense_gls_beta(const Eigen::VectorXd &y, const Eigen::MatrixXd &X,
                               std::span<const int> area_ids, double sigma2_v, double sigma2_e);

/// Survey-weighted beta from
///   [sum_ij w x (x - g_i xbar_iw)']^{-1} sum_ij w x (y - g_i ybar_iw),
/// with g_i = s2v / (s2v + s2e sum_j (w_ij / w_i.)^2).
Eigen::VectorXd you_rao_beta(const Eigen::VectorXd &y, const Eigen::MatrixXd &X,
                             std::span<const double> w, std::span<const int> area_ids,
                             int area_count, double sigma2_v, double sigma2_e);

/// Posterior mean of N * phi_1 for two cells with sample counts n1, n2 and weights w1, w2,
/// flat prior on phi_1, likelihood (phi_1/w1)^n1 (phi_2/w2)^n2 / (phi_1/w1 + phi_2/w2)^(n1+n2).
/// Midpoint rule on `grid` points.
double two_cell_posterior_mean(long n1, long n2, double w1, double w2, long total,
                               int grid = 200000);

/// Kolmogorov-Smirnov statistic of `values` against the standard normal CDF.
double ks_statistic_std_normal(std::vector<double> values);
/// Asymptotic P(D_n > d) from the Kolmogorov distribution with effective size n.
double ks_p_value(double d, double n);

} // namespace sae::oracle
