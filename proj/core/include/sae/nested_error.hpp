#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace sae::classical {

/// Nested error regression y_ij = x_ij' beta + v_i + e_ij fitted on a sample.
struct NerFit {
    Eigen::VectorXd beta;
    double sigma2_v{};
    double sigma2_e{};
    /// gamma_i = sigma2_v / (sigma2_v + sigma2_e / n_i); zero for areas without sample.
    Eigen::VectorXd gamma;
    /// Predicted area effects gamma_i (ybar_i - xbar_i' beta).
    Eigen::VectorXd vtilde;
    /// Per-area sample sizes and sample means of y and x (rows of xbar).
    std::vector<long> n;
    Eigen::VectorXd ybar;
    Eigen::MatrixXd xbar;
    /// Covariance of the GLS beta given the variance components.
    Eigen::MatrixXd beta_cov;
    std::vector<std::string> warnings;
};

/// Henderson method III (fitting of constants) variance components, truncated at zero,
/// followed by GLS for beta. X must include an intercept column to make the components
/// meaningful. Throws ConfigError listing collinear columns when X is rank deficient.
[[nodiscard]] NerFit fit_ner(const Eigen::VectorXd &y, const Eigen::MatrixXd &X,
                             std::span<const int> area_ids, int area_count);

/// GLS and area effects with the variance components supplied.
[[nodiscard]] NerFit fit_ner_known(const Eigen::VectorXd &y, const Eigen::MatrixXd &X,
                                   std::span<const int> area_ids, int area_count,
                                   double sigma2_v, double sigma2_e);

/// (1/N_i)[sum_sampled y + sum_nonsampled (x' beta + vtilde_i)], computed from the sample
/// means and the population covariate means (one row of xbar_pop per area). Areas without
/// sample get the synthetic xbar_pop' beta.
[[nodiscard]] Eigen::VectorXd blup_area_means(const NerFit &fit, const Eigen::MatrixXd &xbar_pop,
                                              std::span<const long> area_sizes);

struct PseudoEblupFit {
    Eigen::VectorXd beta_w;
    double sigma2_v{};
    double sigma2_e{};
    Eigen::VectorXd gamma_w;
    /// Sum of squared within-area normalised weights.
    Eigen::VectorXd delta2;
    Eigen::VectorXd ybar_w;
    Eigen::MatrixXd xbar_w;
    Eigen::VectorXd weight_sum;
    std::vector<long> n;
};

/// Survey-weighted estimating equations for beta with gamma_iw computed from the supplied
/// variance components.
[[nodiscard]] PseudoEblupFit fit_pseudo_eblup(const Eigen::VectorXd &y, const Eigen::MatrixXd &X,
                                              std::span<const double> w,
                                              std::span<const int> area_ids, int area_count,
                                              double sigma2_v, double sigma2_e);
/// Same, with the variance components taken from fit_ner on the same data.
[[nodiscard]] PseudoEblupFit fit_pseudo_eblup(const Eigen::VectorXd &y, const Eigen::MatrixXd &X,
                                              std::span<const double> w,
                                              std::span<const int> area_ids, int area_count);

/// theta_iw = gamma_iw ybar_iw + (Xbar_i - gamma_iw xbar_iw)' beta_w.
[[nodiscard]] Eigen::VectorXd pseudo_eblup_means(const PseudoEblupFit &fit,
                                                 const Eigen::MatrixXd &xbar_pop);

/// E(y_ij | ybar_iw) = x_ij' beta + gamma_iw (ybar_iw - xbar_iw' beta).
[[nodiscard]] double guadarrama_predict(const Eigen::VectorXd &beta, double gamma_iw,
                                        const Eigen::VectorXd &x_ij, double ybar_iw,
                                        const Eigen::VectorXd &xbar_iw);

/// Coefficient on y from the OLS regression of log w on [X, y].
[[nodiscard]] double weight_model_b(std::span<const double> w, const Eigen::VectorXd &y,
                                    const Eigen::MatrixXd &X);

/// N_i^{-1}[(N_i - n_i) theta_i + n_i {ybar_i + (Xbar_i - xbar_i)' beta} + (N_i - n_i) b sigma2_e]
/// with theta_i = vtilde_i + Xbar_i' beta.
[[nodiscard]] Eigen::VectorXd pfeffermann_corrected_mean(const NerFit &fit, double b,
                                                         const Eigen::MatrixXd &xbar_pop,
                                                         std::span<const long> area_sizes);

} // namespace sae::classical
