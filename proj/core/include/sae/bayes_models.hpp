#pragma once

#include "sae/model_density.hpp"
#include "sae/sampling.hpp"
#include "sae/spatial.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace sae::models {

/// Log densities of the priors shared by the models. The half-Cauchy is on the positive
/// axis; the Jacobian of the log transform is added by ParamSpace.
[[nodiscard]] ad::Var normal_lpdf(const ad::Var &x, double mean, double variance);
[[nodiscard]] ad::Var std_normal_lpdf(std::span<const ad::Var> x);
[[nodiscard]] ad::Var half_cauchy_lpdf(const ad::Var &sigma, double scale);

/// Weighted Bernoulli pseudo-likelihood with logit p = x' beta + u_i.
struct Model1Spec {
    Eigen::MatrixXd X;
    std::vector<double> y;
    std::vector<int> area_ids;
    int area_count{0};
    /// Weights scaled to sum to the sample size.
    std::vector<double> weights;
    double sigma2_beta{10.0};
    double kappa_u{5.0};

    /// Dummy-coded design from the frame covariates and raw weights scaled with `scaling`.
    static Model1Spec from_frame(const SampleFrame &frame,
                                 WeightScaling scaling = WeightScaling::SumToTotalSampleSize);
    void validate() const;
};

/// Parameters: beta, z_u (u = sigma_u z_u), sigma_u.
[[nodiscard]] ModelDensity model1_logdensity(const Model1Spec &spec);

/// Bernoulli with logit p = beta0 + f(w) + u_i + v_i, f a squared-exponential GP over the
/// unique sampled weights, u a proper CAR field and v iid area effects.
struct Model2Spec {
    std::vector<double> y;
    std::vector<int> area_ids;
    int area_count{0};
    /// Unscaled weights; the GP input.
    std::vector<double> weights;
    spatial::Adjacency adjacency;
    double sigma2_beta{10.0};
    double kappa_gamma{5.0};
    double kappa_rho{5.0};
    double kappa_tau{5.0};
    double kappa_v{5.0};
    double jitter{1e-8};

    static Model2Spec from_frame(const SampleFrame &frame, spatial::Adjacency adjacency);
    void validate() const;
    /// Sorted distinct weight values (the GP index set).
    [[nodiscard]] std::vector<double> unique_weights() const;
};

/// Parameters: beta0, eta (f = L eta, L L' = K), gamma, rho, u, tau, alpha, z_v, sigma_v.
[[nodiscard]] ModelDensity model2_logdensity(const Model2Spec &spec);

/// gamma^2 exp(-(w_a - w_b)^2 / (2 rho^2)) plus gamma^2 * jitter on the diagonal.
[[nodiscard]] Eigen::MatrixXd se_kernel(std::span<const double> inputs, double gamma, double rho,
                                        double jitter = 1e-8);
/// Lower Cholesky factor of a kernel matrix; NumericalError suggesting a larger jitter on
/// failure.
[[nodiscard]] Eigen::MatrixXd kernel_cholesky(const Eigen::MatrixXd &K);
/// f = gamma * chol(C) * eta, the GP values implied by a model 2 draw.
[[nodiscard]] std::vector<double> gp_function_values(std::span<const double> inputs, double gamma,
                                                     double rho, std::span<const double> eta,
                                                     double jitter = 1e-8);

enum class Model3Mode {
    /// Bernoulli response plus normal regression of log w on x and y.
    PfeffermannSverchkov,
    /// Joint sample density of (y, pi) with lognormal pi and the Bernoulli MGF in closed form.
    LeonNovelo,
};

enum class ResponseFamily { Bernoulli, Gaussian, Poisson };

struct Model3Spec {
    Eigen::MatrixXd X;
    /// Covariates of the weight model; may differ from X.
    Eigen::MatrixXd Xw;
    std::vector<double> y;
    std::vector<int> area_ids;
    int area_count{0};
    /// Unscaled weights 1 / pi.
    std::vector<double> weights;
    Model3Mode mode{Model3Mode::PfeffermannSverchkov};
    ResponseFamily family{ResponseFamily::Bernoulli};
    double sigma2_coef{10.0};
    double kappa{5.0};

    static Model3Spec from_frame(const SampleFrame &frame,
                                 Model3Mode mode = Model3Mode::PfeffermannSverchkov);
    void validate() const;
};

/// Mode (a) parameters: beta, z_u, sigma_u, alpha, a, sigma_eps.
/// Mode (b) parameters: beta, z_u, sigma_u, alpha, kappa, sigma_pi.
[[nodiscard]] ModelDensity model3_logdensity(const Model3Spec &spec);

/// Log of the mode (b) joint sample density of (y, pi) for one unit, with respect to pi:
/// normal density of log pi (mean y kappa + t, sd sigma) divided by
/// exp(t + sigma^2/2) E[e^{y kappa}], times the Bernoulli(p) mass of y.
[[nodiscard]] double leon_novelo_log_density(int y, double pi, double p, double t, double kappa,
                                             double sigma);

enum class AreaStructure { Iid, Icar, Car };

[[nodiscard]] std::string_view to_string(AreaStructure s) noexcept;
[[nodiscard]] AreaStructure area_structure_from_string(std::string_view text);

/// Area-level binomial with effective counts: y*_i log p_i + (n'_i - y*_i) log(1 - p_i),
/// logit p_i = X_i' beta + u_i.
struct EffectiveCountsSpec {
    std::vector<double> ystar;
    std::vector<double> n_eff;
    Eigen::MatrixXd X;
    AreaStructure structure{AreaStructure::Iid};
    std::optional<spatial::Adjacency> adjacency;
    double sigma2_beta{10.0};
    double kappa{5.0};

    void validate() const;
};

/// Parameters: beta plus z_u & sigma_u (iid), phi & sigma_u (ICAR, sum to zero per
/// component) or u, tau & alpha (CAR).
[[nodiscard]] ModelDensity effective_counts_logdensity(const EffectiveCountsSpec &spec);

/// Area random effects of an effective-counts draw (constrained parameter vector).
[[nodiscard]] std::vector<double> effective_counts_area_effects(const EffectiveCountsSpec &spec,
                                                                const ModelDensity &density,
                                                                std::span<const double> x);

} // namespace sae::models
