#pragma once

#include "sae/model_density.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sae {

struct HmcConfig {
    int chains{2};
    int warmup{1000};
    /// Kept iterations per chain.
    int iterations{1000};
    double target_accept{0.8};
    std::uint64_t seed{1};
    /// Base trajectory length; L = round(integration_time / step) before jitter.
    double integration_time{1.0};
    int max_steps{1024};
    bool adapt_metric{true};
    /// Half-width of the uniform initialisation box on the unconstrained scale.
    double init_radius{2.0};
    /// Optional unconstrained starting point shared by all chains.
    std::vector<double> init;
    /// Run chains on separate threads.
    bool parallel{true};

    void validate() const;
};

struct PosteriorDraws {
    std::vector<std::string> names;
    /// (chains * iterations) x constrained dimension; chain c occupies rows
    /// [c * iterations, (c + 1) * iterations).
    Eigen::MatrixXd draws;
    std::vector<int> chain_ids;
    int chains{0};
    int iterations{0};
    long divergences{0};
    std::vector<double> step_sizes;
    std::vector<double> mean_accept;
    std::vector<double> inverse_metric_mean;
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t column(const std::string &name) const;
    /// Constrained draws of one parameter for one chain.
    [[nodiscard]] std::vector<double> chain_values(std::size_t column, int chain) const;
};

/// Jittered fixed-integration-time HMC with dual-averaging step size and windowed diagonal
/// metric adaptation during warmup.
[[nodiscard]] PosteriorDraws hmc_sample(const ModelDensity &model, const HmcConfig &config);

} // namespace sae
