#pragma once

#include "sae/random.hpp"

#include <span>
#include <vector>

namespace sae::classical {

/// One (area, group) cell of the sample-adjusted binomial likelihood.
struct MalecCell {
    double positives{};
    double n{};
    double p{};
    double wbar1{};
    double wbar0{};
};

/// sum over cells of m log p + (n - m) log(1 - p) - n log(p / wbar1 + (1 - p) / wbar0).
/// Throws DomainError when some p is outside (0, 1).
[[nodiscard]] double malec_adjusted_loglik(std::span<const MalecCell> cells);

struct GroupWeightMeans {
    /// Mean weight among sampled units with y = 1 (resp. y = 0); zero when the group is empty.
    std::vector<double> wbar1;
    std::vector<double> wbar0;
};

/// Group means of the weights split by the binary response.
[[nodiscard]] GroupWeightMeans group_weight_means(std::span<const double> y,
                                                  std::span<const double> w,
                                                  std::span<const int> group_ids,
                                                  int group_count);

/// Posterior draws of theta = sum p_j y_j with (p_1..p_n) ~ Dirichlet(w_tilde + alpha), where
/// w_tilde are the weights scaled to sum to n.
[[nodiscard]] std::vector<double> bayes_pseudo_empirical(std::span<const double> y,
                                                         std::span<const double> w,
                                                         double alpha_prior, int draws, Rng &rng);

} // namespace sae::classical
