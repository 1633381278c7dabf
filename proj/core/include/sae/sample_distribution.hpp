#pragma once

#include <optional>
#include <span>

namespace sae::models {

/// Population-complement probability of y = 1 for a nonsampled unit:
///   p_c = E[w - 1 | y=1] p_s / (E[w - 1 | y=1] p_s + E[w - 1 | y=0] (1 - p_s)),
/// from the sample probability p_s and the sample means of the weights given y.
/// Returns nullopt when both E[w - 1 | y] are zero (census: no nonsampled mass).
/// Throws DomainError when an expected weight is below one or p_s is outside [0, 1].
[[nodiscard]] std::optional<double> sample_to_population_bernoulli(double p_s, double e_w_given_y1,
                                                                   double e_w_given_y0);

/// E_s(w | y, x) under the lognormal weight model log w ~ N(t + a y, sigma^2).
[[nodiscard]] double lognormal_weight_mean(double t, double a, int y, double sigma);

/// P(y = 1 | sampled) when a Bernoulli(p) population is sampled with P(I = 1 | y) = pi_y:
///   pi_1 p / (pi_1 p + pi_0 (1 - p)).
[[nodiscard]] double sampled_frequency(double p, double pi1, double pi0);
/// P(y = 1 | not sampled): (1 - pi_1) p / ((1 - pi_1) p + (1 - pi_0)(1 - p)).
[[nodiscard]] double nonsampled_frequency(double p, double pi1, double pi0);

} // namespace sae::models
