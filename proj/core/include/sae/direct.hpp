#pragma once

#include <optional>
#include <span>
#include <vector>

namespace sae::direct {

/// Per-area result; `std::nullopt` marks an area with no usable estimate.
using AreaValues = std::vector<std::optional<double>>;

/// Hajek (ratio) mean sum w y / sum w per area. Areas with no sampled unit are missing.
[[nodiscard]] AreaValues hajek_mean(std::span<const double> y, std::span<const double> w,
                                    std::span<const int> area_ids, int area_count);

[[nodiscard]] AreaValues unweighted_mean(std::span<const double> y, std::span<const int> area_ids,
                                         int area_count);

/// Variance of the Hajek mean with finite-population correction:
///   (1/n)(1 - n/N) (1/(n-1)) sum wt^2 (y - ybar_w)^2,
/// wt being the weights scaled to sum to n within the area. Missing when n < 2.
[[nodiscard]] AreaValues direct_variance(std::span<const double> y, std::span<const double> w,
                                         std::span<const int> area_ids,
                                         std::span<const long> area_sizes);

/// SRS variance of the unweighted mean, (1 - n/N) s^2 / n. Missing when n < 2.
[[nodiscard]] AreaValues unweighted_variance(std::span<const double> y,
                                             std::span<const int> area_ids,
                                             std::span<const long> area_sizes);

struct DesignEffect {
    /// n / n' (Kish route).
    double deff{};
    /// Kish effective sample size (sum w)^2 / sum w^2.
    double n_eff{};
    /// Effective number of cases n' * p_hat.
    double y_star{};
    long n{};
    double p_hat{};
};

[[nodiscard]] std::vector<std::optional<DesignEffect>>
design_effect_and_kish(std::span<const double> y, std::span<const double> w,
                       std::span<const int> area_ids, int area_count);

/// Kish effective sample size of one group of weights.
[[nodiscard]] double kish_effective_size(std::span<const double> w);

struct Interval {
    double lo{};
    double hi{};
};

/// p_hat +/- 1.96 se, truncated to [0, 1].
[[nodiscard]] Interval normal_interval(double estimate, double se);

/// JSON-ready per-area record.
struct AreaEstimate {
    int area_id{};
    std::optional<double> estimate;
    std::optional<double> se;
    long n{};
    std::optional<double> n_eff;
};

} // namespace sae::direct
