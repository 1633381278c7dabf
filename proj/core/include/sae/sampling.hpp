#pragma once

#include "sae/population.hpp"
#include "sae/random.hpp"
#include "sae/sample_draw.hpp"

#include <span>
#include <string>
#include <vector>

namespace sae {

/// Sizes below this floor are raised to it so that every unit keeps a positive probability.
inline constexpr double kSizeFloor = 1e-9;

/// Midzuno first-draw probabilities: floored sizes normalised to sum to one.
[[nodiscard]] std::vector<double> midzuno_first_draw_probs(std::span<const double> sizes);

/// Inclusion probabilities of Midzuno's scheme (first unit proportional to size, the
/// remaining n - 1 by SRSWOR):
///   pi_i = p_i (N - n) / (N - 1) + (n - 1) / (N - 1).
/// Units whose probability reaches one are listed in `certainty_units` when supplied.
[[nodiscard]] std::vector<double>
midzuno_inclusion_probs(std::span<const double> sizes, std::size_t n,
                        std::vector<std::size_t> *certainty_units = nullptr);

/// Inclusion probabilities proportional to size with sum n. Units that would exceed one are
/// set to one (certainty units) and the remainder re-solved until none exceed one.
[[nodiscard]] std::vector<double>
pps_inclusion_probs(std::span<const double> sizes, std::size_t n,
                    std::vector<std::size_t> *certainty_units = nullptr);

/// Midzuno's scheme on raw sizes; positions and unit ids are 0..N-1.
[[nodiscard]] SampleDraw draw_midzuno(std::span<const double> sizes, std::size_t n, Rng &rng);
[[nodiscard]] SampleDraw draw_midzuno(const Population &pop, std::size_t n, Rng &rng);

/// Generalised Midzuno design: the complement is drawn by Tille's elimination procedure on
/// 1 - pi, which gives inclusion probabilities exactly equal to pps_inclusion_probs(sizes, n).
/// Selection happens draw by draw so the cost is O(n N).
[[nodiscard]] SampleDraw draw_midzuno_exact(std::span<const double> sizes, std::size_t n,
                                            Rng &rng);
[[nodiscard]] SampleDraw draw_midzuno_exact(const Population &pop, std::size_t n, Rng &rng);

[[nodiscard]] SampleDraw draw_srs(std::size_t population_size, std::size_t n, Rng &rng);
[[nodiscard]] SampleDraw draw_srs(const Population &pop, std::size_t n, Rng &rng);
/// SRSWOR of `n_per_area` units within every area (all units when the area is smaller).
[[nodiscard]] SampleDraw draw_stratified_srs(const Population &pop, std::size_t n_per_area,
                                             Rng &rng);

/// Dispatch on the design tag.
[[nodiscard]] SampleDraw draw_sample(const Population &pop, DesignTag design, std::size_t n,
                                     Rng &rng);

enum class WeightScaling {
    /// Sum of scaled weights within each group equals the group sample size.
    SumToAreaSampleSize,
    /// One constant across groups that preserves each group's weight sum.
    ClusterSumPreserving,
    /// Sum within each group equals Kish's effective sample size (sum w)^2 / sum w^2.
    EffectiveSampleSize,
    Unscaled,
    /// Sum over all units equals the total sample size.
    SumToTotalSampleSize,
};

[[nodiscard]] std::string_view to_string(WeightScaling method) noexcept;
[[nodiscard]] WeightScaling weight_scaling_from_string(std::string_view text);

/// Rescale survey weights. `group_ids` are dense labels 0..G-1 (one per weight); a label
/// in that range with no members is an error for the group-wise methods.
[[nodiscard]] std::vector<double> scale_weights(std::span<const double> weights,
                                                std::span<const int> group_ids,
                                                WeightScaling method);

struct InformativenessReport {
    bool sufficient{false};
    double weighted_mean{};
    double unweighted_mean{};
    double difference{};
    double se{};
    double z{};
    bool informative{false};
    std::string note;
};

/// Compares the Hajek and unweighted means of a binary (or any) response. The z statistic
/// uses a with-replacement linearisation variance of the difference; flags |z| > 2.
[[nodiscard]] InformativenessReport informativeness_check(std::span<const double> y,
                                                          std::span<const double> weights);

/// Sampled units with their design quantities and the population area sizes.
struct SampleFrame {
    std::vector<Unit> units;
    std::vector<double> pi;
    std::vector<double> weights;
    std::vector<std::string> covariate_names;
    std::vector<int> covariate_levels;
    std::vector<long> area_sizes;

    [[nodiscard]] std::size_t size() const noexcept { return units.size(); }
    [[nodiscard]] int area_count() const noexcept { return static_cast<int>(area_sizes.size()); }
    [[nodiscard]] std::vector<int> area_ids() const;
    [[nodiscard]] std::vector<double> y_binary() const;
    [[nodiscard]] std::vector<double> y_continuous() const;
    [[nodiscard]] std::vector<long> area_sample_sizes() const;
};

[[nodiscard]] SampleFrame make_sample_frame(const Population &pop, const SampleDraw &draw);

} // namespace sae
