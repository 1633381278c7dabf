#pragma once

#include "sae/sample_draw.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sae {

struct Unit {
    std::int64_t unit_id{};
    int area_id{};
    std::vector<int> covariates;
    int y_binary{};
    double y_continuous{};
    double size_value{1.0};

    bool operator==(const Unit &) const = default;
};

/// Categorical covariate with `levels` categories, drawn with `probs` (uniform when empty).
struct CovariateSpec {
    std::string name;
    int levels{2};
    std::vector<double> probs;
};

/// Finite universe of units partitioned into areas 0..m-1.
class Population {
  public:
    Population() = default;
    Population(std::vector<Unit> units, std::vector<std::string> covariate_names,
               std::vector<int> covariate_levels);

    [[nodiscard]] const std::vector<Unit> &units() const noexcept { return units_; }
    [[nodiscard]] const Unit &operator[](std::size_t i) const { return units_[i]; }
    [[nodiscard]] std::size_t size() const noexcept { return units_.size(); }
    [[nodiscard]] std::size_t total_size() const noexcept { return units_.size(); }
    [[nodiscard]] int area_count() const noexcept { return static_cast<int>(area_sizes_.size()); }
    [[nodiscard]] const std::vector<long> &area_sizes() const noexcept { return area_sizes_; }
    [[nodiscard]] const std::vector<std::string> &covariate_names() const noexcept {
        return covariate_names_;
    }
    [[nodiscard]] const std::vector<int> &covariate_levels() const noexcept {
        return covariate_levels_;
    }

    /// Finite-population proportion of y_binary = 1 per area.
    [[nodiscard]] std::vector<double> area_proportions() const;
    /// Per-area mean of y_continuous.
    [[nodiscard]] std::vector<double> area_continuous_means() const;
    [[nodiscard]] std::vector<double> sizes() const;

    bool operator==(const Population &) const = default;

  private:
    std::vector<Unit> units_;
    std::vector<std::string> covariate_names_;
    std::vector<int> covariate_levels_;
    std::vector<long> area_sizes_;
};

struct GeneratorConfig {
    int areas{20};
    /// Per-area sizes; when empty every area gets `area_size` units.
    std::vector<long> area_sizes;
    long area_size{1000};
    std::vector<CovariateSpec> covariates{{"age", 4, {}}, {"race", 3, {}}, {"sex", 2, {}}};
    /// Intercept followed by dummy effects for levels 1..L-1 of each covariate.
    std::vector<double> beta{-1.0, 0.3, 0.5, -0.4, 0.4, 0.8, -0.2};
    double sigma_u{0.4};
    /// log size = c0 + c1 * y + eps, eps ~ N(0, sigma_z^2)
    double c0{3.0};
    double c1{1.0};
    double sigma_z{0.5};
    /// Log sizes are rounded to this grid (0 keeps them continuous).
    double log_size_step{0.2};
    /// Residual sd of the continuous response y_cont = x'beta + u + e.
    double sigma_e{1.0};
    std::uint64_t seed{42};

    [[nodiscard]] std::vector<long> resolved_area_sizes() const;
    void validate() const;
};

[[nodiscard]] Population generate_population(const GeneratorConfig &config);

/// Poststratification cell: one (area x covariate combination).
struct PoststratCell {
    int area_id{};
    std::vector<int> covariate_key;
    long population_count{};
    long sample_count{};
    /// Sum of observed y_binary over the sampled units of the cell.
    long sample_positives{};
    /// Sum of observed y_continuous over the sampled units of the cell.
    double sample_continuous_sum{};

    bool operator==(const PoststratCell &) const = default;
};

/// Cells for every observed (area x covariate) combination in the population, with
/// sample counts taken from `draw`. Ordered by area then covariate key.
[[nodiscard]] std::vector<PoststratCell> index_cells(const Population &pop,
                                                     const SampleDraw &draw);

/// Number of columns of the dummy-coded design (intercept + sum(levels - 1)).
[[nodiscard]] int design_width(std::span<const int> covariate_levels);
/// Intercept plus treatment (reference level 0 dropped) dummies.
[[nodiscard]] Eigen::RowVectorXd design_row(std::span<const int> key,
                                            std::span<const int> covariate_levels);
[[nodiscard]] Eigen::MatrixXd design_matrix(std::span<const Unit> units,
                                            std::span<const int> covariate_levels);

} // namespace sae
