#pragma once

#include "sae/bayes_models.hpp"
#include "sae/hmc.hpp"
#include "sae/population.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace sae::poststrat {

/// Cells that partition every area's population.
struct CellTable {
    std::vector<int> area;
    std::vector<long> population_count;
    std::vector<long> sample_count;
    std::vector<long> sample_positives;
    int area_count{0};

    [[nodiscard]] std::size_t size() const noexcept { return area.size(); }
    [[nodiscard]] std::vector<long> area_sizes() const;
    static CellTable from_cells(std::span<const PoststratCell> cells, int area_count);
    void validate() const;
};

/// Per-draw area means and the integer positive counts they come from.
struct AreaMeanDraws {
    /// draws x areas
    Eigen::MatrixXd means;
    /// draws x areas, number of population units with y = 1
    Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> positives;
    std::vector<long> area_sizes;
};

/// Fills the nonsampled-unit probability of every cell for draw k. May also overwrite the
/// population counts of the cells for that draw (used when cell sizes are uncertain).
using CellDrawFn = std::function<void(int k, std::span<double> prob, std::span<long> counts)>;

struct PredictOptions {
    std::uint64_t seed{1};
    /// Simulate every unit, sampled ones included, instead of keeping the observed values.
    bool regenerate_all{false};
    int workers{1};
};

/// For each draw k: positives_i = sum over cells of observed positives + Binomial(N - n, p),
/// area mean = positives_i / N_i. Each draw uses its own RNG stream so results do not depend
/// on the number of workers.
[[nodiscard]] AreaMeanDraws predict_area_means(const CellTable &cells, int draws,
                                               const CellDrawFn &cell_draw,
                                               const PredictOptions &options = {});

/// p_cell = inv_logit(x' beta + sigma_u z_u[area]) for every kept draw of model 1.
[[nodiscard]] AreaMeanDraws predict_area_means_model1(const PosteriorDraws &draws,
                                                      std::span<const PoststratCell> cells,
                                                      std::span<const int> covariate_levels,
                                                      int area_count,
                                                      const PredictOptions &options = {});

/// Model 3: nonsampled probability from the sample model and the weight model
/// (mode a), or from the population model and the inclusion-probability model (mode b).
[[nodiscard]] AreaMeanDraws predict_area_means_model3(const PosteriorDraws &draws,
                                                      std::span<const PoststratCell> cells,
                                                      std::span<const int> covariate_levels,
                                                      int area_count, models::Model3Mode mode,
                                                      const PredictOptions &options = {});

/// Cells of model 2: distinct sampled weight values within each area.
struct WeightCells {
    CellTable table;
    /// Index of each cell's weight in the model's unique weight list.
    std::vector<int> level;
    std::vector<double> weight;
};

[[nodiscard]] WeightCells weight_cells(const models::Model2Spec &spec,
                                       std::span<const long> area_sizes);

/// Posterior draws of the cell sizes of every area, one row per draw: cell c of the table
/// gets column c. Draws come from multinomial_cell_sizes per area.
[[nodiscard]] std::vector<std::vector<long>> model2_cell_size_draws(const WeightCells &cells,
                                                                   int draws,
                                                                   const HmcConfig &config);

[[nodiscard]] AreaMeanDraws predict_area_means_model2(const PosteriorDraws &draws,
                                                      const models::Model2Spec &spec,
                                                      const WeightCells &cells,
                                                      const std::vector<std::vector<long>> &sizes,
                                                      const PredictOptions &options = {});

/// Log posterior of within-area cell proportions phi (flat Dirichlet prior) when the sample
/// counts are Multinomial(n; phi_l / w_l normalised).
[[nodiscard]] ModelDensity multinomial_cell_density(std::span<const long> counts,
                                                    std::span<const double> weights);

/// Rounds N * phi by largest remainder so the result sums to N, then raises any cell below
/// its minimum by taking units from the cells with the most room.
[[nodiscard]] std::vector<long> largest_remainder_round(std::span<const double> phi, long total,
                                                        std::span<const long> minimum = {});

/// Posterior draws (rows) of the cell sizes N_l of one area. A single cell gets N exactly.
/// The number of draws is config.chains * config.iterations.
[[nodiscard]] std::vector<std::vector<long>> multinomial_cell_sizes(std::span<const long> counts,
                                                                   std::span<const double> weights,
                                                                   long area_total,
                                                                   const HmcConfig &config);

struct Summary {
    double mean{};
    double sd{};
    double lo95{};
    double hi95{};
};

struct Aggregate {
    std::vector<Summary> areas;
    /// Population-weighted mean of the area means, computed per draw then summarised.
    Summary state;
    std::vector<double> state_draws;
};

[[nodiscard]] Summary summarise_draws(std::span<const double> values);
[[nodiscard]] Aggregate aggregate(const Eigen::MatrixXd &area_means,
                                  std::span<const long> area_sizes);

} // namespace sae::poststrat
