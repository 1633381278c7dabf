#pragma once

#include "sae/bayes_models.hpp"
#include "sae/hmc.hpp"
#include "sae/population.hpp"
#include "sae/sampling.hpp"
#include "sae/simharness.hpp"
#include "sae/spatial.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sae::io {

/// Reads a whole file; throws ParseError when it cannot be opened.
[[nodiscard]] std::string read_text(const std::filesystem::path &path);
void write_text(const std::filesystem::path &path, std::string_view text);

/// Header: unit_id,area_id,<covariates...>,y[,y_cont],size. Covariate level counts are
/// inferred as max + 1 per column.
[[nodiscard]] Population read_population_csv(const std::filesystem::path &path);
[[nodiscard]] Population parse_population_csv(std::string_view text);
void write_population_csv(const Population &pop, const std::filesystem::path &path);
[[nodiscard]] std::string format_population_csv(const Population &pop);

/// Population columns of the sampled units followed by pi and weight.
void write_sample_csv(const Population &pop, const SampleDraw &draw,
                      const std::filesystem::path &path);
[[nodiscard]] std::string format_sample_csv(const Population &pop, const SampleDraw &draw);
/// Reads a sample. `area_sizes` gives N_i (and the area count); when empty the area count is
/// max area_id + 1 and N_i is set to the area's sample size. Covariate levels default to
/// max + 1 per column unless given.
[[nodiscard]] SampleFrame read_sample_csv(const std::filesystem::path &path,
                                          std::vector<long> area_sizes = {},
                                          std::vector<int> covariate_levels = {});
[[nodiscard]] SampleFrame parse_sample_csv(std::string_view text, std::vector<long> area_sizes = {},
                                           std::vector<int> covariate_levels = {});

struct CellFile {
    std::vector<PoststratCell> cells;
    std::vector<std::string> covariate_names;
    std::vector<int> covariate_levels;
    /// Sum of population_count per area.
    std::vector<long> area_sizes;
};

/// Header: area_id,<covariates...>,population_count,sample_count,sample_positives.
void write_cells_csv(std::span<const PoststratCell> cells,
                     std::span<const std::string> covariate_names,
                     const std::filesystem::path &path);
[[nodiscard]] std::string format_cells_csv(std::span<const PoststratCell> cells,
                                           std::span<const std::string> covariate_names);
[[nodiscard]] CellFile read_cells_csv(const std::filesystem::path &path);
[[nodiscard]] CellFile parse_cells_csv(std::string_view text);

/// Header: area_i,area_j; one undirected edge per row.
void write_adjacency_csv(const spatial::Adjacency &adj, const std::filesystem::path &path);
[[nodiscard]] spatial::Adjacency read_adjacency_csv(const std::filesystem::path &path,
                                                    int area_count);

/// Header: chain,iteration,<parameter names...>.
void write_draws_csv(const PosteriorDraws &draws, const std::filesystem::path &path);
[[nodiscard]] std::string format_draws_csv(const PosteriorDraws &draws);
[[nodiscard]] PosteriorDraws read_draws_csv(const std::filesystem::path &path);
[[nodiscard]] PosteriorDraws parse_draws_csv(std::string_view text);

[[nodiscard]] GeneratorConfig generator_config_from_json(std::string_view text);
[[nodiscard]] std::string generator_config_to_json(const GeneratorConfig &config);
/// Accepts either a bare config or a report manifest (its "config" member is used).
[[nodiscard]] sim::SimConfig sim_config_from_json(std::string_view text);
[[nodiscard]] std::string sim_config_to_json(const sim::SimConfig &config);
[[nodiscard]] std::string sim_manifest_json(const sim::SimReport &report);

[[nodiscard]] std::string_view to_string(models::Model3Mode mode) noexcept;
[[nodiscard]] models::Model3Mode model3_mode_from_string(std::string_view text);

struct EstimateRecord {
    int area_id{};
    std::optional<double> estimate;
    std::optional<double> se;
    std::optional<double> lo95;
    std::optional<double> hi95;
};

struct EstimateSet {
    std::string model;
    std::vector<EstimateRecord> areas;
    /// Population-weighted aggregate over all areas, when the model provides one.
    std::optional<EstimateRecord> state;
    std::vector<std::string> warnings;
};

[[nodiscard]] std::string estimates_json(const EstimateSet &set);
[[nodiscard]] std::string estimates_csv(const EstimateSet &set);

/// Shortest round-trip representation of a double.
[[nodiscard]] std::string format_double(double v);

} // namespace sae::io
