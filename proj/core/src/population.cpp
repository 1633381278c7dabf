#include "sae/population.hpp"

#include "sae/error.hpp"
#include "sae/random.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

namespace sae {

std::string_view to_string(DesignTag tag) noexcept {
    switch (tag) {
    case DesignTag::SRS:
        return "srs";
    case DesignTag::StratifiedSRS:
        return "stratified-srs";
    case DesignTag::MidzunoPPS:
        return "midzuno-classic";
    case DesignTag::MidzunoExactPPS:
        return "midzuno";
    }
    return "unknown";
}

DesignTag design_tag_from_string(std::string_view text) {
    if (text == "srs") {
        return DesignTag::SRS;
    }
    if (text == "stratified-srs") {
        return DesignTag::StratifiedSRS;
    }
    if (text == "midzuno-classic") {
        return DesignTag::MidzunoPPS;
    }
    if (text == "midzuno") {
        return DesignTag::MidzunoExactPPS;
    }
    throw ConfigError{"unknown design '" + std::string{text} +
                      "' (expected srs, stratified-srs, midzuno, midzuno-classic)"};
}

Population::Population(std::vector<Unit> units, std::vector<std::string> covariate_names,
                       std::vector<int> covariate_levels)
    : units_{std::move(units)}, covariate_names_{std::move(covariate_names)},
      covariate_levels_{std::move(covariate_levels)} {
    if (units_.empty()) {
        throw ConfigError{"no units"};
    }
    if (covariate_names_.size() != covariate_levels_.size()) {
        throw ConfigError{"covariate names and level counts differ in length"};
    }
    int max_area = -1;
    for (const auto &u : units_) {
        if (u.area_id < 0) {
            throw ConfigError{"unit " + std::to_string(u.unit_id) + " has negative area_id"};
        }
        if (!(u.size_value > 0.0) || !std::isfinite(u.size_value)) {
            throw ConfigError{"unit " + std::to_string(u.unit_id) + " has non-positive size"};
        }
        if (u.y_binary != 0 && u.y_binary != 1) {
            throw ConfigError{"unit " + std::to_string(u.unit_id) + " has non-binary y"};
        }
        if (u.covariates.size() != covariate_levels_.size()) {
            throw ConfigError{"unit " + std::to_string(u.unit_id) +
                              " has the wrong number of covariates"};
        }
        for (std::size_t k = 0; k < u.covariates.size(); ++k) {
            if (u.covariates[k] < 0 || u.covariates[k] >= covariate_levels_[k]) {
                throw ConfigError{"unit " + std::to_string(u.unit_id) + " covariate '" +
                                  covariate_names_[k] + "' out of range"};
            }
        }
        max_area = std::max(max_area, u.area_id);
    }
    area_sizes_.assign(static_cast<std::size_t>(max_area + 1), 0);
    for (const auto &u : units_) {
        ++area_sizes_[static_cast<std::size_t>(u.area_id)];
    }
    for (std::size_t i = 0; i < area_sizes_.size(); ++i) {
        if (area_sizes_[i] == 0) {
            throw ConfigError{"area " + std::to_string(i) + " has no units"};
        }
    }
}

std::vector<double> Population::area_proportions() const {
    std::vector<double> pos(area_sizes_.size(), 0.0);
    for (const auto &u : units_) {
        pos[static_cast<std::size_t>(u.area_id)] += u.y_binary;
    }
    for (std::size_t i = 0; i < pos.size(); ++i) {
        pos[i] /= static_cast<double>(area_sizes_[i]);
    }
    return pos;
}

std::vector<double> Population::area_continuous_means() const {
    std::vector<double> sum(area_sizes_.size(), 0.0);
    for (const auto &u : units_) {
        sum[static_cast<std::size_t>(u.area_id)] += u.y_continuous;
    }
    for (std::size_t i = 0; i < sum.size(); ++i) {
        sum[i] /= static_cast<double>(area_sizes_[i]);
    }
    return sum;
}

std::vector<double> Population::sizes() const {
    std::vector<double> out;
    out.reserve(units_.size());
    for (const auto &u : units_) {
        out.push_back(u.size_value);
    }
    return out;
}

std::vector<long> GeneratorConfig::resolved_area_sizes() const {
    if (!area_sizes.empty()) {
        return area_sizes;
    }
    return std::vector<long>(static_cast<std::size_t>(std::max(areas, 0)), area_size);
}

void GeneratorConfig::validate() const {
    if (areas < 1) {
        throw ConfigError{"areas must be >= 1"};
    }
    if (!area_sizes.empty() && area_sizes.size() != static_cast<std::size_t>(areas)) {
        throw ConfigError{"area_sizes has " + std::to_string(area_sizes.size()) +
                          " entries but areas = " + std::to_string(areas)};
    }
    for (long n : resolved_area_sizes()) {
        if (n < 1) {
            throw ConfigError{"every area size must be >= 1"};
        }
    }
    std::vector<int> levels;
    for (const auto &c : covariates) {
        if (c.levels < 1) {
            throw ConfigError{"covariate '" + c.name + "' needs at least one level"};
        }
        if (!c.probs.empty()) {
            if (c.probs.size() != static_cast<std::size_t>(c.levels)) {
                throw ConfigError{"covariate '" + c.name + "' probs length != levels"};
            }
            double s = std::accumulate(c.probs.begin(), c.probs.end(), 0.0);
            if (std::abs(s - 1.0) > 1e-9 ||
                std::any_of(c.probs.begin(), c.probs.end(), [](double p) { return p < 0.0; })) {
                throw ConfigError{"covariate '" + c.name + "' probs must be a distribution"};
            }
        }
        levels.push_back(c.levels);
    }
    const auto width = static_cast<std::size_t>(design_width(levels));
    if (beta.size() != width) {
        throw ConfigError{"beta has " + std::to_string(beta.size()) + " entries; design needs " +
                          std::to_string(width)};
    }
    if (sigma_u < 0.0 || sigma_z < 0.0 || sigma_e < 0.0 || log_size_step < 0.0) {
        throw ConfigError{"standard deviations and grid step must be non-negative"};
    }
}

Population generate_population(const GeneratorConfig &config) {
    config.validate();
    Rng rng = make_stream(config.seed);
    std::normal_distribution<double> std_normal{0.0, 1.0};
    std::uniform_real_distribution<double> unif{0.0, 1.0};

    std::vector<int> levels;
    std::vector<std::string> names;
    std::vector<std::discrete_distribution<int>> level_draws;
    for (const auto &c : config.covariates) {
        levels.push_back(c.levels);
        names.push_back(c.name);
        if (c.probs.empty()) {
            const std::vector<double> flat(static_cast<std::size_t>(c.levels), 1.0);
            level_draws.emplace_back(flat.begin(), flat.end());
        } else {
            level_draws.emplace_back(c.probs.begin(), c.probs.end());
        }
    }

    const auto sizes = config.resolved_area_sizes();
    std::vector<double> u(sizes.size());
    for (auto &ui : u) {
        ui = config.sigma_u * std_normal(rng);
    }

    std::vector<Unit> units;
    units.reserve(static_cast<std::size_t>(std::accumulate(sizes.begin(), sizes.end(), 0L)));
    std::int64_t next_id = 0;
    for (std::size_t area = 0; area < sizes.size(); ++area) {
        for (long j = 0; j < sizes[area]; ++j) {
            Unit unit;
            unit.unit_id = next_id++;
            unit.area_id = static_cast<int>(area);
            unit.covariates.resize(levels.size());
            double eta = config.beta[0];
            int col = 1;
            for (std::size_t k = 0; k < levels.size(); ++k) {
                const int level = level_draws[k](rng);
                unit.covariates[k] = level;
                if (level > 0) {
                    eta += config.beta[static_cast<std::size_t>(col + level - 1)];
                }
                col += levels[k] - 1;
            }
            eta += u[area];
            const double p = 1.0 / (1.0 + std::exp(-eta));
            unit.y_binary = unif(rng) < p ? 1 : 0;
            unit.y_continuous = eta + config.sigma_e * std_normal(rng);
            double log_size = config.c0 + config.c1 * unit.y_binary + config.sigma_z * std_normal(rng);
            if (config.log_size_step > 0.0) {
                log_size = std::round(log_size / config.log_size_step) * config.log_size_step;
            }
            unit.size_value = std::exp(log_size);
            units.push_back(std::move(unit));
        }
    }
    return Population{std::move(units), std::move(names), std::move(levels)};
}

std::vector<PoststratCell> index_cells(const Population &pop, const SampleDraw &draw) {
    std::map<std::pair<int, std::vector<int>>, PoststratCell> cells;
    for (const auto &u : pop.units()) {
        auto &cell = cells[{u.area_id, u.covariates}];
        cell.area_id = u.area_id;
        cell.covariate_key = u.covariates;
        ++cell.population_count;
    }
    for (std::size_t pos : draw.positions) {
        if (pos >= pop.size()) {
            throw ConfigError{"sample position " + std::to_string(pos) + " outside population"};
        }
        const auto &u = pop[pos];
        auto &cell = cells.at({u.area_id, u.covariates});
        ++cell.sample_count;
        cell.sample_positives += u.y_binary;
        cell.sample_continuous_sum += u.y_continuous;
    }
    std::vector<PoststratCell> out;
    out.reserve(cells.size());
    for (auto &[key, cell] : cells) {
        out.push_back(std::move(cell));
    }
    return out;
}

int design_width(std::span<const int> covariate_levels) {
    int width = 1;
    for (int l : covariate_levels) {
        width += l - 1;
    }
    return width;
}

Eigen::RowVectorXd design_row(std::span<const int> key, std::span<const int> covariate_levels) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(design_width(covariate_levels));
    row(0) = 1.0;
    int col = 1;
    for (std::size_t k = 0; k < covariate_levels.size(); ++k) {
        if (key[k] > 0) {
            row(col + key[k] - 1) = 1.0;
        }
        col += covariate_levels[k] - 1;
    }
    return row;
}

Eigen::MatrixXd design_matrix(std::span<const Unit> units, std::span<const int> covariate_levels) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(units.size()), design_width(covariate_levels));
    for (std::size_t i = 0; i < units.size(); ++i) {
        x.row(static_cast<Eigen::Index>(i)) = design_row(units[i].covariates, covariate_levels);
    }
    return x;
}

} // namespace sae
