#include "sae/poststrat.hpp"

#include "sae/diagnostics.hpp"
#include "sae/error.hpp"
#include "sae/random.hpp"
#include "sae/sample_distribution.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <thread>

namespace sae::poststrat {

namespace {

/// Column of the first element of a parameter block in a draws matrix.
std::size_t block_column(const PosteriorDraws &draws, const std::string &name, std::size_t size) {
    return draws.column(size == 1 ? name : name + "[0]");
}

Eigen::MatrixXd cell_design(std::span<const PoststratCell> cells,
                            std::span<const int> covariate_levels) {
    const int p = design_width(covariate_levels);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(cells.size()), p);
    for (std::size_t c = 0; c < cells.size(); ++c) {
        x.row(static_cast<Eigen::Index>(c)) = design_row(cells[c].covariate_key, covariate_levels);
    }
    return x;
}

} // namespace

std::vector<long> CellTable::area_sizes() const {
    std::vector<long> out(static_cast<std::size_t>(area_count), 0);
    for (std::size_t c = 0; c < size(); ++c) {
        out[static_cast<std::size_t>(area[c])] += population_count[c];
    }
    return out;
}

CellTable CellTable::from_cells(std::span<const PoststratCell> cells, int area_count) {
    CellTable t;
    t.area_count = area_count;
    for (const auto &c : cells) {
        t.area.push_back(c.area_id);
        t.population_count.push_back(c.population_count);
        t.sample_count.push_back(c.sample_count);
        t.sample_positives.push_back(c.sample_positives);
    }
    t.validate();
    return t;
}

void CellTable::validate() const {
    const auto n = area.size();
    if (population_count.size() != n || sample_count.size() != n || sample_positives.size() != n) {
        throw ConfigError{"cell table columns differ in length"};
    }
    for (std::size_t c = 0; c < n; ++c) {
        if (area[c] < 0 || area[c] >= area_count) {
            throw ConfigError{"cell " + std::to_string(c) + " has an area id out of range"};
        }
        if (sample_count[c] < 0 || sample_positives[c] < 0 || sample_positives[c] > sample_count[c]) {
            throw ConfigError{"cell " + std::to_string(c) + " has inconsistent sample counts"};
        }
        if (population_count[c] < sample_count[c]) {
            throw ConfigError{"cell " + std::to_string(c) + " has N < n (" +
                              std::to_string(population_count[c]) + " < " +
                              std::to_string(sample_count[c]) + ")"};
        }
    }
}

AreaMeanDraws predict_area_means(const CellTable &cells, int draws, const CellDrawFn &cell_draw,
                                 const PredictOptions &options) {
    cells.validate();
    if (draws < 1) {
        throw ConfigError{"need at least one draw"};
    }
    const auto m = static_cast<Eigen::Index>(cells.area_count);
    AreaMeanDraws out;
    out.means.resize(draws, m);
    out.positives.resize(draws, m);
    out.area_sizes = cells.area_sizes();
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(std::max(1, options.workers)));

    auto run = [&](int begin, int end, std::size_t worker) {
        try {
            std::vector<double> prob(cells.size());
            std::vector<long> counts(cells.size());
            std::vector<long> totals(static_cast<std::size_t>(m));
            for (int k = begin; k < end; ++k) {
                counts = cells.population_count;
                cell_draw(k, prob, counts);
                Rng rng = make_stream(options.seed, {static_cast<std::uint64_t>(k)});
                std::fill(totals.begin(), totals.end(), 0L);
                for (Eigen::Index a = 0; a < m; ++a) {
                    out.positives(k, a) = 0;
                }
                for (std::size_t c = 0; c < cells.size(); ++c) {
                    const long n = cells.sample_count[c];
                    if (counts[c] < n) {
                        throw ConfigError{"cell " + std::to_string(c) + " has N < n in draw " +
                                          std::to_string(k)};
                    }
                    const double p = std::clamp(prob[c], 0.0, 1.0);
                    long pos = 0;
                    if (options.regenerate_all) {
                        pos = std::binomial_distribution<long>(counts[c], p)(rng);
                    } else {
                        pos = cells.sample_positives[c];
                        if (counts[c] > n) {
                            pos += std::binomial_distribution<long>(counts[c] - n, p)(rng);
                        }
                    }
                    out.positives(k, cells.area[c]) += pos;
                    totals[static_cast<std::size_t>(cells.area[c])] += counts[c];
                }
                for (Eigen::Index a = 0; a < m; ++a) {
                    const auto total = totals[static_cast<std::size_t>(a)];
                    out.means(k, a) = total > 0 ? static_cast<double>(out.positives(k, a)) /
                                                      static_cast<double>(total)
                                                : std::numeric_limits<double>::quiet_NaN();
                }
            }
        } catch (...) {
            errors[worker] = std::current_exception();
        }
    };

    const int workers = std::clamp(options.workers, 1, draws);
    if (workers == 1) {
        run(0, draws, 0);
    } else {
        std::vector<std::thread> threads;
        const int chunk = (draws + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const int begin = w * chunk;
            const int end = std::min(draws, begin + chunk);
            if (begin < end) {
                threads.emplace_back(run, begin, end, static_cast<std::size_t>(w));
            }
        }
        for (auto &t : threads) {
            t.join();
        }
    }
    for (const auto &e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return out;
}

AreaMeanDraws predict_area_means_model1(const PosteriorDraws &draws,
                                        std::span<const PoststratCell> cells,
                                        std::span<const int> covariate_levels, int area_count,
                                        const PredictOptions &options) {
    const auto table = CellTable::from_cells(cells, area_count);
    const Eigen::MatrixXd x = cell_design(cells, covariate_levels);
    const auto p = static_cast<std::size_t>(x.cols());
    const auto beta0 = block_column(draws, "beta", p);
    const auto z0 = block_column(draws, "z_u", static_cast<std::size_t>(area_count));
    const auto sigma = draws.column("sigma_u");
    auto fn = [&](int k, std::span<double> prob, std::span<long>) {
        const auto row = draws.draws.row(k);
        const Eigen::VectorXd beta = row.segment(static_cast<Eigen::Index>(beta0),
                                                 static_cast<Eigen::Index>(p))
                                         .transpose();
        const Eigen::VectorXd eta = x * beta;
        const double s = row(static_cast<Eigen::Index>(sigma));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const double u = s * row(static_cast<Eigen::Index>(z0) + cells[c].area_id);
            prob[c] = ad::inv_logit(eta(static_cast<Eigen::Index>(c)) + u);
        }
    };
    return predict_area_means(table, static_cast<int>(draws.draws.rows()), fn, options);
}

AreaMeanDraws predict_area_means_model3(const PosteriorDraws &draws,
                                        std::span<const PoststratCell> cells,
                                        std::span<const int> covariate_levels, int area_count,
                                        models::Model3Mode mode, const PredictOptions &options) {
    const auto table = CellTable::from_cells(cells, area_count);
    const Eigen::MatrixXd x = cell_design(cells, covariate_levels);
    const auto p = static_cast<std::size_t>(x.cols());
    const auto beta0 = block_column(draws, "beta", p);
    const auto alpha0 = block_column(draws, "alpha", p);
    const auto z0 = block_column(draws, "z_u", static_cast<std::size_t>(area_count));
    const auto sigma_u = draws.column("sigma_u");
    const bool leon = mode == models::Model3Mode::LeonNovelo;
    const auto shift = draws.column(leon ? "kappa" : "a");
    const auto sigma_w = draws.column(leon ? "sigma_pi" : "sigma_eps");
    auto fn = [&](int k, std::span<double> prob, std::span<long>) {
        const auto row = draws.draws.row(k);
        const Eigen::VectorXd beta =
            row.segment(static_cast<Eigen::Index>(beta0), static_cast<Eigen::Index>(p)).transpose();
        const Eigen::VectorXd alpha =
            row.segment(static_cast<Eigen::Index>(alpha0), static_cast<Eigen::Index>(p)).transpose();
        const Eigen::VectorXd eta = x * beta;
        const Eigen::VectorXd t = x * alpha;
        const double su = row(static_cast<Eigen::Index>(sigma_u));
        const double a = row(static_cast<Eigen::Index>(shift));
        const double sw = row(static_cast<Eigen::Index>(sigma_w));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto ci = static_cast<Eigen::Index>(c);
            const double u = su * row(static_cast<Eigen::Index>(z0) + cells[c].area_id);
            const double ps = ad::inv_logit(eta(ci) + u);
            if (leon) {
                // Population model; complement via E(pi | y) = exp(y kappa + t + sigma^2 / 2).
                const double pi1 = std::min(1.0, models::lognormal_weight_mean(t(ci), a, 1, sw));
                const double pi0 = std::min(1.0, models::lognormal_weight_mean(t(ci), a, 0, sw));
                prob[c] = (pi1 >= 1.0 && pi0 >= 1.0) ? ps : models::nonsampled_frequency(ps, pi1, pi0);
            } else {
                const double e1 = std::max(1.0, models::lognormal_weight_mean(t(ci), a, 1, sw));
                const double e0 = std::max(1.0, models::lognormal_weight_mean(t(ci), a, 0, sw));
                prob[c] = models::sample_to_population_bernoulli(ps, e1, e0).value_or(ps);
            }
        }
    };
    return predict_area_means(table, static_cast<int>(draws.draws.rows()), fn, options);
}

WeightCells weight_cells(const models::Model2Spec &spec, std::span<const long> area_sizes) {
    spec.validate();
    if (static_cast<int>(area_sizes.size()) != spec.area_count) {
        throw ConfigError{"need one population size per area"};
    }
    const auto unique = spec.unique_weights();
    std::map<std::pair<int, int>, std::pair<long, long>> counts;
    for (std::size_t j = 0; j < spec.y.size(); ++j) {
        const auto level = static_cast<int>(
            std::lower_bound(unique.begin(), unique.end(), spec.weights[j]) - unique.begin());
        auto &c = counts[{spec.area_ids[j], level}];
        ++c.first;
        c.second += static_cast<long>(spec.y[j]);
    }
    WeightCells out;
    out.table.area_count = spec.area_count;
    std::vector<bool> sampled(static_cast<std::size_t>(spec.area_count), false);
    for (const auto &[key, c] : counts) {
        sampled[static_cast<std::size_t>(key.first)] = true;
        out.table.area.push_back(key.first);
        out.table.sample_count.push_back(c.first);
        out.table.sample_positives.push_back(c.second);
        // Placeholder: cell sizes are drawn per posterior draw.
        out.table.population_count.push_back(c.first);
        out.level.push_back(key.second);
        out.weight.push_back(unique[static_cast<std::size_t>(key.second)]);
    }
    // An area without sample has no weight cells; treat it as one cell at the median weight.
    for (int a = 0; a < spec.area_count; ++a) {
        if (!sampled[static_cast<std::size_t>(a)]) {
            const auto mid = static_cast<int>(unique.size() / 2);
            out.table.area.push_back(a);
            out.table.sample_count.push_back(0);
            out.table.sample_positives.push_back(0);
            out.table.population_count.push_back(area_sizes[static_cast<std::size_t>(a)]);
            out.level.push_back(mid);
            out.weight.push_back(unique[static_cast<std::size_t>(mid)]);
        }
    }
    // Cells of one area must be contiguous for the per-area size draws.
    std::vector<std::size_t> order(out.table.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return out.table.area[x] < out.table.area[y];
    });
    WeightCells sorted;
    sorted.table.area_count = spec.area_count;
    for (auto i : order) {
        sorted.table.area.push_back(out.table.area[i]);
        sorted.table.sample_count.push_back(out.table.sample_count[i]);
        sorted.table.sample_positives.push_back(out.table.sample_positives[i]);
        sorted.level.push_back(out.level[i]);
        sorted.weight.push_back(out.weight[i]);
    }
    // Default population counts: an even split of N_i that respects n_l, replaced per draw.
    for (int a = 0; a < spec.area_count; ++a) {
        std::vector<std::size_t> idx;
        for (std::size_t c = 0; c < sorted.table.area.size(); ++c) {
            if (sorted.table.area[c] == a) {
                idx.push_back(c);
            }
        }
        std::vector<double> phi(idx.size(), 1.0 / static_cast<double>(idx.size()));
        std::vector<long> minimum;
        for (auto c : idx) {
            minimum.push_back(sorted.table.sample_count[c]);
        }
        const auto n_l = largest_remainder_round(phi, area_sizes[static_cast<std::size_t>(a)], minimum);
        sorted.table.population_count.resize(sorted.table.area.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            sorted.table.population_count[idx[k]] = n_l[k];
        }
    }
    sorted.table.validate();
    return sorted;
}

std::vector<std::vector<long>> model2_cell_size_draws(const WeightCells &cells, int draws,
                                                      const HmcConfig &config) {
    if (config.chains * config.iterations != draws) {
        throw ConfigError{"cell size budget must match the number of posterior draws"};
    }
    const auto &t = cells.table;
    std::vector<std::vector<long>> out(static_cast<std::size_t>(draws),
                                       std::vector<long>(t.size(), 0));
    const auto sizes = t.area_sizes();
    for (int a = 0; a < t.area_count; ++a) {
        std::vector<std::size_t> idx;
        std::vector<long> counts;
        std::vector<double> weights;
        for (std::size_t c = 0; c < t.size(); ++c) {
            if (t.area[c] == a) {
                idx.push_back(c);
                counts.push_back(t.sample_count[c]);
                weights.push_back(cells.weight[c]);
            }
        }
        if (idx.empty()) {
            continue;
        }
        HmcConfig area_config = config;
        area_config.seed = config.seed * 1000003ULL + static_cast<std::uint64_t>(a);
        const long total = sizes[static_cast<std::size_t>(a)];
        std::vector<std::vector<long>> area_draws;
        if (std::all_of(counts.begin(), counts.end(), [](long c) { return c == 0; })) {
            std::vector<long> fixed;
            for (auto c : idx) {
                fixed.push_back(t.population_count[c]);
            }
            area_draws.assign(static_cast<std::size_t>(draws), fixed);
        } else {
            area_draws = multinomial_cell_sizes(counts, weights, total, area_config);
        }
        for (int k = 0; k < draws; ++k) {
            for (std::size_t j = 0; j < idx.size(); ++j) {
                out[static_cast<std::size_t>(k)][idx[j]] = area_draws[static_cast<std::size_t>(k)][j];
            }
        }
    }
    return out;
}

AreaMeanDraws predict_area_means_model2(const PosteriorDraws &draws, const models::Model2Spec &spec,
                                        const WeightCells &cells,
                                        const std::vector<std::vector<long>> &sizes,
                                        const PredictOptions &options) {
    const auto k_draws = static_cast<int>(draws.draws.rows());
    if (static_cast<int>(sizes.size()) != k_draws) {
        throw ConfigError{"need one cell size draw per posterior draw"};
    }
    const auto unique = spec.unique_weights();
    const auto m = static_cast<std::size_t>(spec.area_count);
    const auto beta0 = draws.column("beta0");
    const auto eta0 = block_column(draws, "eta", unique.size());
    const auto gamma = draws.column("gamma");
    const auto rho = draws.column("rho");
    const auto u0 = block_column(draws, "u", m);
    const auto zv0 = block_column(draws, "z_v", m);
    const auto sigma_v = draws.column("sigma_v");
    auto fn = [&](int k, std::span<double> prob, std::span<long> counts) {
        const auto row = draws.draws.row(k);
        std::vector<double> eta(unique.size());
        for (std::size_t l = 0; l < unique.size(); ++l) {
            eta[l] = row(static_cast<Eigen::Index>(eta0 + l));
        }
        const auto f = models::gp_function_values(unique, row(static_cast<Eigen::Index>(gamma)),
                                                  row(static_cast<Eigen::Index>(rho)), eta,
                                                  spec.jitter);
        for (std::size_t c = 0; c < cells.table.size(); ++c) {
            const auto a = static_cast<std::size_t>(cells.table.area[c]);
            const double area_effect =
                row(static_cast<Eigen::Index>(u0 + a)) +
                row(static_cast<Eigen::Index>(sigma_v)) * row(static_cast<Eigen::Index>(zv0 + a));
            prob[c] = ad::inv_logit(row(static_cast<Eigen::Index>(beta0)) +
                                    f[static_cast<std::size_t>(cells.level[c])] + area_effect);
            counts[c] = sizes[static_cast<std::size_t>(k)][c];
        }
    };
    return predict_area_means(cells.table, k_draws, fn, options);
}

ModelDensity multinomial_cell_density(std::span<const long> counts, std::span<const double> weights) {
    if (counts.size() != weights.size() || counts.size() < 2) {
        throw ConfigError{"multinomial cell model needs at least two cells with one weight each"};
    }
    auto n = std::make_shared<std::vector<double>>();
    auto log_w = std::make_shared<std::vector<double>>();
    auto inv_w = std::make_shared<std::vector<double>>();
    double total = 0.0;
    for (std::size_t l = 0; l < counts.size(); ++l) {
        if (counts[l] < 0 || !(weights[l] > 0.0)) {
            throw ConfigError{"cell counts must be non-negative and weights positive"};
        }
        n->push_back(static_cast<double>(counts[l]));
        log_w->push_back(std::log(weights[l]));
        inv_w->push_back(1.0 / weights[l]);
        total += static_cast<double>(counts[l]);
    }
    ParamSpace space;
    space.add("phi", counts.size(), Transform::Simplex);
    auto fn = [n, log_w, inv_w, total](std::span<const ad::Var> phi) {
        std::vector<ad::Var> terms;
        terms.reserve(phi.size() + 1);
        for (std::size_t l = 0; l < phi.size(); ++l) {
            if ((*n)[l] > 0.0) {
                terms.push_back((*n)[l] * (ad::log(phi[l]) - (*log_w)[l]));
            }
        }
        terms.push_back(-total * ad::log(ad::dot(phi, *inv_w)));
        return ad::sum(terms);
    };
    return {std::move(space), fn, "multinomial cell proportions with flat Dirichlet prior"};
}

std::vector<long> largest_remainder_round(std::span<const double> phi, long total,
                                          std::span<const long> minimum) {
    if (phi.empty()) {
        throw ConfigError{"no cells to round"};
    }
    if (!minimum.empty() && minimum.size() != phi.size()) {
        throw ConfigError{"minimum counts must match the cells"};
    }
    const double sum = std::accumulate(phi.begin(), phi.end(), 0.0);
    std::vector<long> out(phi.size());
    std::vector<std::pair<double, std::size_t>> remainder;
    long assigned = 0;
    for (std::size_t l = 0; l < phi.size(); ++l) {
        const double exact = static_cast<double>(total) * phi[l] / sum;
        out[l] = static_cast<long>(std::floor(exact));
        assigned += out[l];
        remainder.emplace_back(exact - static_cast<double>(out[l]), l);
    }
    std::stable_sort(remainder.begin(), remainder.end(),
                     [](const auto &a, const auto &b) { return a.first > b.first; });
    for (long k = 0; k < total - assigned; ++k) {
        ++out[remainder[static_cast<std::size_t>(k) % remainder.size()].second];
    }
    if (minimum.empty()) {
        return out;
    }
    if (std::accumulate(minimum.begin(), minimum.end(), 0L) > total) {
        throw ConfigError{"cell minimums exceed the area total"};
    }
    long deficit = 0;
    for (std::size_t l = 0; l < out.size(); ++l) {
        if (out[l] < minimum[l]) {
            deficit += minimum[l] - out[l];
            out[l] = minimum[l];
        }
    }
    while (deficit > 0) {
        std::size_t best = 0;
        long room = -1;
        for (std::size_t l = 0; l < out.size(); ++l) {
            if (out[l] - minimum[l] > room) {
                room = out[l] - minimum[l];
                best = l;
            }
        }
        --out[best];
        --deficit;
    }
    return out;
}

std::vector<std::vector<long>> multinomial_cell_sizes(std::span<const long> counts,
                                                      std::span<const double> weights,
                                                      long area_total, const HmcConfig &config) {
    const long n = std::accumulate(counts.begin(), counts.end(), 0L);
    if (n > area_total) {
        throw ConfigError{"sample size exceeds the area total"};
    }
    const auto draws = static_cast<std::size_t>(config.chains) * static_cast<std::size_t>(config.iterations);
    if (counts.size() == 1) {
        return std::vector<std::vector<long>>(draws, std::vector<long>{area_total});
    }
    const auto density = multinomial_cell_density(counts, weights);
    const auto post = hmc_sample(density, config);
    std::vector<std::vector<long>> out;
    out.reserve(draws);
    std::vector<double> phi(counts.size());
    for (Eigen::Index k = 0; k < post.draws.rows(); ++k) {
        for (std::size_t l = 0; l < phi.size(); ++l) {
            phi[l] = post.draws(k, static_cast<Eigen::Index>(l));
        }
        out.push_back(largest_remainder_round(phi, area_total, counts));
    }
    return out;
}

Summary summarise_draws(std::span<const double> values) {
    if (values.empty()) {
        throw ConfigError{"no draws to summarise"};
    }
    Summary s;
    const double n = static_cast<double>(values.size());
    // Shifted by the first draw so constant draws give an exact mean and a zero sd.
    const double shift = values.front();
    double sum = 0.0;
    for (double v : values) {
        sum += v - shift;
    }
    const double centre = sum / n;
    s.mean = shift + centre;
    double ss = 0.0;
    for (double v : values) {
        ss += (v - shift - centre) * (v - shift - centre);
    }
    s.sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    std::vector<double> copy(values.begin(), values.end());
    s.lo95 = quantile(copy, 0.025);
    s.hi95 = quantile(std::move(copy), 0.975);
    return s;
}

Aggregate aggregate(const Eigen::MatrixXd &area_means, std::span<const long> area_sizes) {
    if (static_cast<std::size_t>(area_means.cols()) != area_sizes.size()) {
        throw ConfigError{"need one population size per area"};
    }
    Aggregate out;
    std::vector<double> column(static_cast<std::size_t>(area_means.rows()));
    for (Eigen::Index a = 0; a < area_means.cols(); ++a) {
        for (Eigen::Index k = 0; k < area_means.rows(); ++k) {
            column[static_cast<std::size_t>(k)] = area_means(k, a);
        }
        out.areas.push_back(summarise_draws(column));
    }
    const double total = static_cast<double>(std::accumulate(area_sizes.begin(), area_sizes.end(), 0L));
    out.state_draws.resize(static_cast<std::size_t>(area_means.rows()));
    for (Eigen::Index k = 0; k < area_means.rows(); ++k) {
        double s = 0.0;
        for (Eigen::Index a = 0; a < area_means.cols(); ++a) {
            s += static_cast<double>(area_sizes[static_cast<std::size_t>(a)]) * area_means(k, a);
        }
        out.state_draws[static_cast<std::size_t>(k)] = s / total;
    }
    out.state = summarise_draws(out.state_draws);
    return out;
}

} // namespace sae::poststrat
