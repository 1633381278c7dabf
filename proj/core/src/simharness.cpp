#include "sae/simharness.hpp"

#include "sae/direct.hpp"
#include "sae/error.hpp"
#include "sae/hmc.hpp"
#include "sae/io.hpp"
#include "sae/nested_error.hpp"
#include "sae/poststrat.hpp"
#include "sae/random.hpp"
#include "sae/sampling.hpp"
#include "sae/spatial.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace sae::sim {

namespace {

constexpr std::array<std::pair<Estimator, std::string_view>, 8> kNames{{
    {Estimator::HT, "HT"},
    {Estimator::UW, "UW"},
    {Estimator::Model1, "Model1"},
    {Estimator::Model2, "Model2"},
    {Estimator::Model3, "Model3"},
    {Estimator::NerEblup, "NER-EBLUP"},
    {Estimator::PseudoEblup, "PseudoEBLUP"},
    {Estimator::Oracle, "Oracle"},
}};

struct Fitted {
    std::vector<std::optional<double>> estimate;
    std::vector<std::optional<double>> se;
    std::vector<std::optional<direct::Interval>> interval;
};

struct ReplicateResult {
    std::vector<RawEstimate> raw;
    std::map<Estimator, double> seconds;
    std::vector<Estimator> failed;
    std::vector<std::string> warnings;
};

/// Shared, read-only inputs of every replicate.
struct Context {
    const SimConfig &config;
    const Population &pop;
    std::vector<double> truth;
    Eigen::MatrixXd xbar_pop;
    spatial::Adjacency adjacency;
};

Eigen::MatrixXd population_covariate_means(const Population &pop) {
    const auto &levels = pop.covariate_levels();
    const int p = design_width(levels);
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(pop.area_count(), p);
    for (const auto &u : pop.units()) {
        sums.row(u.area_id) += design_row(u.covariates, levels);
    }
    for (int i = 0; i < pop.area_count(); ++i) {
        sums.row(i) /= static_cast<double>(pop.area_sizes()[static_cast<std::size_t>(i)]);
    }
    return sums;
}

HmcConfig hmc_config(const McmcBudget &budget, std::uint64_t seed) {
    HmcConfig c;
    c.chains = budget.chains;
    c.warmup = budget.warmup;
    c.iterations = budget.iterations;
    c.target_accept = budget.target_accept;
    c.seed = seed;
    return c;
}

Fitted from_draws(const poststrat::AreaMeanDraws &draws) {
    const auto agg = poststrat::aggregate(draws.means, draws.area_sizes);
    Fitted f;
    for (const auto &s : agg.areas) {
        f.estimate.emplace_back(s.mean);
        f.se.emplace_back(s.sd);
        f.interval.emplace_back(direct::Interval{s.lo95, s.hi95});
    }
    return f;
}

Fitted with_normal_intervals(const direct::AreaValues &est, const direct::AreaValues &var) {
    Fitted f;
    f.estimate = est;
    for (std::size_t i = 0; i < est.size(); ++i) {
        if (est[i] && var[i]) {
            const double se = std::sqrt(*var[i]);
            f.se.emplace_back(se);
            f.interval.emplace_back(direct::normal_interval(*est[i], se));
        } else {
            f.se.emplace_back();
            f.interval.emplace_back();
        }
    }
    return f;
}

Fitted point_only(const Eigen::VectorXd &est) {
    Fitted f;
    for (Eigen::Index i = 0; i < est.size(); ++i) {
        f.estimate.emplace_back(est(i));
        f.se.emplace_back();
        f.interval.emplace_back();
    }
    return f;
}

Fitted fit_one(Estimator e, const Context &ctx, const SampleDraw &draw, const SampleFrame &frame,
               std::uint64_t seed, std::vector<std::string> &warnings) {
    const int m = ctx.pop.area_count();
    const auto y = frame.y_binary();
    const auto areas = frame.area_ids();
    const auto &sizes = ctx.pop.area_sizes();
    const std::uint64_t fit_seed = seed * 31ULL + static_cast<std::uint64_t>(e);
    poststrat::PredictOptions predict;
    predict.seed = fit_seed;
    const auto keep = [&](const PosteriorDraws &d) {
        for (const auto &w : d.warnings) {
            warnings.push_back(std::string{to_string(e)} + ": " + w);
        }
    };

    switch (e) {
    case Estimator::HT:
        return with_normal_intervals(direct::hajek_mean(y, frame.weights, areas, m),
                                     direct::direct_variance(y, frame.weights, areas, sizes));
    case Estimator::UW:
        return with_normal_intervals(direct::unweighted_mean(y, areas, m),
                                     direct::unweighted_variance(y, areas, sizes));
    case Estimator::Model1: {
        const auto density = models::model1_logdensity(models::Model1Spec::from_frame(frame));
        const auto post = hmc_sample(density, hmc_config(ctx.config.mcmc, fit_seed));
        keep(post);
        const auto cells = index_cells(ctx.pop, draw);
        return from_draws(poststrat::predict_area_means_model1(post, cells,
                                                               ctx.pop.covariate_levels(), m, predict));
    }
    case Estimator::Model2: {
        const auto spec = models::Model2Spec::from_frame(frame, ctx.adjacency);
        const auto post = hmc_sample(models::model2_logdensity(spec),
                                     hmc_config(ctx.config.mcmc, fit_seed));
        keep(post);
        const auto cells = poststrat::weight_cells(spec, sizes);
        auto cell_config = hmc_config(ctx.config.mcmc, fit_seed + 1);
        cell_config.parallel = false;
        const auto n_draws = static_cast<int>(post.draws.rows());
        const auto cell_sizes = poststrat::model2_cell_size_draws(cells, n_draws, cell_config);
        return from_draws(poststrat::predict_area_means_model2(post, spec, cells, cell_sizes, predict));
    }
    case Estimator::Model3: {
        const auto spec = models::Model3Spec::from_frame(frame, ctx.config.model3_mode);
        const auto post = hmc_sample(models::model3_logdensity(spec),
                                     hmc_config(ctx.config.mcmc, fit_seed));
        keep(post);
        const auto cells = index_cells(ctx.pop, draw);
        return from_draws(poststrat::predict_area_means_model3(
            post, cells, ctx.pop.covariate_levels(), m, ctx.config.model3_mode, predict));
    }
    case Estimator::NerEblup: {
        const Eigen::MatrixXd x = design_matrix(frame.units, frame.covariate_levels);
        const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
        const auto fit = classical::fit_ner(yv, x, areas, m);
        for (const auto &w : fit.warnings) {
            warnings.push_back("NER-EBLUP: " + w);
        }
        return point_only(classical::blup_area_means(fit, ctx.xbar_pop, sizes));
    }
    case Estimator::PseudoEblup: {
        const Eigen::MatrixXd x = design_matrix(frame.units, frame.covariate_levels);
        const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
        const auto fit = classical::fit_pseudo_eblup(yv, x, frame.weights, areas, m);
        return point_only(classical::pseudo_eblup_means(fit, ctx.xbar_pop));
    }
    case Estimator::Oracle: {
        Fitted f;
        for (double t : ctx.truth) {
            f.estimate.emplace_back(t);
            f.se.emplace_back(0.0);
            f.interval.emplace_back(direct::Interval{t, t});
        }
        return f;
    }
    }
    throw ConfigError{"unknown estimator"};
}

ReplicateResult run_replicate(const Context &ctx, int r) {
    ReplicateResult out;
    const std::uint64_t seed = ctx.config.base_seed + static_cast<std::uint64_t>(r);
    Rng rng = make_stream(seed, {0});
    const auto draw = draw_sample(ctx.pop, ctx.config.design, ctx.config.n_sample, rng);
    const auto frame = make_sample_frame(ctx.pop, draw);
    for (const auto e : ctx.config.estimators) {
        std::vector<std::string> warnings;
        try {
            const auto start = std::chrono::steady_clock::now();
            const auto fitted = fit_one(e, ctx, draw, frame, seed, warnings);
            const auto stop = std::chrono::steady_clock::now();
            out.seconds[e] = ctx.config.record_timing
                                 ? std::chrono::duration<double>(stop - start).count()
                                 : 0.0;
            for (std::size_t i = 0; i < fitted.estimate.size(); ++i) {
                if (!fitted.estimate[i]) {
                    out.warnings.push_back("replicate " + std::to_string(r) + " " +
                                           std::string{to_string(e)} + ": no estimate for area " +
                                           std::to_string(i));
                    continue;
                }
                RawEstimate rec;
                rec.estimator = e;
                rec.replicate = r;
                rec.area = static_cast<int>(i);
                rec.truth = ctx.truth[i];
                rec.estimate = *fitted.estimate[i];
                rec.se = fitted.se[i];
                if (fitted.interval[i]) {
                    rec.lo95 = fitted.interval[i]->lo;
                    rec.hi95 = fitted.interval[i]->hi;
                }
                out.raw.push_back(rec);
            }
        } catch (const std::exception &ex) {
            out.failed.push_back(e);
            out.warnings.push_back("replicate " + std::to_string(r) + " " +
                                   std::string{to_string(e)} + " failed: " + ex.what());
        }
        for (auto &w : warnings) {
            out.warnings.push_back("replicate " + std::to_string(r) + " " + w);
        }
    }
    return out;
}

std::string format_optional(const std::optional<double> &v) {
    if (!v) {
        return "NA";
    }
    std::ostringstream os;
    os << std::setprecision(10) << *v;
    return os.str();
}

} // namespace

std::string_view to_string(Estimator e) noexcept {
    for (const auto &[key, name] : kNames) {
        if (key == e) {
            return name;
        }
    }
    return "unknown";
}

Estimator estimator_from_string(std::string_view text) {
    for (const auto &[key, name] : kNames) {
        if (name == text) {
            return key;
        }
    }
    std::string known;
    for (const auto &[key, name] : kNames) {
        known += (known.empty() ? "" : ", ") + std::string{name};
    }
    throw ConfigError{"unknown estimator '" + std::string{text} + "' (expected one of " + known + ")"};
}

void SimConfig::validate() const {
    if (replicates < 1) {
        throw ConfigError{"replicates must be at least 1"};
    }
    if (n_sample < 1) {
        throw ConfigError{"n_sample must be at least 1"};
    }
    if (workers < 1) {
        throw ConfigError{"workers must be at least 1"};
    }
    if (mcmc.chains < 1 || mcmc.warmup < 0 || mcmc.iterations < 1) {
        throw ConfigError{"MCMC budget needs chains >= 1, warmup >= 0 and iterations >= 1"};
    }
    for (std::size_t i = 0; i < estimators.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (estimators[i] == estimators[j]) {
                throw ConfigError{"estimator " + std::string{to_string(estimators[i])} +
                                  " listed twice"};
            }
        }
    }
}

const EstimatorMetrics &SimReport::metrics(Estimator e) const {
    for (const auto &s : summary) {
        if (s.estimator == e) {
            return s;
        }
    }
    throw ConfigError{"estimator " + std::string{to_string(e)} + " not in report"};
}

EstimatorMetrics compute_metrics(Estimator e, std::span<const RawEstimate> raw, int area_count) {
    EstimatorMetrics out;
    out.estimator = e;
    std::vector<double> error_sum(static_cast<std::size_t>(area_count), 0.0);
    std::vector<long> error_count(static_cast<std::size_t>(area_count), 0);
    double sq = 0.0;
    long n = 0;
    long intervals = 0;
    long covered = 0;
    for (const auto &r : raw) {
        if (r.estimator != e) {
            continue;
        }
        const double err = r.estimate - r.truth;
        sq += err * err;
        ++n;
        error_sum[static_cast<std::size_t>(r.area)] += err;
        ++error_count[static_cast<std::size_t>(r.area)];
        if (r.lo95 && r.hi95) {
            ++intervals;
            covered += (*r.lo95 <= r.truth && r.truth <= *r.hi95) ? 1 : 0;
        }
    }
    if (n == 0) {
        out.mse = std::numeric_limits<double>::quiet_NaN();
        out.abs_bias = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    out.mse = sq / static_cast<double>(n);
    double bias = 0.0;
    int areas = 0;
    for (std::size_t i = 0; i < error_sum.size(); ++i) {
        if (error_count[i] > 0) {
            bias += std::abs(error_sum[i] / static_cast<double>(error_count[i]));
            ++areas;
        }
    }
    out.abs_bias = bias / areas;
    if (intervals > 0) {
        out.coverage = static_cast<double>(covered) / static_cast<double>(intervals);
    }
    return out;
}

SimReport run(const SimConfig &config) {
    config.validate();
    if (config.population_csv) {
        return run(config, io::read_population_csv(*config.population_csv));
    }
    return run(config, generate_population(config.generator));
}

SimReport run(const SimConfig &config, const Population &pop) {
    config.validate();
    if (config.n_sample > pop.size()) {
        throw ConfigError{"n_sample (" + std::to_string(config.n_sample) +
                          ") exceeds the population size (" + std::to_string(pop.size()) + ")"};
    }
    Context ctx{config, pop, pop.area_proportions(), population_covariate_means(pop),
                spatial::make_lattice_adjacency(pop.area_count())};

    std::vector<ReplicateResult> results(static_cast<std::size_t>(config.replicates));
    std::atomic<int> next{0};
    std::mutex progress_mutex;
    auto worker = [&] {
        for (int r = next++; r < config.replicates; r = next++) {
            results[static_cast<std::size_t>(r)] = run_replicate(ctx, r);
            if (config.progress) {
                const std::lock_guard lock{progress_mutex};
                std::cerr << "replicate " << r + 1 << "/" << config.replicates << " done\n";
            }
        }
    };
    const int workers = std::min(config.workers, config.replicates);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int w = 0; w < workers; ++w) {
            threads.emplace_back(worker);
        }
        for (auto &t : threads) {
            t.join();
        }
    }

    SimReport report;
    report.config = config;
    report.truth = ctx.truth;
    for (int r = 0; r < config.replicates; ++r) {
        report.seeds.push_back(config.base_seed + static_cast<std::uint64_t>(r));
    }
    for (auto &res : results) {
        report.raw.insert(report.raw.end(), res.raw.begin(), res.raw.end());
        report.warnings.insert(report.warnings.end(), res.warnings.begin(), res.warnings.end());
    }
    const int m = pop.area_count();
    for (const auto e : config.estimators) {
        auto metrics = compute_metrics(e, report.raw, m);
        double seconds = 0.0;
        for (const auto &res : results) {
            if (std::find(res.failed.begin(), res.failed.end(), e) != res.failed.end()) {
                ++metrics.failures;
            } else if (auto it = res.seconds.find(e); it != res.seconds.end()) {
                seconds += it->second;
                ++metrics.replicates_used;
            }
        }
        metrics.mean_seconds = metrics.replicates_used > 0 ? seconds / metrics.replicates_used : 0.0;
        if (metrics.failures > 0) {
            report.warnings.push_back(std::string{to_string(e)} + ": " +
                                      std::to_string(metrics.failures) +
                                      " replicate fit(s) failed and were excluded");
        }
        report.summary.push_back(metrics);
    }

    // Per-area RMSE against the HT direct estimator.
    auto area_rmse = [&](Estimator e) {
        std::vector<double> sq(static_cast<std::size_t>(m), 0.0);
        std::vector<long> count(static_cast<std::size_t>(m), 0);
        for (const auto &r : report.raw) {
            if (r.estimator == e) {
                const double err = r.estimate - r.truth;
                sq[static_cast<std::size_t>(r.area)] += err * err;
                ++count[static_cast<std::size_t>(r.area)];
            }
        }
        for (std::size_t i = 0; i < sq.size(); ++i) {
            sq[i] = count[i] > 0 ? std::sqrt(sq[i] / static_cast<double>(count[i]))
                                 : std::numeric_limits<double>::quiet_NaN();
        }
        return sq;
    };
    if (std::find(config.estimators.begin(), config.estimators.end(), Estimator::HT) !=
        config.estimators.end()) {
        const auto direct_rmse = area_rmse(Estimator::HT);
        for (const auto e : config.estimators) {
            if (e == Estimator::HT) {
                continue;
            }
            const auto model_rmse = area_rmse(e);
            auto &rows = report.per_area[e];
            for (int i = 0; i < m; ++i) {
                const auto k = static_cast<std::size_t>(i);
                rows.push_back({i, direct_rmse[k], model_rmse[k], direct_rmse[k] - model_rmse[k]});
            }
        }
    }
    return report;
}

void report_write(const SimReport &report, const std::filesystem::path &dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    auto open = [&](const char *name) {
        std::ofstream os{dir / name};
        if (!os) {
            throw std::runtime_error{"cannot write " + (dir / name).string()};
        }
        os << std::setprecision(10);
        return os;
    };

    {
        auto os = open("summary.csv");
        os << "estimator,mse,abs_bias,coverage,mean_seconds,replicates_used,failures\n";
        for (const auto &s : report.summary) {
            os << to_string(s.estimator) << ',' << s.mse << ',' << s.abs_bias << ','
               << format_optional(s.coverage) << ',' << s.mean_seconds << ','
               << s.replicates_used << ',' << s.failures << '\n';
        }
    }
    {
        auto os = open("per_area.csv");
        os << "estimator,area_id,rmse_direct,rmse_model,reduction\n";
        for (const auto &[e, rows] : report.per_area) {
            for (const auto &r : rows) {
                os << to_string(e) << ',' << r.area << ',' << r.rmse_direct << ',' << r.rmse_model
                   << ',' << r.reduction << '\n';
            }
        }
    }
    {
        auto os = open("raw_estimates.csv");
        os << "estimator,replicate,area_id,truth,estimate,se,lo95,hi95\n";
        for (const auto &r : report.raw) {
            os << to_string(r.estimator) << ',' << r.replicate << ',' << r.area << ',' << r.truth
               << ',' << r.estimate << ',' << format_optional(r.se) << ','
               << format_optional(r.lo95) << ',' << format_optional(r.hi95) << '\n';
        }
    }
    {
        auto os = open("manifest.json");
        os << io::sim_manifest_json(report) << '\n';
    }
}

} // namespace sae::sim
