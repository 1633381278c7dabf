#include "cli.hpp"

#include "sae/bayes_models.hpp"
#include "sae/diagnostics.hpp"
#include "sae/direct.hpp"
#include "sae/error.hpp"
#include "sae/hmc.hpp"
#include "sae/io.hpp"
#include "sae/nested_error.hpp"
#include "sae/poststrat.hpp"
#include "sae/random.hpp"
#include "sae/sampling.hpp"
#include "sae/simharness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace sae::cli {

namespace {

/// Run-shape knobs shared by several subcommands.
struct RunFlags {
    std::optional<std::uint64_t> seed;
    std::optional<int> chains;
    std::optional<int> iters;
    std::optional<int> warmup;
    std::string out{"-"};
};

void add_run_flags(CLI::App *cmd, RunFlags &f, bool mcmc) {
    cmd->add_option("--seed", f.seed, "Random seed");
    if (mcmc) {
        cmd->add_option("--chains", f.chains, "MCMC chains")->check(CLI::PositiveNumber);
        cmd->add_option("--iters", f.iters, "Kept MCMC iterations per chain")->check(CLI::PositiveNumber);
        cmd->add_option("--warmup", f.warmup, "MCMC warmup iterations per chain")
            ->check(CLI::NonNegativeNumber);
    }
    cmd->add_option("--out", f.out, "Output path ('-' for stdout)");
}

HmcConfig hmc_from(const RunFlags &f) {
    HmcConfig c;
    c.seed = f.seed.value_or(1);
    c.chains = f.chains.value_or(4);
    c.iterations = f.iters.value_or(1000);
    c.warmup = f.warmup.value_or(1000);
    c.validate();
    return c;
}

std::string read_input(const std::string &path, std::istream &in) {
    if (path.empty() || path == "-") {
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    }
    return io::read_text(path);
}

void emit(const std::string &path, const std::string &text, std::ostream &out) {
    if (path.empty() || path == "-") {
        out << text;
    } else {
        io::write_text(path, text);
    }
}

void report_chains(const PosteriorDraws &d, std::ostream &err) {
    for (int c = 0; c < d.chains; ++c) {
        const auto k = static_cast<std::size_t>(c);
        err << "chain " << c << " step_size=" << d.step_sizes[k] << " accept=" << d.mean_accept[k]
            << '\n';
    }
    err << "divergences=" << d.divergences << '\n';
    for (const auto &w : d.warnings) {
        err << "warning: " << w << '\n';
    }
}

struct Priors {
    std::optional<double> sigma2_beta;
    std::optional<double> kappa;
    std::optional<double> jitter;
};

Priors read_priors(const std::string &path) {
    Priors p;
    if (path.empty()) {
        return p;
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_text(path));
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError{"prior config is not valid JSON: " + std::string{e.what()}};
    }
    for (const auto &[key, value] : j.items()) {
        if (key != "sigma2_beta" && key != "kappa" && key != "jitter") {
            throw ConfigError{"unknown key '" + key + "' in prior config"};
        }
        if (!value.is_number() || !(value.get<double>() > 0.0)) {
            throw ConfigError{"prior setting '" + key + "' must be a positive number"};
        }
    }
    if (j.contains("sigma2_beta")) {
        p.sigma2_beta = j["sigma2_beta"].get<double>();
    }
    if (j.contains("kappa")) {
        p.kappa = j["kappa"].get<double>();
    }
    if (j.contains("jitter")) {
        p.jitter = j["jitter"].get<double>();
    }
    return p;
}

/// Cells file with its sample counts recomputed from the sample actually supplied.
std::vector<PoststratCell> cells_for_sample(const io::CellFile &file, const SampleFrame &frame) {
    std::map<std::pair<int, std::vector<int>>, std::size_t> index;
    auto cells = file.cells;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        cells[c].sample_count = 0;
        cells[c].sample_positives = 0;
        cells[c].sample_continuous_sum = 0.0;
        index[{cells[c].area_id, cells[c].covariate_key}] = c;
    }
    for (const auto &u : frame.units) {
        const auto it = index.find({u.area_id, u.covariates});
        if (it == index.end()) {
            throw ConfigError{"sampled unit " + std::to_string(u.unit_id) +
                              " falls in no cell of the cells file"};
        }
        auto &cell = cells[it->second];
        ++cell.sample_count;
        cell.sample_positives += u.y_binary;
        cell.sample_continuous_sum += u.y_continuous;
    }
    for (const auto &c : cells) {
        if (c.sample_count > c.population_count) {
            throw ConfigError{"a cell of area " + std::to_string(c.area_id) +
                              " has more sampled units than its population count"};
        }
    }
    return cells;
}

Eigen::MatrixXd cell_covariate_means(const io::CellFile &file) {
    const int p = design_width(file.covariate_levels);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(file.area_sizes.size()), p);
    for (const auto &c : file.cells) {
        out.row(c.area_id) += static_cast<double>(c.population_count) *
                              design_row(c.covariate_key, file.covariate_levels);
    }
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        out.row(i) /= static_cast<double>(file.area_sizes[static_cast<std::size_t>(i)]);
    }
    return out;
}

io::EstimateSet from_aggregate(const std::string &model, const poststrat::Aggregate &agg) {
    io::EstimateSet set;
    set.model = model;
    for (std::size_t i = 0; i < agg.areas.size(); ++i) {
        const auto &s = agg.areas[i];
        set.areas.push_back({static_cast<int>(i), s.mean, s.sd, s.lo95, s.hi95});
    }
    set.state = io::EstimateRecord{-1, agg.state.mean, agg.state.sd, agg.state.lo95, agg.state.hi95};
    return set;
}

io::EstimateSet point_estimates(const std::string &model, const Eigen::VectorXd &est,
                                std::span<const long> sizes) {
    io::EstimateSet set;
    set.model = model;
    double total = 0.0;
    double weighted = 0.0;
    for (Eigen::Index i = 0; i < est.size(); ++i) {
        set.areas.push_back({static_cast<int>(i), est(i), std::nullopt, std::nullopt, std::nullopt});
        total += static_cast<double>(sizes[static_cast<std::size_t>(i)]);
        weighted += static_cast<double>(sizes[static_cast<std::size_t>(i)]) * est(i);
    }
    set.state = io::EstimateRecord{-1, weighted / total, std::nullopt, std::nullopt, std::nullopt};
    return set;
}

struct FitArgs {
    RunFlags run;
    std::string model;
    std::string sample;
    std::string cells;
    std::string adjacency;
    std::string priors;
    std::string draws_out;
    std::string csv_out;
    std::string model3_mode{"pfeffermann-sverchkov"};
    std::string structure{"iid"};
    std::string scaling{"total-sample-size"};
};

void require(const std::string &value, const char *flag, const std::string &model) {
    if (value.empty()) {
        throw ConfigError{std::string{"model "} + model + " needs " + flag};
    }
}

int do_fit(const FitArgs &a, std::istream &in, std::ostream &out, std::ostream &err) {
    const auto priors = read_priors(a.priors);
    const bool needs_cells = a.model != "eff-counts";
    if (needs_cells) {
        require(a.cells, "--cells", a.model);
    }
    if (a.model == "model2") {
        require(a.adjacency, "--adjacency", a.model);
    }
    std::optional<io::CellFile> cellfile;
    if (!a.cells.empty()) {
        cellfile = io::read_cells_csv(a.cells);
    }
    const std::string sample_text = read_input(a.sample, in);
    const auto frame = cellfile ? io::parse_sample_csv(sample_text, cellfile->area_sizes,
                                                       cellfile->covariate_levels)
                                : io::parse_sample_csv(sample_text);
    const int m = frame.area_count();
    auto hmc = hmc_from(a.run);
    io::EstimateSet set;
    std::optional<PosteriorDraws> posterior;
    poststrat::PredictOptions predict;
    predict.seed = hmc.seed;

    if (a.model == "model1") {
        auto spec = models::Model1Spec::from_frame(frame, weight_scaling_from_string(a.scaling));
        spec.sigma2_beta = priors.sigma2_beta.value_or(spec.sigma2_beta);
        spec.kappa_u = priors.kappa.value_or(spec.kappa_u);
        posterior = hmc_sample(models::model1_logdensity(spec), hmc);
        const auto cells = cells_for_sample(*cellfile, frame);
        const auto draws = poststrat::predict_area_means_model1(*posterior, cells,
                                                                cellfile->covariate_levels, m, predict);
        set = from_aggregate(a.model, poststrat::aggregate(draws.means, draws.area_sizes));
    } else if (a.model == "model2") {
        auto spec = models::Model2Spec::from_frame(frame, io::read_adjacency_csv(a.adjacency, m));
        spec.sigma2_beta = priors.sigma2_beta.value_or(spec.sigma2_beta);
        if (priors.kappa) {
            spec.kappa_gamma = spec.kappa_rho = spec.kappa_tau = spec.kappa_v = *priors.kappa;
        }
        spec.jitter = priors.jitter.value_or(spec.jitter);
        posterior = hmc_sample(models::model2_logdensity(spec), hmc);
        const auto cells = poststrat::weight_cells(spec, frame.area_sizes);
        auto cell_config = hmc;
        cell_config.seed = hmc.seed + 1;
        cell_config.parallel = false;
        const auto sizes = poststrat::model2_cell_size_draws(
            cells, static_cast<int>(posterior->draws.rows()), cell_config);
        const auto draws = poststrat::predict_area_means_model2(*posterior, spec, cells, sizes, predict);
        set = from_aggregate(a.model, poststrat::aggregate(draws.means, draws.area_sizes));
    } else if (a.model == "model3") {
        const auto mode = io::model3_mode_from_string(a.model3_mode);
        auto spec = models::Model3Spec::from_frame(frame, mode);
        spec.sigma2_coef = priors.sigma2_beta.value_or(spec.sigma2_coef);
        spec.kappa = priors.kappa.value_or(spec.kappa);
        posterior = hmc_sample(models::model3_logdensity(spec), hmc);
        const auto cells = cells_for_sample(*cellfile, frame);
        const auto draws = poststrat::predict_area_means_model3(
            *posterior, cells, cellfile->covariate_levels, m, mode, predict);
        set = from_aggregate(a.model, poststrat::aggregate(draws.means, draws.area_sizes));
    } else if (a.model == "ner" || a.model == "pseudo-eblup") {
        const Eigen::MatrixXd x = design_matrix(frame.units, frame.covariate_levels);
        const auto yv = frame.y_continuous();
        const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(yv.data(), static_cast<Eigen::Index>(yv.size()));
        const auto xbar_pop = cell_covariate_means(*cellfile);
        const auto areas = frame.area_ids();
        if (a.model == "ner") {
            const auto fit = classical::fit_ner(y, x, areas, m);
            set = point_estimates(a.model, classical::blup_area_means(fit, xbar_pop, frame.area_sizes),
                                  frame.area_sizes);
            set.warnings = fit.warnings;
        } else {
            const auto fit = classical::fit_pseudo_eblup(y, x, frame.weights, areas, m);
            set = point_estimates(a.model, classical::pseudo_eblup_means(fit, xbar_pop),
                                  frame.area_sizes);
        }
    } else if (a.model == "eff-counts") {
        const auto y = frame.y_binary();
        const auto de = direct::design_effect_and_kish(y, frame.weights, frame.area_ids(), m);
        models::EffectiveCountsSpec spec;
        for (int i = 0; i < m; ++i) {
            if (!de[static_cast<std::size_t>(i)]) {
                throw ConfigError{"area " + std::to_string(i) + " has no sampled units"};
            }
            spec.ystar.push_back(de[static_cast<std::size_t>(i)]->y_star);
            spec.n_eff.push_back(de[static_cast<std::size_t>(i)]->n_eff);
        }
        spec.X = Eigen::MatrixXd::Ones(m, 1);
        spec.structure = models::area_structure_from_string(a.structure);
        if (!a.adjacency.empty()) {
            spec.adjacency = io::read_adjacency_csv(a.adjacency, m);
        } else if (spec.structure != models::AreaStructure::Iid) {
            throw ConfigError{"structure " + a.structure + " needs --adjacency"};
        }
        spec.sigma2_beta = priors.sigma2_beta.value_or(spec.sigma2_beta);
        spec.kappa = priors.kappa.value_or(spec.kappa);
        const auto density = models::effective_counts_logdensity(spec);
        posterior = hmc_sample(density, hmc);
        Eigen::MatrixXd means(posterior->draws.rows(), m);
        const auto beta = posterior->column("beta");
        std::vector<double> x(static_cast<std::size_t>(posterior->draws.cols()));
        for (Eigen::Index k = 0; k < posterior->draws.rows(); ++k) {
            Eigen::VectorXd::Map(x.data(), posterior->draws.cols()) = posterior->draws.row(k);
            const auto u = models::effective_counts_area_effects(spec, density, x);
            for (int i = 0; i < m; ++i) {
                means(k, i) = ad::inv_logit(x[beta] + u[static_cast<std::size_t>(i)]);
            }
        }
        set = from_aggregate(a.model, poststrat::aggregate(means, frame.area_sizes));
        set.state.reset();
    } else {
        throw ConfigError{"unknown model '" + a.model +
                          "' (expected model1, model2, model3, ner, pseudo-eblup, eff-counts)"};
    }

    if (posterior) {
        report_chains(*posterior, err);
        set.warnings.insert(set.warnings.end(), posterior->warnings.begin(), posterior->warnings.end());
        if (!a.draws_out.empty()) {
            io::write_draws_csv(*posterior, a.draws_out);
        }
    } else if (!a.draws_out.empty()) {
        err << "warning: model " << a.model << " has no posterior draws; --draws-out ignored\n";
    }
    emit(a.run.out, io::estimates_json(set) + "\n", out);
    if (!a.csv_out.empty()) {
        io::write_text(a.csv_out, io::estimates_csv(set));
    }
    return kSuccess;
}

} // namespace

int run(const std::vector<std::string> &args, std::istream &in, std::ostream &out,
        std::ostream &err) {
    CLI::App app{"Small area estimation under informative sampling", "sae"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    // generate
    RunFlags gen_flags;
    std::string gen_config;
    auto *gen = app.add_subcommand("generate", "Generate a synthetic population (CSV)");
    gen->add_option("--config", gen_config, "Generator config JSON");
    add_run_flags(gen, gen_flags, false);

    // sample
    RunFlags sample_flags;
    std::string sample_population;
    std::string sample_design{"midzuno"};
    std::size_t sample_n{0};
    std::string cells_out;
    std::string adjacency_out;
    auto *sample = app.add_subcommand("sample", "Draw a sample from a population CSV");
    sample->add_option("--population", sample_population, "Population CSV ('-' or omitted: stdin)");
    sample->add_option("--design", sample_design, "srs, stratified-srs, midzuno, midzuno-classic");
    sample->add_option("-n,--n", sample_n, "Sample size (split evenly over areas for stratified-srs)")->required();
    sample->add_option("--cells-out", cells_out, "Also write the poststratification cells CSV");
    sample->add_option("--adjacency-out", adjacency_out, "Also write a lattice adjacency CSV");
    add_run_flags(sample, sample_flags, false);

    // fit
    FitArgs fit_args;
    auto *fit = app.add_subcommand("fit", "Fit a model to a sample and write area estimates (JSON)");
    fit->add_option("--model", fit_args.model,
                    "model1, model2, model3, ner, pseudo-eblup, eff-counts")
        ->required();
    fit->add_option("--sample", fit_args.sample, "Sample CSV ('-' or omitted: stdin)");
    fit->add_option("--cells", fit_args.cells, "Poststratification cells CSV");
    fit->add_option("--adjacency", fit_args.adjacency, "Area adjacency CSV");
    fit->add_option("--priors", fit_args.priors, "Prior settings JSON");
    fit->add_option("--draws-out", fit_args.draws_out, "Write posterior draws CSV");
    fit->add_option("--csv-out", fit_args.csv_out, "Also write estimates as CSV");
    fit->add_option("--model3-mode", fit_args.model3_mode, "pfeffermann-sverchkov or leon-novelo");
    fit->add_option("--structure", fit_args.structure, "eff-counts area effects: iid, icar, car");
    fit->add_option("--scaling", fit_args.scaling, "model1 weight scaling: total-sample-size, area-sample-size, effective-sample-size, cluster-sum, unscaled");
    add_run_flags(fit, fit_args.run, true);

    // simulate
    RunFlags sim_flags;
    std::string sim_config_path;
    bool no_timing{false};
    std::optional<int> sim_workers;
    std::optional<int> sim_replicates;
    auto *simulate = app.add_subcommand("simulate", "Run the repeated-sampling simulation");
    simulate->add_option("--config", sim_config_path, "Simulation config JSON or manifest")->required();
    simulate->add_flag("--no-timing", no_timing, "Report zero timings so reruns are byte-identical");
    simulate->add_option("--workers", sim_workers, "Replicates fitted concurrently")
        ->check(CLI::PositiveNumber);
    simulate->add_option("--replicates", sim_replicates, "Override the replicate count")
        ->check(CLI::PositiveNumber);
    add_run_flags(simulate, sim_flags, true);
    sim_flags.out = "sim_report";

    // diagnose
    RunFlags diag_flags;
    std::string diag_draws;
    auto *diagnose = app.add_subcommand("diagnose", "R-hat and ESS table from a draws CSV");
    diagnose->add_option("--draws", diag_draws, "Draws CSV ('-' or omitted: stdin)");
    add_run_flags(diagnose, diag_flags, false);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        if (!reversed.empty()) {
            reversed.pop_back();
        }
        app.parse(reversed);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError &e) {
        app.exit(e, err, err);
        err << app.help();
        return kConfigError;
    }

    try {
        if (gen->parsed()) {
            auto config = gen_config.empty() ? GeneratorConfig{}
                                             : io::generator_config_from_json(io::read_text(gen_config));
            if (gen_flags.seed) {
                config.seed = *gen_flags.seed;
            }
            const auto pop = generate_population(config);
            emit(gen_flags.out, io::format_population_csv(pop), out);
            err << "generated " << pop.size() << " units in " << pop.area_count() << " areas\n";
        } else if (sample->parsed()) {
            const auto pop = io::parse_population_csv(read_input(sample_population, in));
            Rng rng = make_stream(sample_flags.seed.value_or(1));
            const auto draw = draw_sample(pop, design_tag_from_string(sample_design), sample_n, rng);
            emit(sample_flags.out, io::format_sample_csv(pop, draw), out);
            if (!cells_out.empty()) {
                const auto cells = index_cells(pop, draw);
                io::write_cells_csv(cells, pop.covariate_names(), cells_out);
            }
            if (!adjacency_out.empty()) {
                io::write_adjacency_csv(spatial::make_lattice_adjacency(pop.area_count()), adjacency_out);
            }
            err << "sampled " << draw.size() << " of " << pop.size() << " units\n";
        } else if (fit->parsed()) {
            return do_fit(fit_args, in, out, err);
        } else if (simulate->parsed()) {
            auto config = io::sim_config_from_json(io::read_text(sim_config_path));
            if (sim_flags.seed) {
                config.base_seed = *sim_flags.seed;
            }
            config.mcmc.chains = sim_flags.chains.value_or(config.mcmc.chains);
            config.mcmc.iterations = sim_flags.iters.value_or(config.mcmc.iterations);
            config.mcmc.warmup = sim_flags.warmup.value_or(config.mcmc.warmup);
            config.workers = sim_workers.value_or(config.workers);
            config.replicates = sim_replicates.value_or(config.replicates);
            if (no_timing) {
                config.record_timing = false;
            }
            config.progress = true;
            const auto report = sim::run(config);
            sim::report_write(report, sim_flags.out);
            for (const auto &w : report.warnings) {
                err << "warning: " << w << '\n';
            }
            out << std::left << std::setw(12) << "estimator" << std::setw(12) << "mse"
                << std::setw(12) << "abs_bias" << std::setw(10) << "coverage" << "seconds\n";
            for (const auto &s : report.summary) {
                out << std::left << std::setw(12) << sim::to_string(s.estimator) << std::setw(12)
                    << std::setprecision(4) << s.mse << std::setw(12) << s.abs_bias << std::setw(10)
                    << (s.coverage ? std::to_string(*s.coverage).substr(0, 5) : "NA")
                    << s.mean_seconds << '\n';
            }
        } else if (diagnose->parsed()) {
            const auto draws = io::parse_draws_csv(read_input(diag_draws, in));
            std::ostringstream os;
            os << "parameter,mean,sd,q025,q975,rhat,ess_bulk,mcse_mean\n";
            for (const auto &s : diagnostics(draws)) {
                os << s.name << ',' << io::format_double(s.mean) << ',' << io::format_double(s.sd)
                   << ',' << io::format_double(s.q025) << ',' << io::format_double(s.q975) << ','
                   << (s.rhat ? io::format_double(*s.rhat) : "NA") << ','
                   << io::format_double(s.ess_bulk) << ',' << io::format_double(s.mcse_mean) << '\n';
            }
            emit(diag_flags.out, os.str(), out);
        }
    } catch (const ConfigError &e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const ParseError &e) {
        err << "input error: " << e.what() << '\n';
        return kConfigError;
    } catch (const DesignError &e) {
        err << "design error: " << e.what() << '\n';
        return kConfigError;
    } catch (const NumericalError &e) {
        err << "numerical failure: " << e.what() << '\n';
        return kNumericalError;
    } catch (const DomainError &e) {
        err << "numerical failure: " << e.what() << '\n';
        return kNumericalError;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kSuccess;
}

} // namespace sae::cli
