#pragma once

#include "sae/bayes_models.hpp"
#include "sae/population.hpp"
#include "sae/sample_draw.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sae::sim {

enum class Estimator {
    HT,
    UW,
    Model1,
    Model2,
    Model3,
    NerEblup,
    PseudoEblup,
    /// Plugs in the truth; used to check the metric plumbing.
    Oracle,
};

[[nodiscard]] std::string_view to_string(Estimator e) noexcept;
[[nodiscard]] Estimator estimator_from_string(std::string_view text);

struct McmcBudget {
    int chains{2};
    int warmup{400};
    int iterations{250};
    double target_accept{0.8};
};

struct SimConfig {
    GeneratorConfig generator;
    /// When set, the population is read from this CSV instead of generated.
    std::optional<std::string> population_csv;
    std::size_t n_sample{1000};
    int replicates{50};
    std::vector<Estimator> estimators{Estimator::HT,     Estimator::UW,     Estimator::Model1,
                                      Estimator::Model2, Estimator::Model3};
    McmcBudget mcmc;
    /// Replicate r uses seed base_seed + r.
    std::uint64_t base_seed{1};
    DesignTag design{DesignTag::MidzunoExactPPS};
    models::Model3Mode model3_mode{models::Model3Mode::PfeffermannSverchkov};
    /// Wall-clock seconds are reported as zero when off, so reruns are byte-identical.
    bool record_timing{true};
    /// Replicates fitted concurrently.
    int workers{1};
    /// Print one progress line per finished replicate to stderr.
    bool progress{false};

    void validate() const;
};

/// Point, spread and 95% interval of one estimator for one area in one replicate.
struct RawEstimate {
    Estimator estimator{};
    int replicate{};
    int area{};
    double truth{};
    double estimate{};
    std::optional<double> se;
    std::optional<double> lo95;
    std::optional<double> hi95;
};

struct EstimatorMetrics {
    Estimator estimator{};
    double mse{};
    double abs_bias{};
    /// Missing when the estimator produced no intervals.
    std::optional<double> coverage;
    double mean_seconds{};
    int replicates_used{};
    int failures{};
};

struct AreaRmse {
    int area{};
    double rmse_direct{};
    double rmse_model{};
    /// rmse_direct - rmse_model
    double reduction{};
};

struct SimReport {
    SimConfig config;
    std::vector<std::uint64_t> seeds;
    std::vector<double> truth;
    std::vector<EstimatorMetrics> summary;
    /// Per estimator other than HT, RMSE per area against the HT direct estimator.
    std::map<Estimator, std::vector<AreaRmse>> per_area;
    std::vector<RawEstimate> raw;
    std::vector<std::string> warnings;

    [[nodiscard]] const EstimatorMetrics &metrics(Estimator e) const;
};

[[nodiscard]] SimReport run(const SimConfig &config);
/// Same protocol on a given population (config.generator and population_csv are ignored).
[[nodiscard]] SimReport run(const SimConfig &config, const Population &pop);

/// Metrics from raw estimates: MSE over (area, replicate); abs bias as the per-area |mean
/// error| averaged over areas; coverage as the share of intervals that contain the truth.
[[nodiscard]] EstimatorMetrics compute_metrics(Estimator e, std::span<const RawEstimate> raw,
                                               int area_count);

/// Writes summary.csv, per_area.csv, raw_estimates.csv and manifest.json into `dir`.
void report_write(const SimReport &report, const std::filesystem::path &dir);

} // namespace sae::sim
