#include "sae/bayes_models.hpp"
#include "sae/hmc.hpp"
#include "sae/population.hpp"
#include "sae/sampling.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

namespace {

const sae::SampleFrame &frame() {
    static const sae::SampleFrame f = [] {
        sae::GeneratorConfig c;
        c.areas = 20;
        c.area_size = 1000;
        const auto pop = sae::generate_population(c);
        auto rng = sae::make_stream(5);
        return sae::make_sample_frame(pop, sae::draw_midzuno_exact(pop, 1000, rng));
    }();
    return f;
}

void BM_Model1Gradient(benchmark::State &state) {
    const auto density = sae::models::model1_logdensity(sae::models::Model1Spec::from_frame(frame()));
    std::vector<double> z(density.dimension(), 0.1);
    std::vector<double> g(density.dimension());
    for (auto _ : state) {
        benchmark::DoNotOptimize(density.log_density_gradient(z, g));
    }
}
BENCHMARK(BM_Model1Gradient);

void BM_Model2Gradient(benchmark::State &state) {
    const auto &f = frame();
    const auto density = sae::models::model2_logdensity(sae::models::Model2Spec::from_frame(
        f, sae::spatial::make_lattice_adjacency(f.area_count())));
    std::vector<double> z(density.dimension(), 0.1);
    std::vector<double> g(density.dimension());
    for (auto _ : state) {
        benchmark::DoNotOptimize(density.log_density_gradient(z, g));
    }
}
BENCHMARK(BM_Model2Gradient);

void BM_Model1Fit(benchmark::State &state) {
    const auto density = sae::models::model1_logdensity(sae::models::Model1Spec::from_frame(frame()));
    sae::HmcConfig cfg;
    cfg.chains = 1;
    cfg.warmup = 100;
    cfg.iterations = 100;
    cfg.parallel = false;
    for (auto _ : state) {
        benchmark::DoNotOptimize(sae::hmc_sample(density, cfg));
    }
}
BENCHMARK(BM_Model1Fit)->Unit(benchmark::kMillisecond);

void BM_PpsInclusionProbs(benchmark::State &state) {
    std::mt19937_64 rng(1);
    std::lognormal_distribution<double> size(0.0, 1.0);
    std::vector<double> sizes(static_cast<std::size_t>(state.range(0)));
    for (auto &s : sizes) {
        s = size(rng);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(sae::pps_inclusion_probs(sizes, sizes.size() / 20));
    }
}
BENCHMARK(BM_PpsInclusionProbs)->Arg(1000)->Arg(20000);

void BM_DrawMidzunoExact(benchmark::State &state) {
    std::mt19937_64 gen(2);
    std::lognormal_distribution<double> size(0.0, 1.0);
    std::vector<double> sizes(20000);
    for (auto &s : sizes) {
        s = size(gen);
    }
    auto rng = sae::make_stream(3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sae::draw_midzuno_exact(sizes, 1000, rng));
    }
}
BENCHMARK(BM_DrawMidzunoExact)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
