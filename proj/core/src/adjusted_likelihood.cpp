#include "sae/adjusted_likelihood.hpp"

#include "sae/error.hpp"

#include <cmath>
#include <numeric>
#include <random>

namespace sae::classical {

double malec_adjusted_loglik(std::span<const MalecCell> cells) {
    double total = 0.0;
    for (const auto &c : cells) {
        if (!(c.p > 0.0 && c.p < 1.0)) {
            throw DomainError{"cell probability must lie in (0, 1)"};
        }
        if (!(c.wbar1 > 0.0 && c.wbar0 > 0.0)) {
            throw DomainError{"mean weights must be positive"};
        }
        total += c.positives * std::log(c.p) + (c.n - c.positives) * std::log1p(-c.p) -
                 c.n * std::log(c.p / c.wbar1 + (1.0 - c.p) / c.wbar0);
    }
    return total;
}

GroupWeightMeans group_weight_means(std::span<const double> y, std::span<const double> w,
                                    std::span<const int> group_ids, int group_count) {
    if (y.size() != w.size() || y.size() != group_ids.size()) {
        throw ConfigError{"y, weights and group ids differ in length"};
    }
    const auto g = static_cast<std::size_t>(group_count);
    std::vector<double> sw1(g, 0.0);
    std::vector<double> sw0(g, 0.0);
    std::vector<double> n1(g, 0.0);
    std::vector<double> n0(g, 0.0);
    for (std::size_t j = 0; j < y.size(); ++j) {
        const int k = group_ids[j];
        if (k < 0 || k >= group_count) {
            throw ConfigError{"group id out of range"};
        }
        const auto uk = static_cast<std::size_t>(k);
        sw1[uk] += w[j] * y[j];
        n1[uk] += y[j];
        sw0[uk] += w[j] * (1.0 - y[j]);
        n0[uk] += 1.0 - y[j];
    }
    GroupWeightMeans out{std::vector<double>(g, 0.0), std::vector<double>(g, 0.0)};
    for (std::size_t k = 0; k < g; ++k) {
        if (n1[k] > 0.0) {
            out.wbar1[k] = sw1[k] / n1[k];
        }
        if (n0[k] > 0.0) {
            out.wbar0[k] = sw0[k] / n0[k];
        }
    }
    return out;
}

std::vector<double> bayes_pseudo_empirical(std::span<const double> y, std::span<const double> w,
                                           double alpha_prior, int draws, Rng &rng) {
    if (y.size() != w.size() || y.empty()) {
        throw ConfigError{"y and weights must be non-empty and of equal length"};
    }
    if (draws < 1) {
        throw ConfigError{"draws must be positive"};
    }
    const double sum_w = std::accumulate(w.begin(), w.end(), 0.0);
    const double n = static_cast<double>(w.size());
    std::vector<std::gamma_distribution<double>> gammas;
    gammas.reserve(w.size());
    for (double wj : w) {
        const double shape = wj * n / sum_w + alpha_prior;
        if (!(shape > 0.0)) {
            throw ConfigError{"Dirichlet parameters must be positive"};
        }
        gammas.emplace_back(shape, 1.0);
    }
    std::vector<double> out(static_cast<std::size_t>(draws));
    for (auto &theta : out) {
        double total = 0.0;
        double weighted = 0.0;
        for (std::size_t j = 0; j < y.size(); ++j) {
            const double g = gammas[j](rng);
            total += g;
            weighted += g * y[j];
        }
        theta = weighted / total;
    }
    return out;
}

} // namespace sae::classical
