#include "sae/diagnostics.hpp"

#include "sae/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sae {

namespace {

void check_shape(const ChainSet &chains) {
    if (chains.empty()) {
        throw ConfigError{"no chains supplied"};
    }
    for (const auto &c : chains) {
        if (c.size() != chains.front().size()) {
            throw ConfigError{"chains must have equal length"};
        }
    }
}

/// Halves every chain (dropping the middle draw of odd lengths).
ChainSet split(const ChainSet &chains) {
    ChainSet out;
    const std::size_t half = chains.front().size() / 2;
    const std::size_t n = chains.front().size();
    for (const auto &c : chains) {
        out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
        out.emplace_back(c.begin() + static_cast<std::ptrdiff_t>(n - half), c.end());
    }
    return out;
}

/// Normal scores of the pooled ranks (average ranks for ties, Blom offset).
ChainSet rank_normalise(const ChainSet &chains) {
    std::vector<double> pooled;
    for (const auto &c : chains) {
        pooled.insert(pooled.end(), c.begin(), c.end());
    }
    const std::size_t total = pooled.size();
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
    std::vector<double> rank(total);
    for (std::size_t i = 0; i < total;) {
        std::size_t j = i;
        while (j + 1 < total && pooled[order[j + 1]] == pooled[order[i]]) {
            ++j;
        }
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            rank[order[k]] = avg;
        }
        i = j + 1;
    }
    const boost::math::normal_distribution<double> normal;
    ChainSet out;
    std::size_t pos = 0;
    for (const auto &c : chains) {
        std::vector<double> z(c.size());
        for (auto &v : z) {
            const double p = (rank[pos++] - 0.375) / (static_cast<double>(total) + 0.25);
            v = boost::math::quantile(normal, p);
        }
        out.push_back(std::move(z));
    }
    return out;
}

double mean_of(const std::vector<double> &v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double var_of(const std::vector<double> &v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) {
        s += (x - m) * (x - m);
    }
    return s / static_cast<double>(v.size() - 1);
}

std::optional<double> rhat_of(const ChainSet &chains) {
    const std::size_t m = chains.size();
    const auto n = static_cast<double>(chains.front().size());
    if (m < 2 || n < 2) {
        return std::nullopt;
    }
    std::vector<double> means(m);
    double w = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
        means[c] = mean_of(chains[c]);
        w += var_of(chains[c]);
    }
    w /= static_cast<double>(m);
    const double b = n * var_of(means);
    if (!(w > 0.0)) {
        return b > 0.0 ? std::optional<double>{std::numeric_limits<double>::infinity()}
                       : std::nullopt;
    }
    const double var_plus = (n - 1.0) / n * w + b / n;
    return std::sqrt(var_plus / w);
}

/// Geyer initial monotone sequence estimator on already split chains.
double ess_of(const ChainSet &chains) {
    const std::size_t m = chains.size();
    const std::size_t n = chains.front().size();
    const double total = static_cast<double>(m * n);
    if (n < 4) {
        return total;
    }
    std::vector<double> means(m);
    std::vector<double> vars(m);
    for (std::size_t c = 0; c < m; ++c) {
        means[c] = mean_of(chains[c]);
        vars[c] = var_of(chains[c]);
    }
    const double w = mean_of(vars);
    const double nd = static_cast<double>(n);
    double var_plus = (nd - 1.0) / nd * w;
    if (m > 1) {
        var_plus += var_of(means);
    }
    if (!(var_plus > 0.0)) {
        return total;
    }
    // Biased (divide by n) autocovariance, averaged over chains.
    auto acov = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            const auto &x = chains[c];
            double a = 0.0;
            for (std::size_t t = 0; t + lag < n; ++t) {
                a += (x[t] - means[c]) * (x[t + lag] - means[c]);
            }
            s += a / nd;
        }
        return s / static_cast<double>(m);
    };
    auto rho = [&](std::size_t lag) {
        return lag == 0 ? 1.0 : 1.0 - (w - acov(lag)) / var_plus;
    };
    double tau = -1.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
        double pair = rho(2 * k) + rho(2 * k + 1);
        if (!(pair > 0.0)) {
            break;
        }
        pair = std::min(pair, prev_pair);
        prev_pair = pair;
        tau += 2.0 * pair;
    }
    tau = std::max(tau, 1.0 / std::log10(total));
    return total / tau;
}

} // namespace

std::optional<double> split_rhat_basic(const ChainSet &chains) {
    check_shape(chains);
    if (chains.size() < 2 || chains.front().size() < 4) {
        return std::nullopt;
    }
    return rhat_of(split(chains));
}

std::optional<double> split_rhat(const ChainSet &chains) {
    check_shape(chains);
    if (chains.size() < 2 || chains.front().size() < 4) {
        return std::nullopt;
    }
    const auto halves = split(chains);
    const auto bulk = rhat_of(rank_normalise(halves));

    std::vector<double> pooled;
    for (const auto &c : halves) {
        pooled.insert(pooled.end(), c.begin(), c.end());
    }
    const double median = quantile(pooled, 0.5);
    ChainSet folded = halves;
    for (auto &c : folded) {
        for (auto &v : c) {
            v = std::abs(v - median);
        }
    }
    const auto tail = rhat_of(rank_normalise(folded));
    if (!bulk && !tail) {
        return std::nullopt;
    }
    return std::max(bulk.value_or(0.0), tail.value_or(0.0));
}

double ess_bulk(const ChainSet &chains) {
    check_shape(chains);
    if (chains.front().size() < 4) {
        return static_cast<double>(chains.size() * chains.front().size());
    }
    return ess_of(rank_normalise(split(chains)));
}

double ess_basic(const ChainSet &chains) {
    check_shape(chains);
    if (chains.front().size() < 4) {
        return static_cast<double>(chains.size() * chains.front().size());
    }
    return ess_of(split(chains));
}

double quantile(std::vector<double> values, double prob) {
    if (values.empty()) {
        throw ConfigError{"quantile of an empty sample"};
    }
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ParamSummary summarise(const std::string &name, const ChainSet &chains) {
    check_shape(chains);
    ParamSummary s;
    s.name = name;
    std::vector<double> pooled;
    for (const auto &c : chains) {
        pooled.insert(pooled.end(), c.begin(), c.end());
    }
    s.mean = mean_of(pooled);
    s.sd = pooled.size() > 1 ? std::sqrt(var_of(pooled)) : 0.0;
    s.q025 = quantile(pooled, 0.025);
    s.q975 = quantile(pooled, 0.975);
    s.rhat = split_rhat(chains);
    s.ess_bulk = ess_bulk(chains);
    const double ess_mean = ess_basic(chains);
    s.mcse_mean = s.sd / std::sqrt(ess_mean);
    // Delta method on the variance: Var(s) ~ Var((x - mu)^2) / (4 s^2 ESS).
    ChainSet sq = chains;
    for (auto &c : sq) {
        for (auto &v : c) {
            v = (v - s.mean) * (v - s.mean);
        }
    }
    std::vector<double> sq_pooled;
    for (const auto &c : sq) {
        sq_pooled.insert(sq_pooled.end(), c.begin(), c.end());
    }
    if (s.sd > 0.0 && sq_pooled.size() > 1) {
        const double ess_sq = ess_basic(sq);
        s.mcse_sd = std::sqrt(var_of(sq_pooled) / ess_sq) / (2.0 * s.sd);
    }
    return s;
}

std::vector<ParamSummary> diagnostics(const PosteriorDraws &draws) {
    std::vector<ParamSummary> out;
    out.reserve(draws.names.size());
    for (std::size_t k = 0; k < draws.names.size(); ++k) {
        ChainSet chains;
        for (int c = 0; c < draws.chains; ++c) {
            chains.push_back(draws.chain_values(k, c));
        }
        out.push_back(summarise(draws.names[k], chains));
    }
    return out;
}

} // namespace sae
