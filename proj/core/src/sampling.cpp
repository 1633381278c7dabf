#include "sae/sampling.hpp"

#include "sae/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sae {

namespace {

void check_design_size(std::size_t population_size, std::size_t n) {
    if (population_size == 0) {
        throw DesignError{"empty population"};
    }
    if (n == 0) {
        throw DesignError{"sample size must be positive"};
    }
    if (n > population_size) {
        throw DesignError{"sample size " + std::to_string(n) + " exceeds population size " +
                          std::to_string(population_size)};
    }
}

std::vector<double> floored(std::span<const double> sizes) {
    std::vector<double> out(sizes.begin(), sizes.end());
    for (auto &s : out) {
        if (!std::isfinite(s)) {
            throw DesignError{"non-finite size value"};
        }
        s = std::max(s, kSizeFloor);
    }
    return out;
}

SampleDraw finish_draw(std::vector<std::size_t> positions, const std::vector<double> &pi,
                       DesignTag tag) {
    std::sort(positions.begin(), positions.end());
    SampleDraw draw;
    draw.design_tag = tag;
    draw.positions = std::move(positions);
    for (std::size_t pos : draw.positions) {
        draw.unit_ids.push_back(static_cast<std::int64_t>(pos));
        draw.pi.push_back(pi[pos]);
        draw.weights.push_back(1.0 / pi[pos]);
    }
    return draw;
}

SampleDraw relabel(SampleDraw draw, const Population &pop) {
    for (std::size_t i = 0; i < draw.positions.size(); ++i) {
        draw.unit_ids[i] = pop[draw.positions[i]].unit_id;
    }
    return draw;
}

/// Partial Fisher-Yates: picks k distinct entries of `pool` uniformly.
std::vector<std::size_t> srswor(std::vector<std::size_t> pool, std::size_t k, Rng &rng) {
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick{i, pool.size() - 1};
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(k);
    return pool;
}

} // namespace

std::vector<double> midzuno_first_draw_probs(std::span<const double> sizes) {
    auto p = floored(sizes);
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    for (auto &v : p) {
        v /= total;
    }
    return p;
}

std::vector<double> midzuno_inclusion_probs(std::span<const double> sizes, std::size_t n,
                                            std::vector<std::size_t> *certainty_units) {
    check_design_size(sizes.size(), n);
    const auto big_n = static_cast<double>(sizes.size());
    const auto small_n = static_cast<double>(n);
    auto pi = midzuno_first_draw_probs(sizes);
    if (certainty_units != nullptr) {
        certainty_units->clear();
    }
    if (sizes.size() == 1) {
        pi[0] = 1.0;
        if (certainty_units != nullptr) {
            certainty_units->push_back(0);
        }
        return pi;
    }
    const double slope = (big_n - small_n) / (big_n - 1.0);
    const double floor_prob = (small_n - 1.0) / (big_n - 1.0);
    for (std::size_t i = 0; i < pi.size(); ++i) {
        pi[i] = pi[i] * slope + floor_prob;
        if (pi[i] >= 1.0) {
            pi[i] = 1.0;
            if (certainty_units != nullptr) {
                certainty_units->push_back(i);
            }
        }
    }
    return pi;
}

std::vector<double> pps_inclusion_probs(std::span<const double> sizes, std::size_t n,
                                        std::vector<std::size_t> *certainty_units) {
    check_design_size(sizes.size(), n);
    const auto x = floored(sizes);
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
    double rest = std::accumulate(x.begin(), x.end(), 0.0);
    std::size_t capped = 0;
    // Largest units first: cap while the proportional share would reach one.
    while (capped < n && static_cast<double>(n - capped) * x[order[capped]] >= rest) {
        rest -= x[order[capped]];
        ++capped;
    }
    std::vector<double> pi(x.size());
    const double scale = capped < n ? static_cast<double>(n - capped) / rest : 0.0;
    if (certainty_units != nullptr) {
        certainty_units->clear();
    }
    for (std::size_t r = 0; r < order.size(); ++r) {
        const std::size_t i = order[r];
        if (r < capped) {
            pi[i] = 1.0;
            if (certainty_units != nullptr) {
                certainty_units->push_back(i);
            }
        } else {
            pi[i] = std::min(1.0, x[i] * scale);
        }
    }
    if (certainty_units != nullptr) {
        std::sort(certainty_units->begin(), certainty_units->end());
    }
    return pi;
}

SampleDraw draw_midzuno(std::span<const double> sizes, std::size_t n, Rng &rng) {
    const auto pi = midzuno_inclusion_probs(sizes, n);
    const auto first_probs = midzuno_first_draw_probs(sizes);
    std::discrete_distribution<std::size_t> first_draw(first_probs.begin(), first_probs.end());
    const std::size_t first = first_draw(rng);
    std::vector<std::size_t> pool;
    pool.reserve(sizes.size() - 1);
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (i != first) {
            pool.push_back(i);
        }
    }
    auto chosen = srswor(std::move(pool), n - 1, rng);
    chosen.push_back(first);
    return finish_draw(std::move(chosen), pi, DesignTag::MidzunoPPS);
}

SampleDraw draw_midzuno(const Population &pop, std::size_t n, Rng &rng) {
    return relabel(draw_midzuno(pop.sizes(), n, rng), pop);
}

SampleDraw draw_midzuno_exact(std::span<const double> sizes, std::size_t n, Rng &rng) {
    const auto pi = pps_inclusion_probs(sizes, n);
    constexpr double certain = 1.0 - 1e-12;

    std::vector<std::size_t> selected;
    selected.reserve(n);
    // Complement candidates sorted by q = 1 - pi descending (largest complement share first).
    std::vector<std::size_t> comp;
    for (std::size_t i = 0; i < pi.size(); ++i) {
        if (pi[i] >= certain) {
            selected.push_back(i);
        } else {
            comp.push_back(i);
        }
    }
    const std::size_t to_select = n - selected.size();
    if (to_select == 0) {
        return finish_draw(std::move(selected), pi, DesignTag::MidzunoExactPPS);
    }
    std::stable_sort(comp.begin(), comp.end(),
                     [&](std::size_t a, std::size_t b) { return pi[a] < pi[b]; });
    const std::size_t m = comp.size();
    std::vector<double> q(m);
    for (std::size_t r = 0; r < m; ++r) {
        q[r] = 1.0 - pi[comp[r]];
    }
    std::vector<double> prefix(m + 1, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        prefix[r + 1] = prefix[r] + q[r];
    }

    // Inclusion probabilities of a complement of size s: min(1, c q) with sum s.
    auto complement_probs = [&](std::size_t s, std::vector<double> &out) {
        std::size_t h = 0;
        while (h < m && static_cast<double>(s - h) * q[h] >= prefix[m] - prefix[h]) {
            ++h;
        }
        const double c = h < s ? static_cast<double>(s - h) / (prefix[m] - prefix[h]) : 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            out[r] = r < h ? 1.0 : std::min(1.0, c * q[r]);
        }
    };

    std::vector<char> in_comp(m, 1);
    std::vector<double> before(m, 1.0);
    std::vector<double> after(m);
    std::vector<double> cumulative(m);
    std::uniform_real_distribution<double> unif{0.0, 1.0};
    for (std::size_t step = 1; step <= to_select; ++step) {
        complement_probs(m - step, after);
        double total = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            if (in_comp[r] != 0) {
                total += std::max(0.0, 1.0 - after[r] / before[r]);
            }
            cumulative[r] = total;
        }
        if (!(total > 0.0)) {
            throw NumericalError{"generalised Midzuno elimination probabilities vanished"};
        }
        const double target = unif(rng) * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
        std::size_t r = static_cast<std::size_t>(std::distance(cumulative.begin(), it));
        r = std::min(r, m - 1);
        while (in_comp[r] == 0) {
            --r;
        }
        in_comp[r] = 0;
        selected.push_back(comp[r]);
        std::swap(before, after);
    }
    return finish_draw(std::move(selected), pi, DesignTag::MidzunoExactPPS);
}

SampleDraw draw_midzuno_exact(const Population &pop, std::size_t n, Rng &rng) {
    return relabel(draw_midzuno_exact(pop.sizes(), n, rng), pop);
}

SampleDraw draw_srs(std::size_t population_size, std::size_t n, Rng &rng) {
    check_design_size(population_size, n);
    std::vector<std::size_t> pool(population_size);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    std::vector<double> pi(population_size,
                           static_cast<double>(n) / static_cast<double>(population_size));
    return finish_draw(srswor(std::move(pool), n, rng), pi, DesignTag::SRS);
}

SampleDraw draw_srs(const Population &pop, std::size_t n, Rng &rng) {
    return relabel(draw_srs(pop.size(), n, rng), pop);
}

SampleDraw draw_stratified_srs(const Population &pop, std::size_t n_per_area, Rng &rng) {
    if (n_per_area == 0) {
        throw DesignError{"per-area sample size must be positive"};
    }
    std::vector<std::vector<std::size_t>> by_area(static_cast<std::size_t>(pop.area_count()));
    for (std::size_t i = 0; i < pop.size(); ++i) {
        by_area[static_cast<std::size_t>(pop[i].area_id)].push_back(i);
    }
    std::vector<double> pi(pop.size());
    std::vector<std::size_t> chosen;
    for (auto &members : by_area) {
        const std::size_t k = std::min(n_per_area, members.size());
        const double p = static_cast<double>(k) / static_cast<double>(members.size());
        for (std::size_t i : members) {
            pi[i] = p;
        }
        auto picked = srswor(members, k, rng);
        chosen.insert(chosen.end(), picked.begin(), picked.end());
    }
    return relabel(finish_draw(std::move(chosen), pi, DesignTag::StratifiedSRS), pop);
}

SampleDraw draw_sample(const Population &pop, DesignTag design, std::size_t n, Rng &rng) {
    switch (design) {
    case DesignTag::SRS:
        return draw_srs(pop, n, rng);
    case DesignTag::StratifiedSRS:
        return draw_stratified_srs(
            pop, std::max<std::size_t>(1, n / static_cast<std::size_t>(pop.area_count())), rng);
    case DesignTag::MidzunoPPS:
        return draw_midzuno(pop, n, rng);
    case DesignTag::MidzunoExactPPS:
        return draw_midzuno_exact(pop, n, rng);
    }
    throw ConfigError{"unknown design"};
}

std::string_view to_string(WeightScaling method) noexcept {
    switch (method) {
    case WeightScaling::SumToAreaSampleSize:
        return "area-sample-size";
    case WeightScaling::ClusterSumPreserving:
        return "cluster-sum";
    case WeightScaling::EffectiveSampleSize:
        return "effective-sample-size";
    case WeightScaling::Unscaled:
        return "unscaled";
    case WeightScaling::SumToTotalSampleSize:
        return "total-sample-size";
    }
    return "unknown";
}

WeightScaling weight_scaling_from_string(std::string_view text) {
    for (auto m : {WeightScaling::SumToAreaSampleSize, WeightScaling::ClusterSumPreserving,
                   WeightScaling::EffectiveSampleSize, WeightScaling::Unscaled,
                   WeightScaling::SumToTotalSampleSize}) {
        if (to_string(m) == text) {
            return m;
        }
    }
    throw ConfigError{"unknown weight scaling '" + std::string{text} +
                      "' (expected total-sample-size, area-sample-size, effective-sample-size, "
                      "cluster-sum or unscaled)"};
}

std::vector<double> scale_weights(std::span<const double> weights, std::span<const int> group_ids,
                                  WeightScaling method) {
    if (weights.size() != group_ids.size()) {
        throw ConfigError{"weights and group ids differ in length"};
    }
    if (weights.empty()) {
        throw ConfigError{"no weights to scale"};
    }
    for (double w : weights) {
        if (!(w > 0.0)) {
            throw ConfigError{"weights must be positive"};
        }
    }
    std::vector<double> out(weights.begin(), weights.end());
    switch (method) {
    case WeightScaling::Unscaled:
    case WeightScaling::ClusterSumPreserving:
        // With single-stage unit weights the common constant that preserves every group sum is 1.
        return out;
    case WeightScaling::SumToTotalSampleSize: {
        const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
        const double factor = static_cast<double>(weights.size()) / total;
        for (auto &w : out) {
            w *= factor;
        }
        return out;
    }
    case WeightScaling::SumToAreaSampleSize:
    case WeightScaling::EffectiveSampleSize:
        break;
    }

    const int groups = *std::max_element(group_ids.begin(), group_ids.end()) + 1;
    std::vector<double> sum(static_cast<std::size_t>(groups), 0.0);
    std::vector<double> sum_sq(static_cast<std::size_t>(groups), 0.0);
    std::vector<long> count(static_cast<std::size_t>(groups), 0);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (group_ids[i] < 0) {
            throw ConfigError{"negative group id"};
        }
        const auto g = static_cast<std::size_t>(group_ids[i]);
        sum[g] += weights[i];
        sum_sq[g] += weights[i] * weights[i];
        ++count[g];
    }
    for (std::size_t g = 0; g < count.size(); ++g) {
        if (count[g] == 0) {
            throw ConfigError{"empty group " + std::to_string(g)};
        }
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const auto g = static_cast<std::size_t>(group_ids[i]);
        if (method == WeightScaling::SumToAreaSampleSize) {
            out[i] = weights[i] * static_cast<double>(count[g]) / sum[g];
        } else {
            out[i] = weights[i] * sum[g] / sum_sq[g];
        }
    }
    return out;
}

InformativenessReport informativeness_check(std::span<const double> y,
                                            std::span<const double> weights) {
    if (y.size() != weights.size()) {
        throw ConfigError{"y and weights differ in length"};
    }
    InformativenessReport report;
    const std::size_t n = y.size();
    if (n < 2) {
        report.note = "insufficient sample";
        return report;
    }
    report.sufficient = true;
    double sw = 0.0;
    double swy = 0.0;
    double sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sw += weights[i];
        swy += weights[i] * y[i];
        sy += y[i];
    }
    const double nd = static_cast<double>(n);
    report.weighted_mean = swy / sw;
    report.unweighted_mean = sy / nd;
    report.difference = report.weighted_mean - report.unweighted_mean;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = weights[i] / sw * (y[i] - report.weighted_mean) -
                         (y[i] - report.unweighted_mean) / nd;
        ss += e * e;
    }
    report.se = std::sqrt(nd / (nd - 1.0) * ss);
    if (report.se > 0.0) {
        report.z = report.difference / report.se;
    } else {
        report.z = 0.0;
        report.note = "weighted and unweighted means coincide";
    }
    report.informative = std::abs(report.z) > 2.0;
    return report;
}

std::vector<int> SampleFrame::area_ids() const {
    std::vector<int> out;
    out.reserve(units.size());
    for (const auto &u : units) {
        out.push_back(u.area_id);
    }
    return out;
}

std::vector<double> SampleFrame::y_binary() const {
    std::vector<double> out;
    out.reserve(units.size());
    for (const auto &u : units) {
        out.push_back(u.y_binary);
    }
    return out;
}

std::vector<double> SampleFrame::y_continuous() const {
    std::vector<double> out;
    out.reserve(units.size());
    for (const auto &u : units) {
        out.push_back(u.y_continuous);
    }
    return out;
}

std::vector<long> SampleFrame::area_sample_sizes() const {
    std::vector<long> out(area_sizes.size(), 0);
    for (const auto &u : units) {
        ++out[static_cast<std::size_t>(u.area_id)];
    }
    return out;
}

SampleFrame make_sample_frame(const Population &pop, const SampleDraw &draw) {
    SampleFrame frame;
    frame.covariate_names = pop.covariate_names();
    frame.covariate_levels = pop.covariate_levels();
    frame.area_sizes = pop.area_sizes();
    frame.pi = draw.pi;
    frame.weights = draw.weights;
    frame.units.reserve(draw.size());
    for (std::size_t pos : draw.positions) {
        if (pos >= pop.size()) {
            throw ConfigError{"sample position outside population"};
        }
        frame.units.push_back(pop[pos]);
    }
    return frame;
}

} // namespace sae
