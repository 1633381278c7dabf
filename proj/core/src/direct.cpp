#include "sae/direct.hpp"

#include "sae/error.hpp"

#include <algorithm>
#include <cmath>

namespace sae::direct {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
    if (a != b) {
        throw ConfigError{"input vectors differ in length"};
    }
}

std::size_t area_index(int area, int area_count) {
    if (area < 0 || area >= area_count) {
        throw ConfigError{"area id " + std::to_string(area) + " out of range"};
    }
    return static_cast<std::size_t>(area);
}

} // namespace

AreaValues hajek_mean(std::span<const double> y, std::span<const double> w,
                      std::span<const int> area_ids, int area_count) {
    check_lengths(y.size(), w.size());
    check_lengths(y.size(), area_ids.size());
    std::vector<double> sw(static_cast<std::size_t>(area_count), 0.0);
    std::vector<double> swy(static_cast<std::size_t>(area_count), 0.0);
    for (std::size_t j = 0; j < y.size(); ++j) {
        if (!(w[j] > 0.0)) {
            throw ConfigError{"weights must be positive"};
        }
        const auto i = area_index(area_ids[j], area_count);
        sw[i] += w[j];
        swy[i] += w[j] * y[j];
    }
    AreaValues out(sw.size());
    for (std::size_t i = 0; i < sw.size(); ++i) {
        if (sw[i] > 0.0) {
            out[i] = swy[i] / sw[i];
        }
    }
    return out;
}

AreaValues unweighted_mean(std::span<const double> y, std::span<const int> area_ids,
                           int area_count) {
    check_lengths(y.size(), area_ids.size());
    std::vector<double> sum(static_cast<std::size_t>(area_count), 0.0);
    std::vector<long> n(static_cast<std::size_t>(area_count), 0);
    for (std::size_t j = 0; j < y.size(); ++j) {
        const auto i = area_index(area_ids[j], area_count);
        sum[i] += y[j];
        ++n[i];
    }
    AreaValues out(sum.size());
    for (std::size_t i = 0; i < sum.size(); ++i) {
        if (n[i] > 0) {
            out[i] = sum[i] / static_cast<double>(n[i]);
        }
    }
    return out;
}

AreaValues direct_variance(std::span<const double> y, std::span<const double> w,
                           std::span<const int> area_ids, std::span<const long> area_sizes) {
    const int m = static_cast<int>(area_sizes.size());
    const auto means = hajek_mean(y, w, area_ids, m);
    std::vector<double> sw(area_sizes.size(), 0.0);
    std::vector<long> n(area_sizes.size(), 0);
    for (std::size_t j = 0; j < y.size(); ++j) {
        const auto i = area_index(area_ids[j], m);
        sw[i] += w[j];
        ++n[i];
    }
    std::vector<double> ss(area_sizes.size(), 0.0);
    for (std::size_t j = 0; j < y.size(); ++j) {
        const auto i = static_cast<std::size_t>(area_ids[j]);
        const double wt = w[j] * static_cast<double>(n[i]) / sw[i];
        const double r = y[j] - *means[i];
        ss[i] += wt * wt * r * r;
    }
    AreaValues out(area_sizes.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (n[i] < 2) {
            continue;
        }
        const double nd = static_cast<double>(n[i]);
        const double fpc = std::max(0.0, 1.0 - nd / static_cast<double>(area_sizes[i]));
        out[i] = fpc * ss[i] / (nd * (nd - 1.0));
    }
    return out;
}

AreaValues unweighted_variance(std::span<const double> y, std::span<const int> area_ids,
                               std::span<const long> area_sizes) {
    std::vector<double> ones(y.size(), 1.0);
    return direct_variance(y, ones, area_ids, area_sizes);
}

double kish_effective_size(std::span<const double> w) {
    double s = 0.0;
    double s2 = 0.0;
    for (double v : w) {
        s += v;
        s2 += v * v;
    }
    return s2 > 0.0 ? s * s / s2 : 0.0;
}

std::vector<std::optional<DesignEffect>> design_effect_and_kish(std::span<const double> y,
                                                                std::span<const double> w,
                                                                std::span<const int> area_ids,
                                                                int area_count) {
    const auto p = hajek_mean(y, w, area_ids, area_count);
    std::vector<double> s(static_cast<std::size_t>(area_count), 0.0);
    std::vector<double> s2(static_cast<std::size_t>(area_count), 0.0);
    std::vector<long> n(static_cast<std::size_t>(area_count), 0);
    for (std::size_t j = 0; j < w.size(); ++j) {
        const auto i = static_cast<std::size_t>(area_ids[j]);
        s[i] += w[j];
        s2[i] += w[j] * w[j];
        ++n[i];
    }
    std::vector<std::optional<DesignEffect>> out(static_cast<std::size_t>(area_count));
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (n[i] == 0) {
            continue;
        }
        DesignEffect d;
        d.n = n[i];
        d.n_eff = s[i] * s[i] / s2[i];
        d.deff = static_cast<double>(n[i]) / d.n_eff;
        d.p_hat = *p[i];
        d.y_star = d.n_eff * d.p_hat;
        out[i] = d;
    }
    return out;
}

Interval normal_interval(double estimate, double se) {
    return {std::clamp(estimate - 1.96 * se, 0.0, 1.0), std::clamp(estimate + 1.96 * se, 0.0, 1.0)};
}

} // namespace sae::direct
