#include "sae/sample_distribution.hpp"

#include "sae/error.hpp"

#include <cmath>

namespace sae::models {

std::optional<double> sample_to_population_bernoulli(double p_s, double e_w_given_y1,
                                                     double e_w_given_y0) {
    if (!(p_s >= 0.0 && p_s <= 1.0)) {
        throw DomainError{"sample probability must lie in [0, 1]"};
    }
    if (!(e_w_given_y1 >= 1.0) || !(e_w_given_y0 >= 1.0)) {
        throw DomainError{"expected weights must be at least one"};
    }
    const double a = (e_w_given_y1 - 1.0) * p_s;
    const double b = (e_w_given_y0 - 1.0) * (1.0 - p_s);
    if (a + b == 0.0) {
        if (p_s == 0.0 || p_s == 1.0) {
            return p_s;
        }
        return std::nullopt;
    }
    return a / (a + b);
}

double lognormal_weight_mean(double t, double a, int y, double sigma) {
    return std::exp(t + a * y + 0.5 * sigma * sigma);
}

double sampled_frequency(double p, double pi1, double pi0) {
    const double num = pi1 * p;
    const double den = num + pi0 * (1.0 - p);
    if (!(den > 0.0)) {
        throw DomainError{"no sampling mass"};
    }
    return num / den;
}

double nonsampled_frequency(double p, double pi1, double pi0) {
    const double num = (1.0 - pi1) * p;
    const double den = num + (1.0 - pi0) * (1.0 - p);
    if (!(den > 0.0)) {
        throw DomainError{"no nonsampled mass"};
    }
    return num / den;
}

} // namespace sae::models
