#include "sae/bayes_models.hpp"

#include "model_common.hpp"
#include "sae/error.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <numeric>

namespace sae::models {

ad::Var normal_lpdf(const ad::Var &x, double mean, double variance) {
    return -0.5 * ad::square(x - mean) / variance - 0.5 * std::log(2.0 * std::numbers::pi * variance);
}

ad::Var std_normal_lpdf(std::span<const ad::Var> x) {
    std::vector<ad::Var> sq;
    sq.reserve(x.size());
    for (const auto &v : x) {
        sq.push_back(ad::square(v));
    }
    return -0.5 * ad::sum(sq) -
           0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi);
}

ad::Var half_cauchy_lpdf(const ad::Var &sigma, double scale) {
    return std::log(2.0 / (std::numbers::pi * scale)) - ad::log1p(ad::square(sigma / scale));
}

Model1Spec Model1Spec::from_frame(const SampleFrame &frame, WeightScaling scaling) {
    Model1Spec spec;
    spec.X = design_matrix(frame.units, frame.covariate_levels);
    spec.y = frame.y_binary();
    spec.area_ids = frame.area_ids();
    spec.area_count = frame.area_count();
    spec.weights = scale_weights(frame.weights, spec.area_ids, scaling);
    return spec;
}

void Model1Spec::validate() const {
    const auto n = y.size();
    if (n == 0) {
        throw ConfigError{"model 1 needs at least one observation"};
    }
    if (static_cast<std::size_t>(X.rows()) != n || area_ids.size() != n || weights.size() != n) {
        throw ConfigError{"model 1 inputs differ in length"};
    }
    if (area_count < 1) {
        throw ConfigError{"model 1 needs at least one area"};
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (y[j] != 0.0 && y[j] != 1.0) {
            throw ConfigError{"model 1 response must be binary"};
        }
        if (area_ids[j] < 0 || area_ids[j] >= area_count) {
            throw ConfigError{"model 1 area id out of range"};
        }
        if (!(weights[j] > 0.0)) {
            throw ConfigError{"model 1 weights must be positive"};
        }
    }
    if (!(sigma2_beta > 0.0) || !(kappa_u > 0.0)) {
        throw ConfigError{"model 1 prior scales must be positive"};
    }
}

namespace {

struct Model1Data {
    Eigen::MatrixXd rows;
    struct Cell {
        int area;
        int row;
        double s1;
        double s0;
    };
    std::vector<Cell> cells;
    int area_count;
    double sigma2_beta;
    double kappa_u;
    std::size_t p;
};

} // namespace

ModelDensity model1_logdensity(const Model1Spec &spec) {
    spec.validate();
    auto data = std::make_shared<Model1Data>();
    const auto distinct = detail::distinct_rows(spec.X);
    data->rows = distinct.rows;
    data->area_count = spec.area_count;
    data->sigma2_beta = spec.sigma2_beta;
    data->kappa_u = spec.kappa_u;
    data->p = static_cast<std::size_t>(spec.X.cols());
    std::map<std::pair<int, int>, std::pair<double, double>> sums;
    for (std::size_t j = 0; j < spec.y.size(); ++j) {
        auto &s = sums[{spec.area_ids[j], distinct.index[j]}];
        s.first += spec.weights[j] * spec.y[j];
        s.second += spec.weights[j] * (1.0 - spec.y[j]);
    }
    for (const auto &[key, s] : sums) {
        data->cells.push_back({key.first, key.second, s.first, s.second});
    }

    ParamSpace space;
    space.add("beta", data->p)
        .add("z_u", static_cast<std::size_t>(spec.area_count))
        .add("sigma_u", 1, Transform::Positive);

    auto fn = [data](std::span<const ad::Var> x) {
        const auto beta = x.subspan(0, data->p);
        const auto z = x.subspan(data->p, static_cast<std::size_t>(data->area_count));
        const ad::Var sigma = x[data->p + static_cast<std::size_t>(data->area_count)];
        const auto eta_rows = detail::linear_predictors(data->rows, beta);
        std::vector<ad::Var> u;
        u.reserve(z.size());
        for (const auto &zi : z) {
            u.push_back(sigma * zi);
        }
        std::vector<ad::Var> terms;
        terms.reserve(data->cells.size() + beta.size() + 2);
        for (const auto &c : data->cells) {
            terms.push_back(detail::bernoulli_logit(
                eta_rows[static_cast<std::size_t>(c.row)] + u[static_cast<std::size_t>(c.area)],
                c.s1, c.s0));
        }
        for (const auto &b : beta) {
            terms.push_back(normal_lpdf(b, 0.0, data->sigma2_beta));
        }
        terms.push_back(std_normal_lpdf(z));
        terms.push_back(half_cauchy_lpdf(sigma, data->kappa_u));
        return ad::sum(terms);
    };

    ModelDensity density{std::move(space), fn, "model1: weighted Bernoulli pseudo-likelihood"};
    if (!detail::is_dummy_coded(spec.X)) {
        density.warnings.emplace_back(
            "design matrix is not 0/1 dummy coded; the N(0, 10) coefficient prior is calibrated "
            "for dummy covariates");
    }
    return density;
}

} // namespace sae::models
