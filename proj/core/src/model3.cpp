#include "sae/bayes_models.hpp"

#include "model_common.hpp"
#include "sae/error.hpp"

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>

namespace sae::models {

Model3Spec Model3Spec::from_frame(const SampleFrame &frame, Model3Mode mode) {
    Model3Spec spec;
    spec.X = design_matrix(frame.units, frame.covariate_levels);
    spec.Xw = spec.X;
    spec.y = frame.y_binary();
    spec.area_ids = frame.area_ids();
    spec.area_count = frame.area_count();
    spec.weights = frame.weights;
    spec.mode = mode;
    return spec;
}

void Model3Spec::validate() const {
    if (family != ResponseFamily::Bernoulli) {
        throw ConfigError{"model 3 supports only the Bernoulli response family"};
    }
    const auto n = y.size();
    if (n == 0) {
        throw ConfigError{"model 3 needs at least one observation"};
    }
    if (static_cast<std::size_t>(X.rows()) != n || static_cast<std::size_t>(Xw.rows()) != n ||
        area_ids.size() != n || weights.size() != n) {
        throw ConfigError{"model 3 inputs differ in length"};
    }
    if (area_count < 1) {
        throw ConfigError{"model 3 needs at least one area"};
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (y[j] != 0.0 && y[j] != 1.0) {
            throw ConfigError{"model 3 response must be binary"};
        }
        if (area_ids[j] < 0 || area_ids[j] >= area_count) {
            throw ConfigError{"model 3 area id out of range"};
        }
        if (!(weights[j] > 0.0) || !std::isfinite(weights[j])) {
            throw ConfigError{"model 3 weights must be positive and finite"};
        }
    }
}

double leon_novelo_log_density(int y, double pi, double p, double t, double kappa, double sigma) {
    if (y != 0 && y != 1) {
        throw DomainError{"response must be 0 or 1"};
    }
    if (!(pi > 0.0) || !(p > 0.0 && p < 1.0) || !(sigma > 0.0)) {
        throw DomainError{"need pi > 0, 0 < p < 1 and sigma > 0"};
    }
    const double mu = y * kappa + t;
    const double z = (std::log(pi) - mu) / sigma;
    const double log_normal = -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
    const double log_mgf = std::log(1.0 - p + p * std::exp(kappa));
    const double log_py = y == 1 ? std::log(p) : std::log1p(-p);
    return log_normal - (t + 0.5 * sigma * sigma) - log_mgf + log_py;
}

namespace {

struct Model3Data {
    Eigen::MatrixXd rows;
    Eigen::MatrixXd wrows;
    struct ResponseCell {
        int area;
        int row;
        double positives;
        double negatives;
    };
    struct WeightCell {
        int row;
        double y;
        double count;
        /// Sums of the log-scale response of the weight model (log w or log pi) and its square.
        double s1;
        double s2;
    };
    std::vector<ResponseCell> response;
    std::vector<WeightCell> weight;
    Model3Mode mode;
    int m;
    std::size_t p;
    std::size_t q;
    double sigma2_coef;
    double kappa;
};

} // namespace

ModelDensity model3_logdensity(const Model3Spec &spec) {
    spec.validate();
    auto data = std::make_shared<Model3Data>();
    const auto rx = detail::distinct_rows(spec.X);
    const auto rw = detail::distinct_rows(spec.Xw);
    data->rows = rx.rows;
    data->wrows = rw.rows;
    data->mode = spec.mode;
    data->m = spec.area_count;
    data->p = static_cast<std::size_t>(spec.X.cols());
    data->q = static_cast<std::size_t>(spec.Xw.cols());
    data->sigma2_coef = spec.sigma2_coef;
    data->kappa = spec.kappa;

    std::map<std::pair<int, int>, std::pair<double, double>> response;
    std::map<std::pair<int, int>, std::array<double, 3>> weight;
    const bool pi_scale = spec.mode == Model3Mode::LeonNovelo;
    for (std::size_t j = 0; j < spec.y.size(); ++j) {
        auto &r = response[{spec.area_ids[j], rx.index[j]}];
        r.first += spec.y[j];
        r.second += 1.0 - spec.y[j];
        const double lw = std::log(spec.weights[j]);
        const double v = pi_scale ? -lw : lw;
        auto &w = weight[{rw.index[j], static_cast<int>(spec.y[j])}];
        w[0] += 1.0;
        w[1] += v;
        w[2] += v * v;
    }
    for (const auto &[key, r] : response) {
        data->response.push_back({key.first, key.second, r.first, r.second});
    }
    for (const auto &[key, w] : weight) {
        data->weight.push_back({key.first, static_cast<double>(key.second), w[0], w[1], w[2]});
    }

    ParamSpace space;
    space.add("beta", data->p)
        .add("z_u", static_cast<std::size_t>(spec.area_count))
        .add("sigma_u", 1, Transform::Positive)
        .add("alpha", data->q);
    if (spec.mode == Model3Mode::PfeffermannSverchkov) {
        space.add("a", 1).add("sigma_eps", 1, Transform::Positive);
    } else {
        space.add("kappa", 1).add("sigma_pi", 1, Transform::Positive);
    }

    auto fn = [data](std::span<const ad::Var> x) {
        const auto m = static_cast<std::size_t>(data->m);
        std::size_t k = 0;
        const auto beta = x.subspan(k, data->p);
        k += data->p;
        const auto z = x.subspan(k, m);
        k += m;
        const ad::Var sigma_u = x[k++];
        const auto alpha = x.subspan(k, data->q);
        k += data->q;
        const ad::Var shift = x[k++];
        const ad::Var sigma = x[k++];

        const auto eta_rows = detail::linear_predictors(data->rows, beta);
        const auto t_rows = detail::linear_predictors(data->wrows, alpha);
        std::vector<ad::Var> terms;
        terms.reserve(data->response.size() + data->weight.size() + data->p + data->q + 6);
        const bool leon = data->mode == Model3Mode::LeonNovelo;
        for (const auto &c : data->response) {
            const ad::Var eta = eta_rows[static_cast<std::size_t>(c.row)] +
                                sigma_u * z[static_cast<std::size_t>(c.area)];
            terms.push_back(detail::bernoulli_logit(eta, c.positives, c.negatives));
            if (leon) {
                // log E[e^{y kappa}] = log(1 - p + p e^kappa) = log1p_exp(eta + kappa) - log1p_exp(eta)
                const double n = c.positives + c.negatives;
                terms.push_back(-n * (ad::log1p_exp(eta + shift) - ad::log1p_exp(eta)));
            }
        }
        const ad::Var log_sigma = ad::log(sigma);
        const ad::Var inv_two_var = 0.5 / ad::square(sigma);
        for (const auto &c : data->weight) {
            const ad::Var t = t_rows[static_cast<std::size_t>(c.row)];
            const ad::Var mu = t + c.y * shift;
            // sum (v - mu)^2 = s2 - 2 mu s1 + count mu^2
            const ad::Var ss = c.s2 - 2.0 * c.s1 * mu + c.count * ad::square(mu);
            terms.push_back(-c.count * (log_sigma + 0.5 * std::log(2.0 * std::numbers::pi)) -
                            ss * inv_two_var);
            if (leon) {
                terms.push_back(-c.count * (t + 0.5 * ad::square(sigma)));
            }
        }
        for (const auto &b : beta) {
            terms.push_back(normal_lpdf(b, 0.0, data->sigma2_coef));
        }
        for (const auto &a : alpha) {
            terms.push_back(normal_lpdf(a, 0.0, data->sigma2_coef));
        }
        terms.push_back(normal_lpdf(shift, 0.0, data->sigma2_coef));
        terms.push_back(std_normal_lpdf(z));
        terms.push_back(half_cauchy_lpdf(sigma_u, data->kappa));
        terms.push_back(half_cauchy_lpdf(sigma, data->kappa));
        return ad::sum(terms);
    };

    const char *description = spec.mode == Model3Mode::PfeffermannSverchkov
                                  ? "model3: Bernoulli response with log-weight regression"
                                  : "model3: joint sample density of response and inclusion "
                                    "probability";
    return {std::move(space), fn, description};
}

} // namespace sae::models
