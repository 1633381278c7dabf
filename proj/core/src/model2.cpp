#include "sae/bayes_models.hpp"

#include "model_common.hpp"
#include "sae/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>

namespace sae::models {

Eigen::MatrixXd se_kernel(std::span<const double> inputs, double gamma, double rho,
                          double jitter) {
    if (!(gamma > 0.0) || !(rho > 0.0)) {
        throw DomainError{"kernel scales must be positive"};
    }
    const auto n = static_cast<Eigen::Index>(inputs.size());
    Eigen::MatrixXd k(n, n);
    const double g2 = gamma * gamma;
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = 0; b < n; ++b) {
            const double d = inputs[static_cast<std::size_t>(a)] - inputs[static_cast<std::size_t>(b)];
            k(a, b) = g2 * std::exp(-d * d / (2.0 * rho * rho));
        }
        k(a, a) += g2 * jitter;
    }
    return k;
}

Eigen::MatrixXd kernel_cholesky(const Eigen::MatrixXd &K) {
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success) {
        throw NumericalError{"Cholesky factorisation of the GP kernel failed; increase the "
                             "diagonal jitter"};
    }
    return llt.matrixL();
}

std::vector<double> gp_function_values(std::span<const double> inputs, double gamma, double rho,
                                       std::span<const double> eta, double jitter) {
    if (eta.size() != inputs.size()) {
        throw ConfigError{"GP coefficients and inputs differ in length"};
    }
    const Eigen::MatrixXd l = kernel_cholesky(se_kernel(inputs, gamma, rho, jitter));
    const Eigen::Map<const Eigen::VectorXd> e(eta.data(), static_cast<Eigen::Index>(eta.size()));
    const Eigen::VectorXd f = l * e;
    return {f.data(), f.data() + f.size()};
}

Model2Spec Model2Spec::from_frame(const SampleFrame &frame, spatial::Adjacency adjacency) {
    Model2Spec spec;
    spec.y = frame.y_binary();
    spec.area_ids = frame.area_ids();
    spec.area_count = frame.area_count();
    spec.weights = frame.weights;
    spec.adjacency = std::move(adjacency);
    return spec;
}

void Model2Spec::validate() const {
    const auto n = y.size();
    if (n == 0) {
        throw ConfigError{"model 2 needs at least one observation"};
    }
    if (area_ids.size() != n || weights.size() != n) {
        throw ConfigError{"model 2 inputs differ in length"};
    }
    if (area_count < 1 || adjacency.size() != area_count) {
        throw ConfigError{"model 2 adjacency must cover every area"};
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (y[j] != 0.0 && y[j] != 1.0) {
            throw ConfigError{"model 2 response must be binary"};
        }
        if (area_ids[j] < 0 || area_ids[j] >= area_count) {
            throw ConfigError{"model 2 area id out of range"};
        }
        if (!(weights[j] > 0.0)) {
            throw ConfigError{"model 2 weights must be positive"};
        }
    }
    if (!(jitter > 0.0)) {
        throw ConfigError{"model 2 jitter must be positive"};
    }
}

std::vector<double> Model2Spec::unique_weights() const {
    std::vector<double> u(weights);
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    return u;
}

namespace {

struct Model2Data {
    std::vector<double> inputs;
    struct Cell {
        int area;
        int level;
        double positives;
        double negatives;
    };
    std::vector<Cell> cells;
    int m;
    spatial::CarPrior car;
    double sigma2_beta, kappa_gamma, kappa_rho, kappa_tau, kappa_v, jitter;
};

/// Lower Cholesky factor of the correlation part exp(-d^2 / 2 rho^2) + jitter I on the tape.
/// The factor and its derivative in rho are computed in long double off the tape: the kernel
/// is close to singular for large rho and double round-off there swamps finite differences.
/// Returns an empty vector when a pivot is not positive.
std::vector<ad::Var> correlation_cholesky(const std::vector<double> &inputs, const ad::Var &rho,
                                          double jitter) {
    using real = long double;
    const std::size_t n = inputs.size();
    const real r = rho.value();
    std::vector<real> c(n * n);
    std::vector<real> dc(n * n, 0.0L);
    for (std::size_t a = 0; a < n; ++a) {
        c[a * n + a] = 1.0L + static_cast<real>(jitter);
        for (std::size_t b = 0; b < a; ++b) {
            const real d2 = static_cast<real>(inputs[a] - inputs[b]) *
                            static_cast<real>(inputs[a] - inputs[b]);
            c[a * n + b] = std::exp(-d2 / (2.0L * r * r));
            dc[a * n + b] = c[a * n + b] * d2 / (r * r * r);
        }
    }
    std::vector<real> l(n * n, 0.0L);
    std::vector<real> dl(n * n, 0.0L);
    for (std::size_t j = 0; j < n; ++j) {
        real diag = c[j * n + j];
        real ddiag = 0.0L;
        for (std::size_t k = 0; k < j; ++k) {
            diag -= l[j * n + k] * l[j * n + k];
            ddiag -= 2.0L * l[j * n + k] * dl[j * n + k];
        }
        if (!(diag > 0.0L)) {
            return {};
        }
        const real ljj = std::sqrt(diag);
        l[j * n + j] = ljj;
        dl[j * n + j] = ddiag / (2.0L * ljj);
        for (std::size_t i = j + 1; i < n; ++i) {
            real s = c[i * n + j];
            real ds = dc[i * n + j];
            for (std::size_t k = 0; k < j; ++k) {
                s -= l[i * n + k] * l[j * n + k];
                ds -= dl[i * n + k] * l[j * n + k] + l[i * n + k] * dl[j * n + k];
            }
            l[i * n + j] = s / ljj;
            dl[i * n + j] = (ds - l[i * n + j] * dl[j * n + j]) / ljj;
        }
    }
    std::vector<ad::Var> out(n * n, ad::Var{0.0});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            out[i * n + j] = ad::detail::make_unary(static_cast<double>(l[i * n + j]), rho,
                                                    static_cast<double>(dl[i * n + j]));
        }
    }
    return out;
}

} // namespace

ModelDensity model2_logdensity(const Model2Spec &spec) {
    spec.validate();
    const auto inputs = spec.unique_weights();
    auto data = std::make_shared<Model2Data>(Model2Data{
        inputs, {}, spec.area_count, spatial::CarPrior{spec.adjacency}, spec.sigma2_beta,
        spec.kappa_gamma, spec.kappa_rho, spec.kappa_tau, spec.kappa_v, spec.jitter});
    std::map<std::pair<int, int>, std::pair<double, double>> sums;
    for (std::size_t j = 0; j < spec.y.size(); ++j) {
        const auto level = static_cast<int>(
            std::lower_bound(inputs.begin(), inputs.end(), spec.weights[j]) - inputs.begin());
        auto &s = sums[{spec.area_ids[j], level}];
        s.first += spec.y[j];
        s.second += 1.0 - spec.y[j];
    }
    for (const auto &[key, s] : sums) {
        data->cells.push_back({key.first, key.second, s.first, s.second});
    }
    const auto levels = inputs.size();
    const auto m = static_cast<std::size_t>(spec.area_count);

    ParamSpace space;
    space.add("beta0", 1)
        .add("eta", levels)
        .add("gamma", 1, Transform::Positive)
        .add("rho", 1, Transform::Positive)
        .add("u", m)
        .add("tau", 1, Transform::Positive)
        .add("alpha", 1, Transform::SymmetricUnit)
        .add("z_v", m)
        .add("sigma_v", 1, Transform::Positive);

    auto fn = [data, levels, m](std::span<const ad::Var> x) -> ad::Var {
        std::size_t k = 0;
        const ad::Var beta0 = x[k++];
        const auto eta = x.subspan(k, levels);
        k += levels;
        const ad::Var gamma = x[k++];
        const ad::Var rho = x[k++];
        const auto u = x.subspan(k, m);
        k += m;
        const ad::Var tau = x[k++];
        const ad::Var alpha = x[k++];
        const auto zv = x.subspan(k, m);
        k += m;
        const ad::Var sigma_v = x[k++];

        const auto l = correlation_cholesky(data->inputs, rho, data->jitter);
        if (l.empty()) {
            return ad::Var{-std::numeric_limits<double>::infinity()};
        }
        std::vector<ad::Var> f(levels);
        for (std::size_t i = 0; i < levels; ++i) {
            std::vector<ad::Var> prods;
            prods.reserve(i + 1);
            for (std::size_t j = 0; j <= i; ++j) {
                prods.push_back(l[i * levels + j] * eta[j]);
            }
            f[i] = gamma * ad::sum(prods);
        }
        std::vector<ad::Var> area(m);
        for (std::size_t i = 0; i < m; ++i) {
            area[i] = u[i] + sigma_v * zv[i];
        }
        std::vector<ad::Var> terms;
        terms.reserve(data->cells.size() + 10);
        for (const auto &c : data->cells) {
            terms.push_back(detail::bernoulli_logit(beta0 + f[static_cast<std::size_t>(c.level)] +
                                                        area[static_cast<std::size_t>(c.area)],
                                                    c.positives, c.negatives));
        }
        terms.push_back(normal_lpdf(beta0, 0.0, data->sigma2_beta));
        terms.push_back(std_normal_lpdf(eta));
        terms.push_back(half_cauchy_lpdf(gamma, data->kappa_gamma));
        terms.push_back(half_cauchy_lpdf(rho, data->kappa_rho));
        terms.push_back(data->car.log_density(u, alpha, tau));
        terms.push_back(half_cauchy_lpdf(tau, data->kappa_tau));
        // alpha ~ U(-1, 1)
        terms.push_back(ad::Var{std::log(0.5)});
        terms.push_back(std_normal_lpdf(zv));
        terms.push_back(half_cauchy_lpdf(sigma_v, data->kappa_v));
        return ad::sum(terms);
    };

    ModelDensity density{std::move(space), fn,
                         "model2: Bernoulli with GP on weights, CAR and iid area effects"};
    const auto islands = spec.adjacency.islands();
    if (!islands.empty()) {
        density.warnings.emplace_back(std::to_string(islands.size()) +
                                      " island area(s) get D_ii = 1 with no neighbours");
    }
    return density;
}

} // namespace sae::models
