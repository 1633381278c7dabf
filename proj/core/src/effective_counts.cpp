#include "sae/bayes_models.hpp"

#include "model_common.hpp"
#include "sae/error.hpp"

#include <cmath>
#include <memory>

namespace sae::models {

std::string_view to_string(AreaStructure s) noexcept {
    switch (s) {
    case AreaStructure::Iid:
        return "iid";
    case AreaStructure::Icar:
        return "icar";
    case AreaStructure::Car:
        return "car";
    }
    return "iid";
}

AreaStructure area_structure_from_string(std::string_view text) {
    if (text == "iid") {
        return AreaStructure::Iid;
    }
    if (text == "icar") {
        return AreaStructure::Icar;
    }
    if (text == "car") {
        return AreaStructure::Car;
    }
    throw ConfigError{"unknown area structure '" + std::string{text} + "' (iid, icar, car)"};
}

void EffectiveCountsSpec::validate() const {
    const auto m = ystar.size();
    if (m == 0 || n_eff.size() != m || static_cast<std::size_t>(X.rows()) != m) {
        throw ConfigError{"effective counts inputs must have one entry per area"};
    }
    for (std::size_t i = 0; i < m; ++i) {
        if (!(n_eff[i] > 0.0) || !(ystar[i] >= 0.0) || ystar[i] > n_eff[i]) {
            throw ConfigError{"area " + std::to_string(i) + " needs 0 <= y* <= n_eff and n_eff > 0"};
        }
    }
    if (structure != AreaStructure::Iid) {
        if (!adjacency || adjacency->size() != static_cast<int>(m)) {
            throw ConfigError{"spatial structure needs an adjacency covering every area"};
        }
    }
}

namespace {

struct EffData {
    std::vector<double> ystar;
    std::vector<double> n_eff;
    Eigen::MatrixXd X;
    AreaStructure structure;
    std::optional<spatial::Adjacency> adjacency;
    std::optional<spatial::IcarBasis> icar;
    std::optional<spatial::CarPrior> car;
    double sigma2_beta;
    double kappa;
};

} // namespace

ModelDensity effective_counts_logdensity(const EffectiveCountsSpec &spec) {
    spec.validate();
    auto data = std::make_shared<EffData>(EffData{spec.ystar, spec.n_eff, spec.X, spec.structure,
                                                  spec.adjacency, std::nullopt, std::nullopt,
                                                  spec.sigma2_beta, spec.kappa});
    const auto m = spec.ystar.size();
    const auto p = static_cast<std::size_t>(spec.X.cols());
    ParamSpace space;
    space.add("beta", p);
    std::vector<std::string> warnings;
    switch (spec.structure) {
    case AreaStructure::Iid:
        space.add("z_u", m).add("sigma_u", 1, Transform::Positive);
        break;
    case AreaStructure::Icar: {
        data->icar.emplace(*spec.adjacency);
        if (data->icar->component_count() > 1) {
            warnings.push_back("adjacency has " + std::to_string(data->icar->component_count()) +
                               " connected components; sum-to-zero applied per component");
        }
        if (data->icar->free_dimension() > 0) {
            space.add("phi", data->icar->free_dimension());
        }
        space.add("sigma_u", 1, Transform::Positive);
        break;
    }
    case AreaStructure::Car:
        data->car.emplace(*spec.adjacency);
        space.add("u", m)
            .add("tau", 1, Transform::Positive)
            .add("alpha", 1, Transform::SymmetricUnit);
        break;
    }
    const std::size_t free_dim =
        data->icar ? data->icar->free_dimension() : m;

    auto fn = [data, m, p, free_dim](std::span<const ad::Var> x) {
        const auto beta = x.subspan(0, p);
        std::vector<ad::Var> terms;
        terms.reserve(m + p + 4);
        std::vector<ad::Var> u;
        switch (data->structure) {
        case AreaStructure::Iid: {
            const auto z = x.subspan(p, m);
            const ad::Var sigma = x[p + m];
            for (const auto &zi : z) {
                u.push_back(sigma * zi);
            }
            terms.push_back(std_normal_lpdf(z));
            terms.push_back(half_cauchy_lpdf(sigma, data->kappa));
            break;
        }
        case AreaStructure::Icar: {
            const auto phi = x.subspan(p, free_dim);
            const ad::Var sigma = x[p + free_dim];
            u = data->icar->expand(phi);
            // Density of the m - C free coordinates: -(m - C) log sigma - Q / (2 sigma^2).
            const ad::Var q = spatial::icar_quadratic_form(u, *data->adjacency);
            terms.push_back(-static_cast<double>(free_dim) * ad::log(sigma) -
                            q / (2.0 * ad::square(sigma)));
            terms.push_back(half_cauchy_lpdf(sigma, data->kappa));
            break;
        }
        case AreaStructure::Car: {
            const auto uu = x.subspan(p, m);
            u.assign(uu.begin(), uu.end());
            const ad::Var tau = x[p + m];
            const ad::Var alpha = x[p + m + 1];
            terms.push_back(data->car->log_density(uu, alpha, tau));
            terms.push_back(half_cauchy_lpdf(tau, data->kappa));
            terms.push_back(ad::Var{std::log(0.5)});
            break;
        }
        }
        const auto eta = detail::linear_predictors(data->X, beta);
        for (std::size_t i = 0; i < m; ++i) {
            terms.push_back(detail::bernoulli_logit(eta[i] + u[i], data->ystar[i],
                                                    data->n_eff[i] - data->ystar[i]));
        }
        for (const auto &b : beta) {
            terms.push_back(normal_lpdf(b, 0.0, data->sigma2_beta));
        }
        return ad::sum(terms);
    };
    ModelDensity density{std::move(space), fn,
                         "effective counts binomial (" + std::string{to_string(spec.structure)} + ")"};
    density.warnings = std::move(warnings);
    return density;
}

std::vector<double> effective_counts_area_effects(const EffectiveCountsSpec &spec,
                                                  const ModelDensity &density,
                                                  std::span<const double> x) {
    const auto &space = density.space();
    const auto m = spec.ystar.size();
    switch (spec.structure) {
    case AreaStructure::Iid: {
        const double sigma = x[space.offset("sigma_u")];
        std::vector<double> u(m);
        for (std::size_t i = 0; i < m; ++i) {
            u[i] = sigma * x[space.offset("z_u") + i];
        }
        return u;
    }
    case AreaStructure::Icar: {
        const spatial::IcarBasis basis(*spec.adjacency);
        if (basis.free_dimension() == 0) {
            return std::vector<double>(m, 0.0);
        }
        return basis.expand(x.subspan(space.offset("phi"), basis.free_dimension()));
    }
    case AreaStructure::Car:
        return {x.begin() + static_cast<std::ptrdiff_t>(space.offset("u")),
                x.begin() + static_cast<std::ptrdiff_t>(space.offset("u") + m)};
    }
    return {};
}

} // namespace sae::models
