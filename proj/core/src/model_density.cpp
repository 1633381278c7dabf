#include "sae/model_density.hpp"

#include "sae/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace sae {

ModelDensity::ModelDensity(ParamSpace space, Function function, std::string description)
    : space_{std::move(space)}, function_{std::move(function)},
      description_{std::move(description)} {
    if (space_.unconstrained_dim() == 0) {
        throw ConfigError{"model density needs at least one parameter"};
    }
}

double ModelDensity::log_density(std::span<const double> z) const {
    // Constant Vars never touch the tape, so this path is allocation-light and thread-safe.
    std::vector<ad::Var> zv(z.begin(), z.end());
    ad::Var log_jac{0.0};
    const auto x = space_.constrain(zv, log_jac);
    return (function_(x) + log_jac).value();
}

double ModelDensity::log_density_constrained(std::span<const double> x) const {
    std::vector<ad::Var> xv(x.begin(), x.end());
    return function_(xv).value();
}

double ModelDensity::log_density_gradient(std::span<const double> z,
                                          std::span<double> gradient) const {
    if (z.size() != dimension() || gradient.size() != dimension()) {
        throw ConfigError{"gradient evaluation with the wrong dimension"};
    }
    auto &tape = ad::tape();
    tape.clear();
    std::vector<ad::Var> zv;
    zv.reserve(z.size());
    for (double v : z) {
        zv.push_back(ad::Var::variable(v));
    }
    ad::Var log_jac{0.0};
    const auto x = space_.constrain(zv, log_jac);
    const ad::Var lp = function_(x) + log_jac;
    tape.backward(lp.index());
    for (std::size_t k = 0; k < zv.size(); ++k) {
        gradient[k] = lp.is_constant() ? 0.0 : tape.adjoint(zv[k].index());
    }
    tape.clear();
    return lp.value();
}

double grad_check(const ModelDensity &model, std::span<const double> point, double h) {
    const std::size_t d = model.dimension();
    if (point.size() != d) {
        throw ConfigError{"grad_check point has the wrong dimension"};
    }
    if (!std::all_of(point.begin(), point.end(), [](double v) { return std::isfinite(v); })) {
        throw ConfigError{"grad_check point must be finite"};
    }
    std::vector<double> grad(d);
    const double lp = model.log_density_gradient(point, grad);
    const auto &space = model.space();
    if (!std::isfinite(lp)) {
        std::set<std::string> blocks;
        for (std::size_t k = 0; k < d; ++k) {
            if (!std::isfinite(grad[k])) {
                blocks.insert(space.block_of_unconstrained(k));
            }
        }
        const auto x = space.constrain(point);
        const auto names = space.constrained_names();
        for (std::size_t k = 0; k < x.size(); ++k) {
            if (!std::isfinite(x[k])) {
                blocks.insert(names[k].substr(0, names[k].find('[')));
            }
        }
        if (blocks.empty()) {
            for (const auto &b : space.blocks()) {
                blocks.insert(b.name);
            }
        }
        std::string list;
        for (const auto &b : blocks) {
            list += (list.empty() ? "" : ", ") + b;
        }
        throw NumericalError{"non-finite log density; parameter blocks involved: " + list};
    }
    double worst = 0.0;
    std::vector<double> x(point.begin(), point.end());
    for (std::size_t k = 0; k < d; ++k) {
        const double saved = x[k];
        x[k] = saved + h;
        const double up = model.log_density(x);
        x[k] = saved - h;
        const double down = model.log_density(x);
        x[k] = saved;
        const double fd = (up - down) / (2.0 * h);
        const double err = std::abs(grad[k] - fd) / std::max({std::abs(grad[k]), std::abs(fd), 1.0});
        if (!std::isfinite(err)) {
            throw NumericalError{"non-finite gradient in parameter block '" +
                                 space.block_of_unconstrained(k) + "'"};
        }
        worst = std::max(worst, err);
    }
    return worst;
}

} // namespace sae
