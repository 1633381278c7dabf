#pragma once

#include "sae/autodiff.hpp"
#include "sae/param_space.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace sae {

/// Log posterior density over the unconstrained space of a ParamSpace.
///
/// The wrapped function receives constrained parameters and returns the log density on the
/// constrained scale; the transform Jacobians are added here. The function must only read
/// shared data so that chains on different threads can evaluate the same density.
class ModelDensity {
  public:
    using Function = std::function<ad::Var(std::span<const ad::Var> constrained)>;

    ModelDensity(ParamSpace space, Function function, std::string description);

    [[nodiscard]] std::size_t dimension() const noexcept { return space_.unconstrained_dim(); }
    [[nodiscard]] const ParamSpace &space() const noexcept { return space_; }
    [[nodiscard]] const std::string &description() const noexcept { return description_; }

    /// Log density at an unconstrained point (Jacobian included).
    [[nodiscard]] double log_density(std::span<const double> z) const;
    /// Log density and its gradient; `gradient` must have dimension() entries.
    double log_density_gradient(std::span<const double> z, std::span<double> gradient) const;
    /// Log density without the Jacobian, evaluated at constrained values.
    [[nodiscard]] double log_density_constrained(std::span<const double> x) const;

    [[nodiscard]] std::vector<double> constrain(std::span<const double> z) const {
        return space_.constrain(z);
    }

    /// Messages raised while building the density (e.g. prior calibration caveats).
    std::vector<std::string> warnings;

  private:
    ParamSpace space_;
    Function function_;
    std::string description_;
};

/// Largest relative error |a - f| / max(|a|, |f|, 1) between the reverse-mode gradient and
/// central differences with step h. Throws NumericalError naming the offending parameter
/// block(s) when the density is not finite at the point.
[[nodiscard]] double grad_check(const ModelDensity &model, std::span<const double> point,
                                double h = 1e-5);

} // namespace sae
