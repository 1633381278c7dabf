#pragma once

#include "sae/autodiff.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sae {

enum class Transform {
    Identity,
    /// x = exp(z), for scales.
    Positive,
    /// x = 2 inv_logit(z) - 1, maps onto (-1, 1).
    SymmetricUnit,
    /// Additive log-ratio softmax: K constrained values from K - 1 free ones (last is reference).
    Simplex,
};

struct ParamBlock {
    std::string name;
    /// Constrained length.
    std::size_t size{};
    Transform transform{Transform::Identity};

    [[nodiscard]] std::size_t unconstrained_size() const noexcept {
        return transform == Transform::Simplex ? size - 1 : size;
    }
};

/// Named parameter blocks and the bijections between the unconstrained space that HMC moves
/// in and the constrained scale that models and outputs use.
class ParamSpace {
  public:
    ParamSpace &add(std::string name, std::size_t size, Transform transform = Transform::Identity);

    [[nodiscard]] const std::vector<ParamBlock> &blocks() const noexcept { return blocks_; }
    [[nodiscard]] std::size_t unconstrained_dim() const noexcept { return unconstrained_dim_; }
    [[nodiscard]] std::size_t constrained_dim() const noexcept { return constrained_dim_; }
    [[nodiscard]] bool has(std::string_view name) const;
    [[nodiscard]] const ParamBlock &block(std::string_view name) const;
    /// Offset of a block inside the constrained vector.
    [[nodiscard]] std::size_t offset(std::string_view name) const;
    [[nodiscard]] std::size_t unconstrained_offset(std::string_view name) const;
    /// Name of the block that owns unconstrained coordinate k.
    [[nodiscard]] const std::string &block_of_unconstrained(std::size_t k) const;
    /// "beta[0]", "beta[1]", ..., "sigma_u" for scalar blocks.
    [[nodiscard]] std::vector<std::string> constrained_names() const;

    [[nodiscard]] std::vector<double> constrain(std::span<const double> z) const;
    [[nodiscard]] std::vector<double> unconstrain(std::span<const double> x) const;
    [[nodiscard]] double log_jacobian(std::span<const double> z) const;
    /// Constrained Vars; adds the log-Jacobian of every non-identity block to `log_jacobian`.
    [[nodiscard]] std::vector<ad::Var> constrain(std::span<const ad::Var> z,
                                                 ad::Var &log_jacobian) const;

  private:
    std::vector<ParamBlock> blocks_;
    std::vector<std::size_t> offsets_;
    std::vector<std::size_t> unconstrained_offsets_;
    std::size_t unconstrained_dim_{0};
    std::size_t constrained_dim_{0};

    [[nodiscard]] std::size_t index_of(std::string_view name) const;
};

} // namespace sae
