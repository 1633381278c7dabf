#include "sae/param_space.hpp"

#include "sae/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sae {

namespace {

using std::exp;
using std::log;

template <class T>
void constrain_block(const ParamBlock &block, std::span<const T> z, std::span<T> x, T &log_jac) {
    using ad::log1p_exp;
    switch (block.transform) {
    case Transform::Identity:
        std::copy(z.begin(), z.end(), x.begin());
        return;
    case Transform::Positive:
        for (std::size_t k = 0; k < z.size(); ++k) {
            x[k] = exp(z[k]);
            log_jac += z[k];
        }
        return;
    case Transform::SymmetricUnit:
        for (std::size_t k = 0; k < z.size(); ++k) {
            // 2 inv_logit(z) - 1 with derivative 2 p (1 - p).
            x[k] = 2.0 / (1.0 + exp(-z[k])) - 1.0;
            log_jac += std::numbers::ln2 - log1p_exp(-z[k]) - log1p_exp(z[k]);
        }
        return;
    case Transform::Simplex: {
        // phi_k = exp(z_k) / (1 + sum exp(z)), phi_K = 1 / (1 + sum exp(z)).
        double shift = 0.0;
        for (const auto &zk : z) {
            shift = std::max(shift, ad::value_of(zk));
        }
        T denom = exp(T{-shift});
        std::vector<T> e(z.size());
        for (std::size_t k = 0; k < z.size(); ++k) {
            e[k] = exp(z[k] - shift);
            denom += e[k];
        }
        const T log_denom = log(denom);
        T log_last = -shift - log_denom;
        for (std::size_t k = 0; k < z.size(); ++k) {
            x[k] = e[k] / denom;
            log_jac += z[k] - shift - log_denom;
        }
        x[z.size()] = exp(log_last);
        log_jac += log_last;
        return;
    }
    }
}

} // namespace

ParamSpace &ParamSpace::add(std::string name, std::size_t size, Transform transform) {
    if (size == 0) {
        throw ConfigError{"parameter block '" + name + "' has zero size"};
    }
    if (transform == Transform::Simplex && size < 2) {
        throw ConfigError{"simplex block '" + name + "' needs at least two components"};
    }
    if (has(name)) {
        throw ConfigError{"duplicate parameter block '" + name + "'"};
    }
    blocks_.push_back({std::move(name), size, transform});
    offsets_.push_back(constrained_dim_);
    unconstrained_offsets_.push_back(unconstrained_dim_);
    constrained_dim_ += size;
    unconstrained_dim_ += blocks_.back().unconstrained_size();
    return *this;
}

bool ParamSpace::has(std::string_view name) const {
    return std::any_of(blocks_.begin(), blocks_.end(),
                       [&](const ParamBlock &b) { return b.name == name; });
}

std::size_t ParamSpace::index_of(std::string_view name) const {
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        if (blocks_[b].name == name) {
            return b;
        }
    }
    throw ConfigError{"no parameter block named '" + std::string{name} + "'"};
}

const ParamBlock &ParamSpace::block(std::string_view name) const { return blocks_[index_of(name)]; }

std::size_t ParamSpace::offset(std::string_view name) const { return offsets_[index_of(name)]; }

std::size_t ParamSpace::unconstrained_offset(std::string_view name) const {
    return unconstrained_offsets_[index_of(name)];
}

const std::string &ParamSpace::block_of_unconstrained(std::size_t k) const {
    for (std::size_t b = blocks_.size(); b-- > 0;) {
        if (k >= unconstrained_offsets_[b]) {
            return blocks_[b].name;
        }
    }
    return blocks_.front().name;
}

std::vector<std::string> ParamSpace::constrained_names() const {
    std::vector<std::string> names;
    names.reserve(constrained_dim_);
    for (const auto &b : blocks_) {
        if (b.size == 1) {
            names.push_back(b.name);
            continue;
        }
        for (std::size_t k = 0; k < b.size; ++k) {
            names.push_back(b.name + "[" + std::to_string(k) + "]");
        }
    }
    return names;
}

std::vector<double> ParamSpace::constrain(std::span<const double> z) const {
    if (z.size() != unconstrained_dim_) {
        throw ConfigError{"unconstrained vector has the wrong dimension"};
    }
    std::vector<double> x(constrained_dim_);
    double log_jac = 0.0;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        constrain_block<double>(
            blocks_[b], z.subspan(unconstrained_offsets_[b], blocks_[b].unconstrained_size()),
            std::span<double>{x}.subspan(offsets_[b], blocks_[b].size), log_jac);
    }
    return x;
}

double ParamSpace::log_jacobian(std::span<const double> z) const {
    std::vector<double> x(constrained_dim_);
    double log_jac = 0.0;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        constrain_block<double>(
            blocks_[b], z.subspan(unconstrained_offsets_[b], blocks_[b].unconstrained_size()),
            std::span<double>{x}.subspan(offsets_[b], blocks_[b].size), log_jac);
    }
    return log_jac;
}

std::vector<ad::Var> ParamSpace::constrain(std::span<const ad::Var> z, ad::Var &log_jacobian) const {
    if (z.size() != unconstrained_dim_) {
        throw ConfigError{"unconstrained vector has the wrong dimension"};
    }
    std::vector<ad::Var> x(constrained_dim_);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        constrain_block<ad::Var>(
            blocks_[b], z.subspan(unconstrained_offsets_[b], blocks_[b].unconstrained_size()),
            std::span<ad::Var>{x}.subspan(offsets_[b], blocks_[b].size), log_jacobian);
    }
    return x;
}

std::vector<double> ParamSpace::unconstrain(std::span<const double> x) const {
    if (x.size() != constrained_dim_) {
        throw ConfigError{"constrained vector has the wrong dimension"};
    }
    std::vector<double> z(unconstrained_dim_);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const auto &block = blocks_[b];
        const auto xs = x.subspan(offsets_[b], block.size);
        auto zs = std::span<double>{z}.subspan(unconstrained_offsets_[b], block.unconstrained_size());
        switch (block.transform) {
        case Transform::Identity:
            std::copy(xs.begin(), xs.end(), zs.begin());
            break;
        case Transform::Positive:
            for (std::size_t k = 0; k < xs.size(); ++k) {
                if (!(xs[k] > 0.0)) {
                    throw DomainError{"block '" + block.name + "' must be positive"};
                }
                zs[k] = std::log(xs[k]);
            }
            break;
        case Transform::SymmetricUnit:
            for (std::size_t k = 0; k < xs.size(); ++k) {
                if (!(std::abs(xs[k]) < 1.0)) {
                    throw DomainError{"block '" + block.name + "' must lie in (-1, 1)"};
                }
                const double p = 0.5 * (xs[k] + 1.0);
                zs[k] = std::log(p) - std::log1p(-p);
            }
            break;
        case Transform::Simplex: {
            const double last = xs[block.size - 1];
            if (!(last > 0.0)) {
                throw DomainError{"block '" + block.name + "' must be a strictly positive simplex"};
            }
            for (std::size_t k = 0; k + 1 < block.size; ++k) {
                if (!(xs[k] > 0.0)) {
                    throw DomainError{"block '" + block.name + "' must be a strictly positive simplex"};
                }
                zs[k] = std::log(xs[k]) - std::log(last);
            }
            break;
        }
        }
    }
    return z;
}

} // namespace sae
