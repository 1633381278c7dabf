#include "sae/autodiff.hpp"

#include <algorithm>

namespace sae::ad {

Tape::Tape() {
    edge_begin_.reserve(1 << 14);
    parents_.reserve(1 << 15);
    partials_.reserve(1 << 15);
    edge_begin_.push_back(0);
}

Index Tape::push_node() {
    edge_begin_.push_back(static_cast<Index>(parents_.size()));
    return static_cast<Index>(edge_begin_.size() - 2);
}

Index Tape::leaf() { return push_node(); }

Index Tape::unary(Index a, double da) {
    parents_.push_back(a);
    partials_.push_back(da);
    return push_node();
}

Index Tape::binary(Index a, double da, Index b, double db) {
    parents_.push_back(a);
    partials_.push_back(da);
    parents_.push_back(b);
    partials_.push_back(db);
    return push_node();
}

Index Tape::nary(std::span<const Index> parents, std::span<const double> partials) {
    for (std::size_t k = 0; k < parents.size(); ++k) {
        if (parents[k] != kConstant) {
            parents_.push_back(parents[k]);
            partials_.push_back(partials[k]);
        }
    }
    return push_node();
}

void Tape::clear() {
    edge_begin_.resize(1);
    parents_.clear();
    partials_.clear();
}

void Tape::backward(Index root) {
    adjoint_.assign(size(), 0.0);
    if (root == kConstant) {
        return;
    }
    adjoint_[root] = 1.0;
    for (std::size_t node = static_cast<std::size_t>(root) + 1; node-- > 0;) {
        const double a = adjoint_[node];
        if (a == 0.0) {
            continue;
        }
        for (Index e = edge_begin_[node]; e < edge_begin_[node + 1]; ++e) {
            adjoint_[parents_[e]] += partials_[e] * a;
        }
    }
}

Tape &tape() {
    thread_local Tape t;
    return t;
}

Var sum(std::span<const Var> terms) {
    double total = 0.0;
    bool any_var = false;
    for (const auto &t : terms) {
        total += t.value();
        any_var = any_var || !t.is_constant();
    }
    if (!any_var) {
        return Var{total};
    }
    thread_local std::vector<Index> parents;
    thread_local std::vector<double> partials;
    parents.clear();
    partials.clear();
    for (const auto &t : terms) {
        parents.push_back(t.index());
        partials.push_back(1.0);
    }
    return {total, tape().nary(parents, partials)};
}

Var dot(std::span<const Var> terms, std::span<const double> coefficients) {
    double total = 0.0;
    bool any_var = false;
    for (std::size_t k = 0; k < terms.size(); ++k) {
        total += coefficients[k] * terms[k].value();
        any_var = any_var || (!terms[k].is_constant() && coefficients[k] != 0.0);
    }
    if (!any_var) {
        return Var{total};
    }
    thread_local std::vector<Index> parents;
    parents.clear();
    for (std::size_t k = 0; k < terms.size(); ++k) {
        parents.push_back(coefficients[k] != 0.0 ? terms[k].index() : kConstant);
    }
    return {total, tape().nary(parents, coefficients)};
}

} // namespace sae::ad
