#pragma once

// Helpers shared by the model density builders (not installed).

#include "sae/autodiff.hpp"

#include <Eigen/Dense>

#include <map>
#include <span>
#include <vector>

namespace sae::models::detail {

/// s1 log p + s0 log(1 - p) with p = inv_logit(eta), as a single tape node.
inline ad::Var bernoulli_logit(const ad::Var &eta, double s1, double s0) {
    const double e = eta.value();
    const double p = ad::inv_logit(e);
    const double value = -s1 * ad::log1p_exp(-e) - s0 * ad::log1p_exp(e);
    return ad::detail::make_unary(value, eta, s1 * (1.0 - p) - s0 * p);
}

/// Distinct rows of a matrix and, for every input row, the index of its distinct row.
struct RowIndex {
    Eigen::MatrixXd rows;
    std::vector<int> index;
};

inline RowIndex distinct_rows(const Eigen::MatrixXd &X) {
    std::map<std::vector<double>, int> seen;
    std::vector<std::vector<double>> order;
    RowIndex out;
    out.index.resize(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        std::vector<double> key(X.cols());
        for (Eigen::Index c = 0; c < X.cols(); ++c) {
            key[static_cast<std::size_t>(c)] = X(r, c);
        }
        auto [it, inserted] = seen.emplace(key, static_cast<int>(order.size()));
        if (inserted) {
            order.push_back(key);
        }
        out.index[static_cast<std::size_t>(r)] = it->second;
    }
    out.rows.resize(static_cast<Eigen::Index>(order.size()), X.cols());
    for (std::size_t r = 0; r < order.size(); ++r) {
        for (Eigen::Index c = 0; c < X.cols(); ++c) {
            out.rows(static_cast<Eigen::Index>(r), c) = order[r][static_cast<std::size_t>(c)];
        }
    }
    return out;
}

/// Linear predictors rows * coef, one Var per distinct row.
inline std::vector<ad::Var> linear_predictors(const Eigen::MatrixXd &rows,
                                              std::span<const ad::Var> coef) {
    std::vector<ad::Var> out;
    out.reserve(static_cast<std::size_t>(rows.rows()));
    std::vector<double> row(static_cast<std::size_t>(rows.cols()));
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        for (Eigen::Index c = 0; c < rows.cols(); ++c) {
            row[static_cast<std::size_t>(c)] = rows(r, c);
        }
        out.push_back(ad::dot(coef, row));
    }
    return out;
}

inline bool is_dummy_coded(const Eigen::MatrixXd &X) {
    return (X.array() == 0.0 || X.array() == 1.0).all();
}

} // namespace sae::models::detail
