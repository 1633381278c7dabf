#include "sae/spatial.hpp"

#include "sae/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace sae::spatial {

Adjacency::Adjacency(int area_count, std::span<const std::pair<int, int>> edges) {
    if (area_count < 1) {
        throw ConfigError{"adjacency needs at least one area"};
    }
    std::set<std::pair<int, int>> unique;
    for (auto [a, b] : edges) {
        if (a < 0 || b < 0 || a >= area_count || b >= area_count) {
            throw ConfigError{"adjacency edge (" + std::to_string(a) + ", " + std::to_string(b) +
                              ") refers to an unknown area"};
        }
        if (a == b) {
            throw ConfigError{"adjacency edge on area " + std::to_string(a) + " is a self loop"};
        }
        unique.insert({std::min(a, b), std::max(a, b)});
    }
    neighbors_.resize(static_cast<std::size_t>(area_count));
    for (auto [a, b] : unique) {
        edges_.emplace_back(a, b);
        neighbors_[static_cast<std::size_t>(a)].push_back(b);
        neighbors_[static_cast<std::size_t>(b)].push_back(a);
    }
    for (auto &n : neighbors_) {
        std::sort(n.begin(), n.end());
    }
}

Eigen::MatrixXd Adjacency::matrix() const {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(size(), size());
    for (auto [a, b] : edges_) {
        w(a, b) = 1.0;
        w(b, a) = 1.0;
    }
    return w;
}

Eigen::VectorXd Adjacency::car_diagonal() const {
    Eigen::VectorXd d(size());
    for (int i = 0; i < size(); ++i) {
        d(i) = std::max(1, degree(i));
    }
    return d;
}

std::vector<int> Adjacency::islands() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i) {
        if (degree(i) == 0) {
            out.push_back(i);
        }
    }
    return out;
}

Adjacency make_lattice_adjacency(int area_count, int columns) {
    if (area_count < 1) {
        throw ConfigError{"lattice needs at least one area"};
    }
    if (columns <= 0) {
        columns = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(area_count))));
        // Prefer an exact rectangle when one is close to square.
        for (int c = columns; c >= 1; --c) {
            if (area_count % c == 0) {
                columns = std::max(c, area_count / c);
                break;
            }
        }
    }
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < area_count; ++i) {
        const int col = i % columns;
        if (col + 1 < columns && i + 1 < area_count) {
            edges.emplace_back(i, i + 1);
        }
        if (i + columns < area_count) {
            edges.emplace_back(i, i + columns);
        }
    }
    return {area_count, edges};
}

std::vector<std::vector<int>> connected_components(const Adjacency &adj) {
    std::vector<int> label(static_cast<std::size_t>(adj.size()), -1);
    std::vector<std::vector<int>> out;
    for (int start = 0; start < adj.size(); ++start) {
        if (label[static_cast<std::size_t>(start)] >= 0) {
            continue;
        }
        const int id = static_cast<int>(out.size());
        std::vector<int> members;
        std::vector<int> stack{start};
        label[static_cast<std::size_t>(start)] = id;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            members.push_back(v);
            for (int nb : adj.neighbors(v)) {
                if (label[static_cast<std::size_t>(nb)] < 0) {
                    label[static_cast<std::size_t>(nb)] = id;
                    stack.push_back(nb);
                }
            }
        }
        std::sort(members.begin(), members.end());
        out.push_back(std::move(members));
    }
    return out;
}

Eigen::VectorXd car_eigenvalues(const Adjacency &adj) {
    const Eigen::VectorXd d = adj.car_diagonal();
    const Eigen::VectorXd inv_sqrt = d.array().rsqrt();
    const Eigen::MatrixXd s = inv_sqrt.asDiagonal() * adj.matrix() * inv_sqrt.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s, Eigen::EigenvaluesOnly);
    return solver.eigenvalues();
}

Eigen::MatrixXd car_precision(const Adjacency &adj, double alpha, double tau) {
    if (!(std::abs(alpha) < 1.0) || !(tau > 0.0)) {
        throw DomainError{"CAR requires |alpha| < 1 and tau > 0"};
    }
    Eigen::MatrixXd q = -alpha * adj.matrix();
    q.diagonal() += adj.car_diagonal();
    return q / tau;
}

CarPrior::CarPrior(const Adjacency &adj) : edges_{adj.edges()} {
    const Eigen::VectorXd d = adj.car_diagonal();
    diag_.assign(d.data(), d.data() + d.size());
    for (double v : diag_) {
        log_det_d_ += std::log(v);
    }
    const Eigen::VectorXd ev = car_eigenvalues(adj);
    eigenvalues_.assign(ev.data(), ev.data() + ev.size());
}

template <class T>
T CarPrior::evaluate(std::span<const T> u, const T &alpha, const T &tau) const {
    using std::log;
    using std::log1p;
    if (u.size() != diag_.size()) {
        throw ConfigError{"CAR vector has the wrong length"};
    }
    // log det(D - alpha W) = log det D + sum_k log(1 - alpha lambda_k)
    T log_det{log_det_d_};
    for (double lambda : eigenvalues_) {
        log_det += log1p(-alpha * lambda);
    }
    T diag_part{0.0};
    for (std::size_t i = 0; i < u.size(); ++i) {
        diag_part += diag_[i] * u[i] * u[i];
    }
    T cross{0.0};
    for (auto [a, b] : edges_) {
        cross += u[static_cast<std::size_t>(a)] * u[static_cast<std::size_t>(b)];
    }
    const T quad = diag_part - 2.0 * alpha * cross;
    const double m = static_cast<double>(u.size());
    return -0.5 * m * std::log(2.0 * std::numbers::pi) + 0.5 * log_det - 0.5 * m * log(tau) -
           quad / (2.0 * tau);
}

double CarPrior::log_density(std::span<const double> u, double alpha, double tau) const {
    if (!(std::abs(alpha) < 1.0) || !(tau > 0.0)) {
        throw DomainError{"CAR requires |alpha| < 1 and tau > 0"};
    }
    return evaluate<double>(u, alpha, tau);
}

ad::Var CarPrior::log_density(std::span<const ad::Var> u, const ad::Var &alpha,
                              const ad::Var &tau) const {
    return evaluate<ad::Var>(u, alpha, tau);
}

double icar_quadratic_form(std::span<const double> u, const Adjacency &adj) {
    double q = 0.0;
    for (auto [a, b] : adj.edges()) {
        const double d = u[static_cast<std::size_t>(a)] - u[static_cast<std::size_t>(b)];
        q += d * d;
    }
    return q;
}

ad::Var icar_quadratic_form(std::span<const ad::Var> u, const Adjacency &adj) {
    std::vector<ad::Var> terms;
    terms.reserve(adj.edges().size());
    for (auto [a, b] : adj.edges()) {
        terms.push_back(ad::square(u[static_cast<std::size_t>(a)] - u[static_cast<std::size_t>(b)]));
    }
    return ad::sum(terms);
}

std::pair<double, double> icar_conditional(std::span<const double> u, const Adjacency &adj, int i,
                                           double sigma2) {
    if (i < 0 || i >= adj.size()) {
        throw ConfigError{"area index out of range"};
    }
    const auto &nb = adj.neighbors(i);
    if (nb.empty()) {
        throw ConfigError{"area " + std::to_string(i) + " has no neighbours"};
    }
    double s = 0.0;
    for (int j : nb) {
        s += u[static_cast<std::size_t>(j)];
    }
    const double n = static_cast<double>(nb.size());
    return {s / n, sigma2 / n};
}

IcarBasis::IcarBasis(const Adjacency &adj)
    : m_{adj.size()}, components_{connected_components(adj)} {
    for (const auto &c : components_) {
        free_dim_ += c.size() - 1;
    }
}

template <class T>
std::vector<T> IcarBasis::expand_impl(std::span<const T> free) const {
    if (free.size() != free_dim_) {
        throw ConfigError{"ICAR free vector has the wrong length"};
    }
    std::vector<T> u(static_cast<std::size_t>(m_), T{0.0});
    std::size_t k = 0;
    for (const auto &c : components_) {
        if (c.size() < 2) {
            continue;
        }
        T total{0.0};
        for (std::size_t j = 0; j + 1 < c.size(); ++j) {
            u[static_cast<std::size_t>(c[j])] = free[k];
            total += free[k];
            ++k;
        }
        u[static_cast<std::size_t>(c.back())] = -total;
    }
    return u;
}

std::vector<ad::Var> IcarBasis::expand(std::span<const ad::Var> free) const {
    return expand_impl<ad::Var>(free);
}

std::vector<double> IcarBasis::expand(std::span<const double> free) const {
    return expand_impl<double>(free);
}

} // namespace sae::spatial
