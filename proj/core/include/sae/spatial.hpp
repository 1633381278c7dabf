#pragma once

#include "sae/autodiff.hpp"

#include <Eigen/Dense>

#include <span>
#include <utility>
#include <vector>

namespace sae::spatial {

/// Undirected area adjacency graph on areas 0..m-1.
class Adjacency {
  public:
    Adjacency() = default;
    /// Builds from an edge list; duplicate and reversed edges are merged. Self loops are
    /// rejected.
    Adjacency(int area_count, std::span<const std::pair<int, int>> edges);

    [[nodiscard]] int size() const noexcept { return static_cast<int>(neighbors_.size()); }
    [[nodiscard]] const std::vector<int> &neighbors(int i) const {
        return neighbors_[static_cast<std::size_t>(i)];
    }
    [[nodiscard]] int degree(int i) const { return static_cast<int>(neighbors(i).size()); }
    /// Edges (i, j) with i < j.
    [[nodiscard]] const std::vector<std::pair<int, int>> &edges() const noexcept { return edges_; }
    /// Symmetric 0/1 matrix W with zero diagonal.
    [[nodiscard]] Eigen::MatrixXd matrix() const;
    /// CAR diagonal D: neighbour counts, with islands set to 1.
    [[nodiscard]] Eigen::VectorXd car_diagonal() const;
    [[nodiscard]] std::vector<int> islands() const;

  private:
    std::vector<std::vector<int>> neighbors_;
    std::vector<std::pair<int, int>> edges_;
};

/// Rook-contiguity lattice with `columns` columns (near-square when 0); areas are numbered
/// row by row.
[[nodiscard]] Adjacency make_lattice_adjacency(int area_count, int columns = 0);

/// Connected components, each sorted ascending; components ordered by smallest member.
[[nodiscard]] std::vector<std::vector<int>> connected_components(const Adjacency &adj);

/// Eigenvalues of D^{-1/2} W D^{-1/2}; (D - alpha W) is positive definite for |alpha| < 1.
[[nodiscard]] Eigen::VectorXd car_eigenvalues(const Adjacency &adj);

/// Proper CAR precision (D - alpha W) / tau.
[[nodiscard]] Eigen::MatrixXd car_precision(const Adjacency &adj, double alpha, double tau);

/// Precomputed pieces of the proper CAR log density u ~ N(0, tau (D - alpha W)^{-1}).
class CarPrior {
  public:
    explicit CarPrior(const Adjacency &adj);

    [[nodiscard]] double log_density(std::span<const double> u, double alpha, double tau) const;
    [[nodiscard]] ad::Var log_density(std::span<const ad::Var> u, const ad::Var &alpha,
                                      const ad::Var &tau) const;
    [[nodiscard]] int size() const noexcept { return static_cast<int>(diag_.size()); }

  private:
    std::vector<double> diag_;
    std::vector<std::pair<int, int>> edges_;
    std::vector<double> eigenvalues_;
    double log_det_d_{0.0};

    template <class T>
    T evaluate(std::span<const T> u, const T &alpha, const T &tau) const;
};

/// Sum over edges of (u_i - u_j)^2.
[[nodiscard]] double icar_quadratic_form(std::span<const double> u, const Adjacency &adj);
[[nodiscard]] ad::Var icar_quadratic_form(std::span<const ad::Var> u, const Adjacency &adj);

/// Conditional mean and variance of u_i given the others under ICAR with scale sigma2:
/// neighbour average and sigma2 / n_i. Islands have no conditional (throws ConfigError).
[[nodiscard]] std::pair<double, double> icar_conditional(std::span<const double> u,
                                                         const Adjacency &adj, int i,
                                                         double sigma2);

/// Maps m - C free coordinates to u with a sum-to-zero constraint inside each connected
/// component; singleton components (islands) are fixed at zero.
class IcarBasis {
  public:
    explicit IcarBasis(const Adjacency &adj);

    [[nodiscard]] std::size_t free_dimension() const noexcept { return free_dim_; }
    [[nodiscard]] std::size_t component_count() const noexcept { return components_.size(); }
    [[nodiscard]] std::vector<ad::Var> expand(std::span<const ad::Var> free) const;
    [[nodiscard]] std::vector<double> expand(std::span<const double> free) const;

  private:
    int m_{0};
    std::size_t free_dim_{0};
    std::vector<std::vector<int>> components_;

    template <class T>
    std::vector<T> expand_impl(std::span<const T> free) const;
};

} // namespace sae::spatial
