#pragma once

// Reverse-mode automatic differentiation over scalar expression graphs.
//
// Every thread owns one Tape. A Var is either a constant (no tape node) or refers to a
// node on the calling thread's tape. Evaluating a density is: clear the tape, create the
// input leaves, build the expression, call backward() on the result.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace sae::ad {

using Index = std::uint32_t;
inline constexpr Index kConstant = std::numeric_limits<Index>::max();

class Tape {
  public:
    Tape();

    Index leaf();
    Index unary(Index a, double da);
    Index binary(Index a, double da, Index b, double db);
    /// Node with an arbitrary number of parents; constants (kConstant) are skipped.
    Index nary(std::span<const Index> parents, std::span<const double> partials);

    void clear();
    /// Propagates adjoints from `root` (seeded with 1) back to the leaves.
    void backward(Index root);
    [[nodiscard]] double adjoint(Index i) const { return adjoint_[i]; }
    [[nodiscard]] std::size_t size() const noexcept { return edge_begin_.size() - 1; }

  private:
    Index push_node();

    std::vector<Index> edge_begin_;
    std::vector<Index> parents_;
    std::vector<double> partials_;
    std::vector<double> adjoint_;
};

/// The calling thread's tape.
Tape &tape();

class Var {
  public:
    Var() = default;
    // NOLINTNEXTLINE(google-explicit-constructor): constants mix freely with variables.
    Var(double value) : value_{value} {}
    Var(double value, Index index) : value_{value}, index_{index} {}

    /// New independent variable on the thread's tape.
    static Var variable(double value) { return {value, tape().leaf()}; }

    [[nodiscard]] double value() const noexcept { return value_; }
    [[nodiscard]] Index index() const noexcept { return index_; }
    [[nodiscard]] bool is_constant() const noexcept { return index_ == kConstant; }

    Var &operator+=(const Var &other);
    Var &operator-=(const Var &other);
    Var &operator*=(const Var &other);
    Var &operator/=(const Var &other);

  private:
    double value_{0.0};
    Index index_{kConstant};
};

namespace detail {

inline Var make_unary(double value, const Var &a, double da) {
    if (a.is_constant()) {
        return Var{value};
    }
    return {value, tape().unary(a.index(), da)};
}

inline Var make_binary(double value, const Var &a, double da, const Var &b, double db) {
    if (a.is_constant()) {
        return make_unary(value, b, db);
    }
    if (b.is_constant()) {
        return {value, tape().unary(a.index(), da)};
    }
    return {value, tape().binary(a.index(), da, b.index(), db)};
}

} // namespace detail

inline Var operator+(const Var &a, const Var &b) {
    return detail::make_binary(a.value() + b.value(), a, 1.0, b, 1.0);
}
inline Var operator-(const Var &a, const Var &b) {
    return detail::make_binary(a.value() - b.value(), a, 1.0, b, -1.0);
}
inline Var operator*(const Var &a, const Var &b) {
    return detail::make_binary(a.value() * b.value(), a, b.value(), b, a.value());
}
inline Var operator/(const Var &a, const Var &b) {
    const double inv = 1.0 / b.value();
    const double q = a.value() * inv;
    return detail::make_binary(q, a, inv, b, -q * inv);
}
inline Var operator-(const Var &a) { return detail::make_unary(-a.value(), a, -1.0); }

inline Var &Var::operator+=(const Var &other) { return *this = *this + other; }
inline Var &Var::operator-=(const Var &other) { return *this = *this - other; }
inline Var &Var::operator*=(const Var &other) { return *this = *this * other; }
inline Var &Var::operator/=(const Var &other) { return *this = *this / other; }

inline bool operator<(const Var &a, const Var &b) { return a.value() < b.value(); }
inline bool operator>(const Var &a, const Var &b) { return a.value() > b.value(); }

inline Var exp(const Var &a) {
    const double e = std::exp(a.value());
    return detail::make_unary(e, a, e);
}
inline Var log(const Var &a) { return detail::make_unary(std::log(a.value()), a, 1.0 / a.value()); }
inline Var log1p(const Var &a) {
    return detail::make_unary(std::log1p(a.value()), a, 1.0 / (1.0 + a.value()));
}
inline Var sqrt(const Var &a) {
    const double s = std::sqrt(a.value());
    return detail::make_unary(s, a, 0.5 / s);
}
inline Var square(const Var &a) { return detail::make_unary(a.value() * a.value(), a, 2.0 * a.value()); }
inline Var pow(const Var &a, double p) {
    const double v = std::pow(a.value(), p);
    return detail::make_unary(v, a, p * std::pow(a.value(), p - 1.0));
}

/// Numerically stable scalar helpers shared by double and Var code paths.
inline double inv_logit(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}
/// log(1 + exp(x))
inline double log1p_exp(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
inline double square(double x) { return x * x; }

inline Var inv_logit(const Var &a) {
    const double p = inv_logit(a.value());
    return detail::make_unary(p, a, p * (1.0 - p));
}
inline Var log1p_exp(const Var &a) {
    return detail::make_unary(log1p_exp(a.value()), a, inv_logit(a.value()));
}
/// log(inv_logit(x)) = -log1p_exp(-x)
inline Var log_inv_logit(const Var &a) {
    return detail::make_unary(-log1p_exp(-a.value()), a, 1.0 - inv_logit(a.value()));
}
/// log(1 - inv_logit(x)) = -log1p_exp(x)
inline Var log1m_inv_logit(const Var &a) {
    return detail::make_unary(-log1p_exp(a.value()), a, -inv_logit(a.value()));
}

/// Sum of terms as one tape node.
Var sum(std::span<const Var> terms);
/// sum_k coef_k * terms_k as one tape node.
Var dot(std::span<const Var> terms, std::span<const double> coefficients);

/// Value of a Var or a double, for generic code.
inline double value_of(double x) { return x; }
inline double value_of(const Var &x) { return x.value(); }

} // namespace sae::ad
