#include "sae/nested_error.hpp"

#include "sae/error.hpp"

#include <algorithm>
#include <cmath>

namespace sae::classical {

namespace {

struct AreaStats {
    std::vector<long> n;
    Eigen::VectorXd ybar;
    Eigen::MatrixXd xbar;
};

AreaStats area_stats(const Eigen::VectorXd &y, const Eigen::MatrixXd &X,
                     std::span<const int> area_ids, int area_count) {
    if (static_cast<std::size_t>(y.size()) != area_ids.size() || X.rows() != y.size()) {
        throw ConfigError{"y, X and area ids differ in length"};
    }
    if (area_count < 1) {
        throw ConfigError{"area count must be positive"};
    }
    AreaStats s;
    const auto m = static_cast<std::size_t>(area_count);
    s.n.assign(m, 0);
    s.ybar = Eigen::VectorXd::Zero(area_count);
    s.xbar = Eigen::MatrixXd::Zero(area_count, X.cols());
    for (Eigen::Index j = 0; j < y.size(); ++j) {
        const int a = area_ids[static_cast<std::size_t>(j)];
        if (a < 0 || a >= area_count) {
            throw ConfigError{"area id " + std::to_string(a) + " out of range"};
        }
        ++s.n[static_cast<std::size_t>(a)];
        s.ybar(a) += y(j);
        s.xbar.row(a) += X.row(j);
    }
    for (int a = 0; a < area_count; ++a) {
        if (s.n[static_cast<std::size_t>(a)] > 0) {
            const double n = static_cast<double>(s.n[static_cast<std::size_t>(a)]);
            s.ybar(a) /= n;
            s.xbar.row(a) /= n;
        }
    }
    return s;
}

void require_full_rank(const Eigen::MatrixXd &X) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() == X.cols()) {
        return;
    }
    // Columns pivoted beyond the rank are linear combinations of the earlier ones.
    std::vector<Eigen::Index> collinear;
    for (Eigen::Index k = qr.rank(); k < X.cols(); ++k) {
        collinear.push_back(qr.colsPermutation().indices()(k));
    }
    std::sort(collinear.begin(), collinear.end());
    std::string list;
    for (auto k : collinear) {
        list += (list.empty() ? "" : ", ") + std::to_string(k);
    }
    throw ConfigError{"design matrix is rank deficient; collinear columns: " + list};
}

void check_xbar_pop(const Eigen::MatrixXd &xbar_pop, Eigen::Index m, Eigen::Index p) {
    if (xbar_pop.rows() != m || xbar_pop.cols() != p) {
        throw ConfigError{"population covariate means must have one row per area and one column "
                          "per covariate"};
    }
    if (!xbar_pop.allFinite()) {
        throw ConfigError{"population covariate means are missing for some area"};
    }
}

} // namespace

NerFit fit_ner_known(const Eigen::VectorXd &y, const Eigen::MatrixXd &X,
                     std::span<const int> area_ids, int area_count, double sigma2_v,
                     double sigma2_e) {
    if (!(sigma2_e > 0.0) || !(sigma2_v >= 0.0)) {
        throw ConfigError{"variance components must satisfy sigma2_v >= 0 and sigma2_e > 0"};
    }
    auto stats = area_stats(y, X, area_ids, area_count);
    require_full_rank(X);
    NerFit fit;
    fit.sigma2_v = sigma2_v;
    fit.sigma2_e = sigma2_e;
    fit.gamma = Eigen::VectorXd::Zero(area_count);
    // X'V^{-1}X and X'V^{-1}y with V_i^{-1} = (I - (gamma_i / n_i) J) / sigma2_e.
    Eigen::MatrixXd xtvx = X.transpose() * X;
    Eigen::VectorXd xtvy = X.transpose() * y;
    for (int a = 0; a < area_count; ++a) {
        const long ni = stats.n[static_cast<std::size_t>(a)];
        if (ni == 0) {
            continue;
        }
        const double n = static_cast<double>(ni);
        const double g = sigma2_v / (sigma2_v + sigma2_e / n);
        fit.gamma(a) = g;
        const Eigen::VectorXd xb = stats.xbar.row(a).transpose();
        xtvx -= g * n * xb * xb.transpose();
        xtvy -= g * n * stats.ybar(a) * xb;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtvx);
    if (ldlt.info() != Eigen::Success) {
        throw NumericalError{"GLS system is singular"};
    }
    fit.beta = ldlt.solve(xtvy);
    fit.beta_cov = sigma2_e * ldlt.solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
    fit.vtilde = Eigen::VectorXd::Zero(area_count);
    for (int a = 0; a < area_count; ++a) {
        if (stats.n[static_cast<std::size_t>(a)] > 0) {
            fit.vtilde(a) = fit.gamma(a) * (stats.ybar(a) - stats.xbar.row(a).dot(fit.beta));
        }
    }
    fit.n = std::move(stats.n);
    fit.ybar = std::move(stats.ybar);
    fit.xbar = std::move(stats.xbar);
    return fit;
}

NerFit fit_ner(const Eigen::VectorXd &y, const Eigen::MatrixXd &X, std::span<const int> area_ids,
               int area_count) {
    const auto stats = area_stats(y, X, area_ids, area_count);
    require_full_rank(X);
    const auto n_total = static_cast<double>(y.size());
    const auto p = static_cast<double>(X.cols());
    long sampled_areas = 0;
    for (long ni : stats.n) {
        sampled_areas += ni > 0 ? 1 : 0;
    }

    // Within-area regression: deviations from area means remove the v_i.
    Eigen::MatrixXd xw = X;
    Eigen::VectorXd yw = y;
    for (Eigen::Index j = 0; j < y.size(); ++j) {
        const int a = area_ids[static_cast<std::size_t>(j)];
        xw.row(j) -= stats.xbar.row(a);
        yw(j) -= stats.ybar(a);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> within(xw);
    within.setThreshold(1e-10);
    const Eigen::VectorXd within_resid = yw - xw * within.solve(yw);
    const double df_within = n_total - static_cast<double>(sampled_areas) -
                             static_cast<double>(within.rank());
    if (!(df_within > 0.0)) {
        throw ConfigError{"too few units for the within-area regression"};
    }
    const double sigma2_e = within_resid.squaredNorm() / df_within;
    if (!(sigma2_e > 0.0)) {
        throw NumericalError{"unit-level residual variance is zero"};
    }

    const Eigen::MatrixXd xtx = X.transpose() * X;
    const Eigen::LDLT<Eigen::MatrixXd> xtx_ldlt(xtx);
    const Eigen::VectorXd beta_ols = xtx_ldlt.solve(X.transpose() * y);
    const double sse_ols = (y - X * beta_ols).squaredNorm();
    Eigen::MatrixXd between = Eigen::MatrixXd::Zero(X.cols(), X.cols());
    for (int a = 0; a < area_count; ++a) {
        const double n = static_cast<double>(stats.n[static_cast<std::size_t>(a)]);
        const Eigen::VectorXd xb = stats.xbar.row(a).transpose();
        between += n * n * xb * xb.transpose();
    }
    const double n_star = n_total - xtx_ldlt.solve(between).trace();
    double sigma2_v = (sse_ols - (n_total - p) * sigma2_e) / n_star;
    std::vector<std::string> warnings;
    if (!(sigma2_v > 0.0)) {
        warnings.push_back("moment estimate of sigma2_v was " + std::to_string(sigma2_v) +
                           "; truncated at 0");
        sigma2_v = 0.0;
    }
    auto fit = fit_ner_known(y, X, area_ids, area_count, sigma2_v, sigma2_e);
    fit.warnings = std::move(warnings);
    return fit;
}

Eigen::VectorXd blup_area_means(const NerFit &fit, const Eigen::MatrixXd &xbar_pop,
                                std::span<const long> area_sizes) {
    const auto m = static_cast<Eigen::Index>(fit.n.size());
    check_xbar_pop(xbar_pop, m, fit.beta.size());
    if (static_cast<Eigen::Index>(area_sizes.size()) != m) {
        throw ConfigError{"need one population size per area"};
    }
    Eigen::VectorXd out(m);
    for (Eigen::Index a = 0; a < m; ++a) {
        const double big_n = static_cast<double>(area_sizes[static_cast<std::size_t>(a)]);
        const double n = static_cast<double>(fit.n[static_cast<std::size_t>(a)]);
        if (n > big_n) {
            throw ConfigError{"area " + std::to_string(a) + " has more sampled units than N_i"};
        }
        const Eigen::RowVectorXd nonsampled_x = big_n * xbar_pop.row(a) - n * fit.xbar.row(a);
        out(a) = (n * fit.ybar(a) + nonsampled_x.dot(fit.beta) + (big_n - n) * fit.vtilde(a)) /
                 big_n;
    }
    return out;
}

PseudoEblupFit fit_pseudo_eblup(const Eigen::VectorXd &y, const Eigen::MatrixXd &X,
                                std::span<const double> w, std::span<const int> area_ids,
                                int area_count, double sigma2_v, double sigma2_e) {
    if (static_cast<Eigen::Index>(w.size()) != y.size()) {
        throw ConfigError{"weights and y differ in length"};
    }
    if (!(sigma2_e > 0.0) || !(sigma2_v >= 0.0)) {
        throw ConfigError{"variance components must satisfy sigma2_v >= 0 and sigma2_e > 0"};
    }
    const auto stats = area_stats(y, X, area_ids, area_count);
    PseudoEblupFit fit;
    fit.sigma2_v = sigma2_v;
    fit.sigma2_e = sigma2_e;
    fit.n = stats.n;
    fit.weight_sum = Eigen::VectorXd::Zero(area_count);
    fit.ybar_w = Eigen::VectorXd::Zero(area_count);
    fit.xbar_w = Eigen::MatrixXd::Zero(area_count, X.cols());
    fit.delta2 = Eigen::VectorXd::Zero(area_count);
    for (Eigen::Index j = 0; j < y.size(); ++j) {
        const double wj = w[static_cast<std::size_t>(j)];
        if (!(wj > 0.0)) {
            throw ConfigError{"weights must be positive"};
        }
        const int a = area_ids[static_cast<std::size_t>(j)];
        fit.weight_sum(a) += wj;
        fit.ybar_w(a) += wj * y(j);
        fit.xbar_w.row(a) += wj * X.row(j);
    }
    for (Eigen::Index j = 0; j < y.size(); ++j) {
        const int a = area_ids[static_cast<std::size_t>(j)];
        const double wt = w[static_cast<std::size_t>(j)] / fit.weight_sum(a);
        fit.delta2(a) += wt * wt;
    }
    fit.gamma_w = Eigen::VectorXd::Zero(area_count);
    for (int a = 0; a < area_count; ++a) {
        if (fit.weight_sum(a) > 0.0) {
            fit.ybar_w(a) /= fit.weight_sum(a);
            fit.xbar_w.row(a) /= fit.weight_sum(a);
            fit.gamma_w(a) = sigma2_v / (sigma2_v + sigma2_e * fit.delta2(a));
        }
    }
    // sum_i sum_j w x {y - x'b - g_i (ybar_w - xbar_w'b)} = 0 is linear in b for fixed gamma,
    // and gamma depends only on the variance components, so a single solve is exact.
    Eigen::MatrixXd lhs = Eigen::MatrixXd::Zero(X.cols(), X.cols());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(X.cols());
    for (Eigen::Index j = 0; j < y.size(); ++j) {
        const double wj = w[static_cast<std::size_t>(j)];
        lhs += wj * X.row(j).transpose() * X.row(j);
        rhs += wj * y(j) * X.row(j).transpose();
    }
    for (int a = 0; a < area_count; ++a) {
        if (fit.weight_sum(a) > 0.0) {
            const Eigen::VectorXd swx = fit.weight_sum(a) * fit.xbar_w.row(a).transpose();
            lhs -= fit.gamma_w(a) * swx * fit.xbar_w.row(a);
            rhs -= fit.gamma_w(a) * fit.ybar_w(a) * swx;
        }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
    if (!lu.isInvertible()) {
        throw NumericalError{"weighted estimating equations are singular"};
    }
    fit.beta_w = lu.solve(rhs);
    return fit;
}

PseudoEblupFit fit_pseudo_eblup(const Eigen::VectorXd &y, const Eigen::MatrixXd &X,
                                std::span<const double> w, std::span<const int> area_ids,
                                int area_count) {
    const auto ner = fit_ner(y, X, area_ids, area_count);
    return fit_pseudo_eblup(y, X, w, area_ids, area_count, ner.sigma2_v, ner.sigma2_e);
}

Eigen::VectorXd pseudo_eblup_means(const PseudoEblupFit &fit, const Eigen::MatrixXd &xbar_pop) {
    const auto m = fit.gamma_w.size();
    check_xbar_pop(xbar_pop, m, fit.beta_w.size());
    Eigen::VectorXd out(m);
    for (Eigen::Index a = 0; a < m; ++a) {
        const double g = fit.gamma_w(a);
        out(a) = g * fit.ybar_w(a) + (xbar_pop.row(a) - g * fit.xbar_w.row(a)).dot(fit.beta_w);
    }
    return out;
}

double guadarrama_predict(const Eigen::VectorXd &beta, double gamma_iw, const Eigen::VectorXd &x_ij,
                          double ybar_iw, const Eigen::VectorXd &xbar_iw) {
    return x_ij.dot(beta) + gamma_iw * (ybar_iw - xbar_iw.dot(beta));
}

double weight_model_b(std::span<const double> w, const Eigen::VectorXd &y,
                      const Eigen::MatrixXd &X) {
    if (static_cast<Eigen::Index>(w.size()) != y.size() || X.rows() != y.size()) {
        throw ConfigError{"weights, y and X differ in length"};
    }
    Eigen::MatrixXd design(X.rows(), X.cols() + 1);
    design << X, y;
    Eigen::VectorXd log_w(y.size());
    for (Eigen::Index j = 0; j < y.size(); ++j) {
        const double wj = w[static_cast<std::size_t>(j)];
        if (!(wj > 0.0)) {
            throw ConfigError{"weights must be positive"};
        }
        log_w(j) = std::log(wj);
    }
    require_full_rank(design);
    const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(log_w);
    return coef(coef.size() - 1);
}

Eigen::VectorXd pfeffermann_corrected_mean(const NerFit &fit, double b,
                                           const Eigen::MatrixXd &xbar_pop,
                                           std::span<const long> area_sizes) {
    const auto m = static_cast<Eigen::Index>(fit.n.size());
    check_xbar_pop(xbar_pop, m, fit.beta.size());
    if (static_cast<Eigen::Index>(area_sizes.size()) != m) {
        throw ConfigError{"need one population size per area"};
    }
    Eigen::VectorXd out(m);
    for (Eigen::Index a = 0; a < m; ++a) {
        const double big_n = static_cast<double>(area_sizes[static_cast<std::size_t>(a)]);
        const double n = static_cast<double>(fit.n[static_cast<std::size_t>(a)]);
        const double theta = fit.vtilde(a) + xbar_pop.row(a).dot(fit.beta);
        double sampled = 0.0;
        if (n > 0.0) {
            sampled = n * (fit.ybar(a) + (xbar_pop.row(a) - fit.xbar.row(a)).dot(fit.beta));
        }
        out(a) = ((big_n - n) * theta + sampled + (big_n - n) * b * fit.sigma2_e) / big_n;
    }
    return out;
}

} // namespace sae::classical
