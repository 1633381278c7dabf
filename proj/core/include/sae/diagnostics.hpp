#pragma once

#include "sae/hmc.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sae {

/// Chains as equal-length sequences of one scalar parameter.
using ChainSet = std::vector<std::vector<double>>;

/// Rank-normalised split R-hat: the larger of the bulk and folded versions. Unavailable
/// (nullopt) with fewer than two chains or chains shorter than four draws.
[[nodiscard]] std::optional<double> split_rhat(const ChainSet &chains);
/// Classic split R-hat on the raw values, sqrt(var_plus / W).
[[nodiscard]] std::optional<double> split_rhat_basic(const ChainSet &chains);

/// Bulk effective sample size on rank-normalised split chains.
[[nodiscard]] double ess_bulk(const ChainSet &chains);
/// Effective sample size of the raw values (split chains, Geyer initial monotone sequence).
[[nodiscard]] double ess_basic(const ChainSet &chains);

struct ParamSummary {
    std::string name;
    double mean{};
    double sd{};
    double q025{};
    double q975{};
    std::optional<double> rhat;
    double ess_bulk{};
    /// Monte Carlo standard errors of the posterior mean and sd.
    double mcse_mean{};
    double mcse_sd{};
};

[[nodiscard]] std::vector<ParamSummary> diagnostics(const PosteriorDraws &draws);
[[nodiscard]] ParamSummary summarise(const std::string &name, const ChainSet &chains);

/// Empirical quantile with linear interpolation (type 7).
[[nodiscard]] double quantile(std::vector<double> values, double prob);

} // namespace sae
