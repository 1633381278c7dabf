#include "sae/hmc.hpp"

#include "sae/error.hpp"
#include "sae/random.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

namespace sae {

namespace {

constexpr int kMaxInitAttempts = 100;
constexpr double kDivergenceThreshold = 1000.0;

struct DualAveraging {
    double mu{};
    double h_bar{0.0};
    double log_eps_bar{0.0};
    int count{0};

    static constexpr double gamma = 0.05;
    static constexpr double t0 = 10.0;
    static constexpr double kappa = 0.75;

    void restart(double eps) {
        mu = std::log(10.0 * eps);
        h_bar = 0.0;
        log_eps_bar = 0.0;
        count = 0;
    }

    double update(double accept, double target) {
        ++count;
        const double t = count;
        const double eta = 1.0 / (t + t0);
        h_bar = (1.0 - eta) * h_bar + eta * (target - accept);
        const double log_eps = mu - std::sqrt(t) / gamma * h_bar;
        const double w = std::pow(t, -kappa);
        log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
        return std::exp(log_eps);
    }
};

/// Warmup schedule: fast initial buffer, doubling slow windows for the metric, fast final
/// buffer. Returns window end iterations (exclusive).
struct WarmupSchedule {
    int init_buffer{0};
    int term_buffer{0};
    std::vector<int> window_ends;

    WarmupSchedule(int warmup, bool adapt_metric) {
        if (!adapt_metric || warmup < 20) {
            return;
        }
        init_buffer = 75;
        term_buffer = 50;
        int base = 25;
        if (init_buffer + term_buffer + base > warmup) {
            init_buffer = static_cast<int>(0.15 * warmup);
            term_buffer = static_cast<int>(0.1 * warmup);
            base = warmup - init_buffer - term_buffer;
        }
        const int slow_end = warmup - term_buffer;
        int start = init_buffer;
        int size = base;
        while (start < slow_end) {
            int end = start + size;
            // Stretch the last window if the following one would not fit.
            if (end + 2 * size > slow_end) {
                end = slow_end;
            }
            window_ends.push_back(end);
            start = end;
            size *= 2;
        }
    }

    [[nodiscard]] bool in_slow_window(int it) const {
        return !window_ends.empty() && it >= init_buffer && it < window_ends.back();
    }
    [[nodiscard]] bool ends_window(int it) const {
        return std::find(window_ends.begin(), window_ends.end(), it + 1) != window_ends.end();
    }
};

class ChainRunner {
  public:
    ChainRunner(const ModelDensity &model, const HmcConfig &config, int chain)
        : model_{model}, config_{config}, rng_{make_stream(config.seed, {static_cast<std::uint64_t>(chain)})},
          d_{model.dimension()}, z_(d_), grad_(d_), inv_metric_(d_, 1.0) {}

    void run(Eigen::Ref<Eigen::MatrixXd> out, long &divergences, double &step, double &accept,
             double &metric_mean) {
        initialise();
        step_ = find_initial_step();
        DualAveraging da;
        da.restart(step_);
        const WarmupSchedule schedule(config_.warmup, config_.adapt_metric);
        std::vector<double> mean(d_, 0.0);
        std::vector<double> m2(d_, 0.0);
        long window_n = 0;

        for (int it = 0; it < config_.warmup; ++it) {
            const auto result = transition();
            step_ = da.update(result.accept, config_.target_accept);
            if (schedule.in_slow_window(it)) {
                ++window_n;
                for (std::size_t k = 0; k < d_; ++k) {
                    const double delta = z_[k] - mean[k];
                    mean[k] += delta / static_cast<double>(window_n);
                    m2[k] += delta * (z_[k] - mean[k]);
                }
                if (schedule.ends_window(it)) {
                    const double n = static_cast<double>(window_n);
                    for (std::size_t k = 0; k < d_; ++k) {
                        const double var = window_n > 1 ? m2[k] / (n - 1.0) : 1.0;
                        inv_metric_[k] = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0));
                    }
                    std::fill(mean.begin(), mean.end(), 0.0);
                    std::fill(m2.begin(), m2.end(), 0.0);
                    window_n = 0;
                    step_ = find_initial_step();
                    da.restart(step_);
                }
            }
        }
        if (config_.warmup > 0) {
            step_ = std::exp(da.log_eps_bar);
        }

        double accept_sum = 0.0;
        for (int it = 0; it < config_.iterations; ++it) {
            const auto result = transition();
            accept_sum += result.accept;
            if (result.divergent) {
                ++divergences;
            }
            const auto x = model_.constrain(z_);
            for (std::size_t k = 0; k < x.size(); ++k) {
                out(it, static_cast<Eigen::Index>(k)) = x[k];
            }
        }
        step = step_;
        accept = config_.iterations > 0 ? accept_sum / config_.iterations : 0.0;
        double s = 0.0;
        for (double v : inv_metric_) {
            s += v;
        }
        metric_mean = s / static_cast<double>(d_);
    }

  private:
    struct Transition {
        double accept{};
        bool divergent{false};
    };

    const ModelDensity &model_;
    const HmcConfig &config_;
    Rng rng_;
    std::size_t d_;
    std::vector<double> z_;
    std::vector<double> grad_;
    std::vector<double> inv_metric_;
    double lp_{};
    double step_{1.0};

    void initialise() {
        if (!config_.init.empty()) {
            z_ = config_.init;
            lp_ = model_.log_density_gradient(z_, grad_);
            if (finite_state(lp_, grad_)) {
                return;
            }
            throw NumericalError{"log density is not finite at the supplied initial point"};
        }
        std::uniform_real_distribution<double> unif(-config_.init_radius, config_.init_radius);
        for (int attempt = 0; attempt < kMaxInitAttempts; ++attempt) {
            for (auto &v : z_) {
                v = unif(rng_);
            }
            lp_ = model_.log_density_gradient(z_, grad_);
            if (finite_state(lp_, grad_)) {
                return;
            }
        }
        throw NumericalError{"could not find a finite initial point after " +
                             std::to_string(kMaxInitAttempts) + " attempts"};
    }

    static bool finite_state(double lp, const std::vector<double> &grad) {
        return std::isfinite(lp) &&
               std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); });
    }

    void draw_momentum(std::vector<double> &p) {
        std::normal_distribution<double> normal;
        for (std::size_t k = 0; k < d_; ++k) {
            p[k] = normal(rng_) / std::sqrt(inv_metric_[k]);
        }
    }

    double kinetic(const std::vector<double> &p) const {
        double k = 0.0;
        for (std::size_t i = 0; i < d_; ++i) {
            k += p[i] * p[i] * inv_metric_[i];
        }
        return 0.5 * k;
    }

    /// Leapfrog from (z, p) with `steps` steps. Returns the new log density or NaN.
    double leapfrog(std::vector<double> &z, std::vector<double> &p, std::vector<double> &grad,
                    double eps, int steps) const {
        double lp = 0.0;
        for (int s = 0; s < steps; ++s) {
            for (std::size_t k = 0; k < d_; ++k) {
                p[k] += 0.5 * eps * grad[k];
                z[k] += eps * inv_metric_[k] * p[k];
            }
            lp = model_.log_density_gradient(z, grad);
            if (!finite_state(lp, grad)) {
                return std::numeric_limits<double>::quiet_NaN();
            }
            for (std::size_t k = 0; k < d_; ++k) {
                p[k] += 0.5 * eps * grad[k];
            }
        }
        return lp;
    }

    /// Stan's heuristic: double or halve from the current step until the one-step
    /// acceptance crosses 0.8.
    double find_initial_step() {
        double eps = step_ > 0.0 && std::isfinite(step_) ? step_ : 1.0;
        std::vector<double> p(d_);
        std::vector<double> z(d_);
        std::vector<double> g(d_);
        draw_momentum(p);
        const double h0 = -lp_ + kinetic(p);
        auto delta_h = [&](double e) {
            z = z_;
            g = grad_;
            auto q = p;
            const double lp = leapfrog(z, q, g, e, 1);
            const double h = std::isfinite(lp) ? -lp + kinetic(q) : std::numeric_limits<double>::infinity();
            return h0 - h;
        };
        double dh = delta_h(eps);
        const int direction = dh > std::log(0.8) ? 1 : -1;
        for (int iter = 0; iter < 100; ++iter) {
            eps = direction == 1 ? 2.0 * eps : 0.5 * eps;
            if (eps > 1e7 || eps < 1e-10) {
                break;
            }
            dh = delta_h(eps);
            if (direction == 1 && !(dh > std::log(0.8))) {
                break;
            }
            if (direction == -1 && dh > std::log(0.8)) {
                break;
            }
        }
        return std::clamp(eps, 1e-10, 1e7);
    }

    Transition transition() {
        std::vector<double> p(d_);
        draw_momentum(p);
        const double h0 = -lp_ + kinetic(p);
        const int base = std::max(1, static_cast<int>(std::lround(config_.integration_time / step_)));
        std::uniform_real_distribution<double> jitter(0.5, 1.5);
        const int steps = std::clamp(static_cast<int>(std::lround(base * jitter(rng_))), 1,
                                     config_.max_steps);
        auto z = z_;
        auto g = grad_;
        const double lp = leapfrog(z, p, g, step_, steps);
        Transition result;
        if (!std::isfinite(lp)) {
            result.divergent = true;
            return result;
        }
        const double h1 = -lp + kinetic(p);
        const double log_ratio = h0 - h1;
        if (!std::isfinite(log_ratio) || -log_ratio > kDivergenceThreshold) {
            result.divergent = true;
            return result;
        }
        result.accept = std::min(1.0, std::exp(log_ratio));
        std::uniform_real_distribution<double> unif;
        if (unif(rng_) < result.accept) {
            z_ = std::move(z);
            grad_ = std::move(g);
            lp_ = lp;
        }
        return result;
    }
};

} // namespace

void HmcConfig::validate() const {
    if (chains < 1) {
        throw ConfigError{"chains must be at least 1"};
    }
    if (warmup < 0 || iterations < 1) {
        throw ConfigError{"warmup must be >= 0 and iterations >= 1"};
    }
    if (!(target_accept > 0.0 && target_accept < 1.0)) {
        throw ConfigError{"target_accept must lie in (0, 1)"};
    }
    if (!(integration_time > 0.0) || max_steps < 1) {
        throw ConfigError{"integration_time must be positive and max_steps >= 1"};
    }
}

std::size_t PosteriorDraws::column(const std::string &name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
        throw ConfigError{"no parameter named '" + name + "' in draws"};
    }
    return static_cast<std::size_t>(it - names.begin());
}

std::vector<double> PosteriorDraws::chain_values(std::size_t col, int chain) const {
    std::vector<double> v(static_cast<std::size_t>(iterations));
    for (int i = 0; i < iterations; ++i) {
        v[static_cast<std::size_t>(i)] =
            draws(static_cast<Eigen::Index>(chain) * iterations + i, static_cast<Eigen::Index>(col));
    }
    return v;
}

PosteriorDraws hmc_sample(const ModelDensity &model, const HmcConfig &config) {
    config.validate();
    if (model.dimension() < 1) {
        throw ConfigError{"model dimension must be at least 1"};
    }
    if (!config.init.empty() && config.init.size() != model.dimension()) {
        throw ConfigError{"initial point has the wrong dimension"};
    }
    PosteriorDraws out;
    out.names = model.space().constrained_names();
    out.chains = config.chains;
    out.iterations = config.iterations;
    out.draws.resize(static_cast<Eigen::Index>(config.chains) * config.iterations,
                     static_cast<Eigen::Index>(model.space().constrained_dim()));
    out.step_sizes.assign(static_cast<std::size_t>(config.chains), 0.0);
    out.mean_accept.assign(static_cast<std::size_t>(config.chains), 0.0);
    out.inverse_metric_mean.assign(static_cast<std::size_t>(config.chains), 0.0);
    std::vector<long> divergences(static_cast<std::size_t>(config.chains), 0);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(config.chains));

    auto run_chain = [&](int c) {
        const auto uc = static_cast<std::size_t>(c);
        try {
            ChainRunner runner(model, config, c);
            runner.run(out.draws.middleRows(static_cast<Eigen::Index>(c) * config.iterations,
                                            config.iterations),
                       divergences[uc], out.step_sizes[uc], out.mean_accept[uc],
                       out.inverse_metric_mean[uc]);
        } catch (...) {
            errors[uc] = std::current_exception();
        }
    };

    if (config.parallel && config.chains > 1) {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(config.chains));
        for (int c = 0; c < config.chains; ++c) {
            threads.emplace_back(run_chain, c);
        }
        for (auto &t : threads) {
            t.join();
        }
    } else {
        for (int c = 0; c < config.chains; ++c) {
            run_chain(c);
        }
    }
    for (const auto &e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }

    for (int c = 0; c < config.chains; ++c) {
        for (int i = 0; i < config.iterations; ++i) {
            out.chain_ids.push_back(c);
        }
        out.divergences += divergences[static_cast<std::size_t>(c)];
    }
    const double rate = static_cast<double>(out.divergences) /
                        (static_cast<double>(config.chains) * config.iterations);
    if (rate > 0.2) {
        out.warnings.push_back("divergent transitions after warmup: " +
                               std::to_string(out.divergences) + " (" +
                               std::to_string(static_cast<int>(std::lround(100.0 * rate))) + "%)");
    }
    return out;
}

} // namespace sae
