#pragma once

// GP-UCB over a finite grid with an RBF kernel and noise parameter s.

#include "bt/env.hpp"
#include "bt/errors.hpp"
#include "bt/rng.hpp"
#include "bt/ucb.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

namespace bt {

/// k(x, x') = exp(-|x - x'|^2 / (2 l^2)); k(x, x) = 1.
struct RbfKernel {
    double lengthscale = 1.0;

    double operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
        return std::exp(-(a - b).squaredNorm() / (2.0 * lengthscale * lengthscale));
    }
};

struct GpPosterior {
    double mean;
    double variance;  // k(x,x) - k_t(x)^T (K_t + sI)^-1 k_t(x)
    double sd() const { return std::sqrt(std::max(variance, 0.0)); }
};

/// Observations so far and the noise parameter.
class GpState {
public:
    static constexpr double jitter = 1e-10;

    GpState(RbfKernel kernel, double s) : kernel_(kernel), s_(s) {
        if (!(s > 0.0)) throw ConfigError("GP noise parameter s must be > 0");
    }

    std::size_t size() const noexcept { return xs_.size(); }
    double s() const noexcept { return s_; }
    const RbfKernel& kernel() const noexcept { return kernel_; }
    const std::vector<Eigen::VectorXd>& points() const noexcept { return xs_; }
    const std::vector<double>& observations() const noexcept { return ys_; }

    void observe(const Eigen::VectorXd& x, double y) {
        xs_.push_back(x);
        ys_.push_back(y);
        refactor();
    }

    GpPosterior posterior(const Eigen::VectorXd& x) const {
        const double kxx = kernel_(x, x);
        if (xs_.empty()) return {0.0, kxx};
        Eigen::VectorXd k(static_cast<Eigen::Index>(xs_.size()));
        for (std::size_t i = 0; i < xs_.size(); ++i) k[static_cast<Eigen::Index>(i)] = kernel_(xs_[i], x);
        const Eigen::VectorXd v = llt_.matrixL().solve(k);
        return {k.dot(weights_), kxx - v.squaredNorm()};
    }

private:
    void refactor() {
        const auto t = static_cast<Eigen::Index>(xs_.size());
        Eigen::MatrixXd G(t, t);
        for (Eigen::Index i = 0; i < t; ++i) {
            for (Eigen::Index j = 0; j <= i; ++j) {
                G(i, j) = G(j, i) = kernel_(xs_[static_cast<std::size_t>(i)], xs_[static_cast<std::size_t>(j)]);
            }
        }
        G.diagonal().array() += s_ + jitter;
        llt_.compute(G);
        if (llt_.info() != Eigen::Success) throw NumericalError("Cholesky failed on K_t + sI");
        const Eigen::Map<const Eigen::VectorXd> y(ys_.data(), t);
        weights_ = llt_.solve(y);
    }

    RbfKernel kernel_;
    double s_;
    std::vector<Eigen::VectorXd> xs_;
    std::vector<double> ys_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd weights_;
};

inline GpPosterior gp_posterior(const GpState& state, const Eigen::VectorXd& query) { return state.posterior(query); }

/// beta_t = 2 ln(n t^2 pi^2 / (6 delta)) unless explicit values are given.
struct BetaSchedule {
    double delta = 0.1;
    std::vector<double> values;  // values[t-1] overrides the formula when present

    double operator()(std::size_t n, std::size_t t) const {
        if (t >= 1 && t - 1 < values.size()) return values[t - 1];
        const double tt = static_cast<double>(t);
        return 2.0 * std::log(static_cast<double>(n) * tt * tt * std::numbers::pi * std::numbers::pi / (6.0 * delta));
    }
};

/// GP-UCB with noise parameter s. Choices are grid indices; rewards are the noisy
/// observations; cum_pseudo_regret accumulates f(x*) - f(x_t).
inline RunRecord run_gpucb(const GPInstance& inst, double s, const BetaSchedule& beta, std::size_t horizon,
                           std::uint64_t seed, RbfKernel kernel = {}) {
    inst.validate();
    GpState state(kernel, s);
    Rng noise(derive_seed(seed, 0, 0x6a0));
    const double noise_sd = std::sqrt(inst.noise_variance);
    const double fmax = inst.f[inst.argmax()];
    const std::size_t n = inst.size();
    RunRecord rec;
    rec.param = s;
    double cum = 0.0;
    for (std::size_t t = 1; t <= horizon; ++t) {
        const double sb = std::sqrt(beta(n, t));
        std::size_t best = 0;
        double best_v = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            const auto p = state.posterior(inst.grid[i]);
            const double v = p.mean + sb * p.sd();
            if (v > best_v) {
                best_v = v;
                best = i;
            }
        }
        const double y = inst.f[best] + noise_sd * Rng::standard_normal_quantile(noise.uniform());
        state.observe(inst.grid[best], y);
        cum += fmax - inst.f[best];
        rec.choices.push_back(best);
        rec.rewards.push_back(y);
        rec.cum_pseudo_regret.push_back(cum);
    }
    return rec;
}

}  // namespace bt
