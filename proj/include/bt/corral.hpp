#pragma once

// Corralling a grid of UCB(alpha) learners: log-barrier OMD Corral and a
// Tsallis-INF meta-learner. Only the sampled base learner sees each round.

#include "bt/env.hpp"
#include "bt/errors.hpp"
#include "bt/rng.hpp"
#include "bt/ucb.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <vector>

namespace bt {

struct CorralOptions {
    /// Rewards are mapped to losses 1 - (r - lo)/(hi - lo), clipped to [0,1].
    double reward_lo = 0.0;
    double reward_hi = 1.0;
    /// Initial learning rate for log-barrier Corral; <= 0 selects
    /// min(1/(40 sqrt(T) ln T), sqrt(M/T)).
    double eta = 0.0;
    bool warn = true;
};

struct CorralResult {
    RunRecord record;
    std::vector<double> p;             // meta distribution after the last update
    std::vector<double> iw_loss_sum;   // sum of importance-weighted losses fed per base
    std::vector<std::size_t> selections;
    std::size_t clamps = 0;            // times p had to be clamped and renormalized
};

namespace detail {

/// Rewards drawn lazily per arm and pull count from the same coin streams as draw_tape.
class LazyRewards {
public:
    LazyRewards(const BanditInstance& inst, std::uint64_t seed) : inst_(inst) {
        for (std::size_t i = 0; i < inst.n_arms(); ++i) streams_.emplace_back(seed, i);
        pulls_.assign(inst.n_arms(), 0);
    }
    double pull(std::size_t arm) {
        ++pulls_[arm];
        return inst_.arms[arm].quantile(streams_[arm].next());
    }

private:
    const BanditInstance& inst_;
    std::vector<ArmCoinStream> streams_;
    std::vector<std::size_t> pulls_;
};

inline std::size_t sample_index(const std::vector<double>& p, double u) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return i;
    }
    return p.size() - 1;
}

/// Clamps entries below 1e-12 and renormalizes; returns true if anything changed.
inline bool sanitize(std::vector<double>& p) {
    bool changed = false;
    for (double& v : p) {
        if (!(v >= 1e-12)) {
            v = 1e-12;
            changed = true;
        }
    }
    const double s = std::accumulate(p.begin(), p.end(), 0.0);
    if (changed || std::abs(s - 1.0) > 1e-10) {
        for (double& v : p) v /= s;
    }
    return changed;
}

/// x_{t+1,i} = 1 / (1/x_i + eta_i (l_i - lambda)) with lambda chosen so the result sums to 1.
inline std::vector<double> log_barrier_step(const std::vector<double>& x, const std::vector<double>& loss,
                                            const std::vector<double>& eta) {
    const std::size_t M = x.size();
    auto denom = [&](std::size_t i, double lam) { return 1.0 / x[i] + eta[i] * (loss[i] - lam); };
    auto total = [&](double lam) {
        double s = 0.0;
        for (std::size_t i = 0; i < M; ++i) {
            const double d = denom(i, lam);
            if (!(d > 0.0)) return std::numeric_limits<double>::infinity();
            s += 1.0 / d;
        }
        return s;
    };
    double lo = *std::min_element(loss.begin(), loss.end());
    double hi = *std::max_element(loss.begin(), loss.end());
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (total(mid) >= 1.0) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    std::vector<double> out(M);
    for (std::size_t i = 0; i < M; ++i) {
        const double d = denom(i, lo);
        out[i] = d > 0.0 ? 1.0 / d : 1.0;
    }
    return out;
}

/// Tsallis-INF weights p_i = 4 (eta (L_i - x))^-2, normalized by Newton's method on x.
inline std::vector<double> tsallis_weights(const std::vector<double>& L, double eta) {
    const std::size_t M = L.size();
    const double lmin = *std::min_element(L.begin(), L.end());
    double x = lmin - 2.0 / eta;
    std::vector<double> p(M);
    for (int it = 0; it < 100; ++it) {
        double s = 0.0, s32 = 0.0;
        for (std::size_t i = 0; i < M; ++i) {
            const double d = eta * (L[i] - x);
            p[i] = 4.0 / (d * d);
            s += p[i];
            s32 += std::pow(p[i], 1.5);
        }
        const double step = (s - 1.0) / (eta * s32);
        x -= step;
        if (std::abs(s - 1.0) < 1e-13) break;
    }
    for (std::size_t i = 0; i < M; ++i) {
        const double d = eta * (L[i] - x);
        p[i] = 4.0 / (d * d);
    }
    return p;
}

struct CorralSetup {
    std::vector<UcbState> bases;
    std::vector<double> alphas;
    std::vector<double> gaps;
    LazyRewards rewards;
    Rng meta;
};

inline CorralSetup make_setup(const BanditInstance& inst, const std::vector<double>& grid, std::uint64_t seed) {
    inst.validate();
    if (grid.size() < 2) throw ConfigError("corralling needs at least two base learners");
    for (double a : grid) {
        if (!(a >= 0.0)) throw ConfigError("alpha grid values must be >= 0");
    }
    CorralSetup s{std::vector<UcbState>(grid.size(), UcbState(inst.n_arms())), grid, {},
                  LazyRewards(inst, derive_seed(seed, 0, 0xc0a1)), Rng(derive_seed(seed, 1, 0xc0a1))};
    if (inst.true_means) s.gaps = inst.gaps();
    return s;
}

inline double to_loss(double r, const CorralOptions& o) {
    const double span = o.reward_hi - o.reward_lo;
    return std::clamp(1.0 - (r - o.reward_lo) / span, 0.0, 1.0);
}

inline void check_options(const CorralOptions& o) {
    if (!(o.reward_hi > o.reward_lo)) throw ConfigError("reward bounds must satisfy lo < hi");
}

}  // namespace detail

/// Corral with log-barrier OMD and increasing learning rates; never restarts.
inline CorralResult run_corral(const BanditInstance& inst, const std::vector<double>& alpha_grid, std::size_t horizon,
                               std::uint64_t seed, const CorralOptions& opt = {}) {
    detail::check_options(opt);
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    auto s = detail::make_setup(inst, alpha_grid, seed);
    const std::size_t M = alpha_grid.size();
    const double T = static_cast<double>(horizon);
    const double lnT = std::log(std::max(T, 3.0));
    const double gamma = 1.0 / T;
    const double beta = std::exp(1.0 / lnT);
    const double eta0 = opt.eta > 0.0 ? opt.eta : std::min(1.0 / (40.0 * std::sqrt(T) * lnT), std::sqrt(M / T));
    std::vector<double> eta(M, eta0), rho(M, 2.0 * static_cast<double>(M));
    std::vector<double> p(M, 1.0 / static_cast<double>(M)), pbar = p;

    CorralResult res;
    res.iw_loss_sum.assign(M, 0.0);
    res.selections.assign(M, 0);
    res.record.param = 0.0;
    double cum = 0.0;
    for (std::size_t t = 0; t < horizon; ++t) {
        const std::size_t b = detail::sample_index(pbar, s.meta.uniform());
        const std::size_t arm = s.bases[b].select(s.alphas[b]);
        const double r = s.rewards.pull(arm);
        s.bases[b].observe(arm, r);
        ++res.selections[b];

        std::vector<double> loss(M, 0.0);
        loss[b] = detail::to_loss(r, opt) / pbar[b];
        res.iw_loss_sum[b] += loss[b];
        p = detail::log_barrier_step(p, loss, eta);
        if (detail::sanitize(p)) ++res.clamps;
        for (std::size_t i = 0; i < M; ++i) {
            pbar[i] = (1.0 - gamma) * p[i] + gamma / static_cast<double>(M);
            if (1.0 / pbar[i] > rho[i]) {
                rho[i] = 2.0 / pbar[i];
                eta[i] *= beta;
            }
        }
        res.record.choices.push_back(arm);
        res.record.rewards.push_back(r);
        if (!s.gaps.empty()) {
            cum += s.gaps[arm];
            res.record.cum_pseudo_regret.push_back(cum);
        }
    }
    res.p = pbar;
    if (res.clamps > 0 && opt.warn) {
        std::cerr << "warning: corral meta distribution clamped " << res.clamps << " times\n";
    }
    return res;
}

/// Tsallis-INF (power 1/2) meta-learner with eta_t = 2/sqrt(t) and importance-weighted losses.
inline CorralResult run_corral_stochastic(const BanditInstance& inst, const std::vector<double>& alpha_grid,
                                          std::size_t horizon, std::uint64_t seed, const CorralOptions& opt = {}) {
    detail::check_options(opt);
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    auto s = detail::make_setup(inst, alpha_grid, seed);
    const std::size_t M = alpha_grid.size();
    std::vector<double> L(M, 0.0);
    std::vector<double> p(M, 1.0 / static_cast<double>(M));

    CorralResult res;
    res.iw_loss_sum.assign(M, 0.0);
    res.selections.assign(M, 0);
    double cum = 0.0;
    for (std::size_t t = 1; t <= horizon; ++t) {
        p = detail::tsallis_weights(L, 2.0 / std::sqrt(static_cast<double>(t)));
        if (detail::sanitize(p)) ++res.clamps;
        const std::size_t b = detail::sample_index(p, s.meta.uniform());
        const std::size_t arm = s.bases[b].select(s.alphas[b]);
        const double r = s.rewards.pull(arm);
        s.bases[b].observe(arm, r);
        ++res.selections[b];
        const double iw = detail::to_loss(r, opt) / p[b];
        L[b] += iw;
        res.iw_loss_sum[b] += iw;
        res.record.choices.push_back(arm);
        res.record.rewards.push_back(r);
        if (!s.gaps.empty()) {
            cum += s.gaps[arm];
            res.record.cum_pseudo_regret.push_back(cum);
        }
    }
    res.p = detail::tsallis_weights(L, 2.0 / std::sqrt(static_cast<double>(horizon + 1)));
    detail::sanitize(res.p);
    if (res.clamps > 0 && opt.warn) {
        std::cerr << "warning: Tsallis-INF meta distribution clamped " << res.clamps << " times\n";
    }
    return res;
}

}  // namespace bt
