#pragma once

// LinUCB(alpha) on pre-drawn contexts, and the exact piecewise dual in alpha.

#include "bt/dual.hpp"
#include "bt/env.hpp"
#include "bt/errors.hpp"
#include "bt/piecewise.hpp"
#include "bt/ucb.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

namespace bt {

class LinUcbState {
public:
    explicit LinUcbState(std::size_t d)
        : K_(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d))),
          b_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d))) {}

    const Eigen::MatrixXd& K() const noexcept { return K_; }
    const Eigen::VectorXd& b() const noexcept { return b_; }
    std::size_t round() const noexcept { return round_; }

    Eigen::VectorXd theta() const { return K_.llt().solve(b_); }

    /// Point estimates theta^T x_i and widths sqrt(x_i^T K^-1 x_i) for one round's contexts.
    void scores(const std::vector<Eigen::VectorXd>& xs, std::vector<double>& est, std::vector<double>& width) const {
        const Eigen::LLT<Eigen::MatrixXd> llt(K_);
        if (llt.info() != Eigen::Success) throw NumericalError("LinUCB design matrix is not positive definite");
        const Eigen::VectorXd th = llt.solve(b_);
        est.resize(xs.size());
        width.resize(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            est[i] = th.dot(xs[i]);
            const Eigen::VectorXd v = llt.matrixL().solve(xs[i]);
            width[i] = std::sqrt(v.squaredNorm());
        }
    }

    void update(const Eigen::VectorXd& x, double payoff) {
        K_.noalias() += x * x.transpose();
        b_ += payoff * x;
        ++round_;
    }

private:
    Eigen::MatrixXd K_;
    Eigen::VectorXd b_;
    std::size_t round_ = 0;
};

namespace detail {
inline std::vector<double> linucb_gaps(const ContextualInstance& inst, const ContextTape& tape, std::size_t t,
                                       std::vector<double>& payoff_mean) {
    payoff_mean.resize(inst.n_arms());
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < inst.n_arms(); ++i) {
        payoff_mean[i] = inst.theta_star.dot(tape.contexts[t][i]);
        best = std::max(best, payoff_mean[i]);
    }
    std::vector<double> g(inst.n_arms());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = best - payoff_mean[i];
    return g;
}
}  // namespace detail

/// LinUCB on a context tape; the record's regret is against the best expected payoff each round.
inline RunRecord run_linucb_on(const ContextualInstance& inst, const ContextTape& tape, double alpha,
                               std::size_t horizon) {
    inst.validate();
    if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
    if (tape.horizon() < horizon) throw ConfigError("context tape shorter than horizon");
    LinUcbState state(inst.dim);
    RunRecord rec;
    rec.param = alpha;
    std::vector<double> est, width, mean;
    double cum = 0.0;
    for (std::size_t t = 0; t < horizon; ++t) {
        state.scores(tape.contexts[t], est, width);
        std::size_t a = 0;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < est.size(); ++i) {
            const double v = est[i] + alpha * width[i];
            if (v > best) {
                best = v;
                a = i;
            }
        }
        const auto gaps = detail::linucb_gaps(inst, tape, t, mean);
        const double payoff = mean[a] + tape.noise[t][a];
        state.update(tape.contexts[t][a], payoff);
        cum += gaps[a];
        rec.choices.push_back(a);
        rec.rewards.push_back(payoff);
        rec.cum_pseudo_regret.push_back(cum);
    }
    return rec;
}

inline RunRecord run_linucb(const ContextualInstance& inst, std::uint64_t seed, double alpha, std::size_t horizon) {
    return run_linucb_on(inst, draw_context_tape(inst, horizon, seed), alpha, horizon);
}

/// Exact dual of LinUCB(alpha) over [alpha_min, alpha_max]: average pseudo-regret per piece.
/// Each round an interval splits where arm j's score line est_j + alpha*w_j overtakes the incumbent's.
inline PiecewiseLoss linucb_critical_points(const ContextualInstance& inst, const ContextTape& tape, double alpha_min,
                                            double alpha_max, std::size_t horizon,
                                            std::size_t max_intervals = 1000000) {
    inst.validate();
    if (!(alpha_min >= 0.0) || !(alpha_min < alpha_max)) throw ConfigError("alpha range must satisfy 0 <= min < max");
    if (tape.horizon() < horizon || horizon < 1) throw ConfigError("context tape shorter than horizon");
    struct Node {
        double lo, hi;
        LinUcbState state;
        std::size_t round;
        double cum;
        std::size_t hint;
    };
    constexpr std::size_t none = static_cast<std::size_t>(-1);
    std::vector<Node> stack{{alpha_min, alpha_max, LinUcbState(inst.dim), 0, 0.0, none}};
    std::vector<double> cps, losses;
    double H = 0.0;
    std::size_t intervals = 1;
    std::vector<double> est, width, mean;
    while (!stack.empty()) {
        Node s = std::move(stack.back());
        stack.pop_back();
        while (s.round < horizon) {
            const std::size_t t = s.round;
            s.state.scores(tape.contexts[t], est, width);
            std::size_t l = s.hint;
            s.hint = none;
            if (l == none) {
                l = 0;
                double best = -std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < est.size(); ++i) {
                    const double v = est[i] + s.lo * width[i];
                    const bool tie = std::abs(v - best) <= detail::same_tol(v);
                    if ((v > best && !tie) || (tie && width[i] > width[l])) {
                        best = v;
                        l = i;
                    }
                }
            }
            double cross = std::numeric_limits<double>::infinity();
            std::size_t arm = none;
            for (std::size_t j = 0; j < est.size(); ++j) {
                if (j == l || !(width[j] > width[l])) continue;
                const double a = (est[l] - est[j]) / (width[j] - width[l]);
                if (!(a > s.lo + detail::same_tol(s.lo))) continue;
                if (a < cross || (a == cross && width[j] > width[arm])) {
                    cross = a;
                    arm = j;
                }
            }
            if (arm != none && cross < s.hi - detail::same_tol(s.hi)) {
                if (++intervals > max_intervals) throw ResourceError("LinUCB interval cap exceeded");
                Node right = s;
                right.lo = cross;
                right.hint = arm;
                stack.push_back(std::move(right));
                s.hi = cross;
            }
            const auto gaps = detail::linucb_gaps(inst, tape, t, mean);
            H = std::max(H, *std::max_element(gaps.begin(), gaps.end()));
            s.state.update(tape.contexts[t][l], mean[l] + tape.noise[t][l]);
            s.cum += gaps[l];
            ++s.round;
        }
        if (!losses.empty()) cps.push_back(s.lo);
        losses.push_back(s.cum / static_cast<double>(horizon));
    }
    return PiecewiseLoss(alpha_min, alpha_max, std::move(cps), std::move(losses), H);
}

}  // namespace bt
