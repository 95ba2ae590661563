#pragma once

// Exact piecewise structure of the UCB(alpha) loss on a fixed reward tape.
//
// Within an interval [lo, hi) every alpha makes the same choices so far. At
// each round the incumbent l* is the argmax just right of lo; an arm with
// fewer pulls overtakes it where
//   alpha = ((mu_l - mu_i) / (1/sqrt(t_i) - 1/sqrt(t_l)))^2 / ln(sum_j t_j).
// The nearest such crossing splits the interval: the left part pulls l*, the
// right part is pushed on a stack with the un-advanced state and the crossing
// arm as its incumbent.

#include "bt/env.hpp"
#include "bt/errors.hpp"
#include "bt/piecewise.hpp"
#include "bt/ucb.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

namespace bt {

namespace detail {

struct UcbNode {
    double lo;
    double hi;
    std::vector<std::size_t> pulls;
    std::vector<double> sums;
    std::vector<std::size_t> cursor;  // next unread entry per arm
    std::size_t count;                // sum of pulls
    std::size_t round;                // rounds simulated so far
    double cum_regret;
    double collected;
    std::size_t hint;                 // incumbent at lo+, or npos to recompute
};

inline constexpr std::size_t npos = static_cast<std::size_t>(-1);

/// Values this close are the same crossing or tie computed along different
/// float paths.
inline double same_tol(double x) { return 1e-12 * std::max(1.0, std::abs(x)); }

/// Incumbent just to the right of alpha: largest index, then larger width
/// (fewer pulls), then lowest arm.
inline std::size_t incumbent(const UcbNode& s, double alpha, double logc) {
    const std::size_t n = s.pulls.size();
    std::size_t best = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double mean = s.sums[i] / static_cast<double>(s.pulls[i]);
        const double v = mean + std::sqrt(alpha * logc / static_cast<double>(s.pulls[i]));
        const bool tie = std::abs(v - best_v) <= same_tol(v);
        if ((v > best_v && !tie) || (tie && s.pulls[i] < s.pulls[best])) {
            best_v = v;
            best = i;
        }
    }
    return best;
}

/// Nearest crossing strictly above lo and the arm that takes over there.
inline std::pair<double, std::size_t> next_crossing(const UcbNode& s, std::size_t l, double logc) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arm = npos;
    const double mu_l = s.sums[l] / static_cast<double>(s.pulls[l]);
    const double inv_l = 1.0 / std::sqrt(static_cast<double>(s.pulls[l]));
    for (std::size_t i = 0; i < s.pulls.size(); ++i) {
        if (i == l || s.pulls[i] >= s.pulls[l]) continue;
        const double mu_i = s.sums[i] / static_cast<double>(s.pulls[i]);
        const double ratio = (mu_l - mu_i) / (1.0 / std::sqrt(static_cast<double>(s.pulls[i])) - inv_l);
        const double a = ratio * ratio / logc;
        if (!(a > s.lo + same_tol(s.lo))) continue;
        if (a < best || (a == best && s.pulls[i] < s.pulls[arm])) {
            best = a;
            arm = i;
        }
    }
    return {best, arm};
}

struct UcbDualSetup {
    const std::vector<std::vector<double>>* rewards;  // per-arm sequences
    UcbNode root;
    std::size_t horizon;          // total rounds to simulate (root.round counts those done)
    bool stop_on_empty;           // literal termination: any arm's future exhausted
    const std::vector<double>* gaps;  // pseudo-regret gaps, or null
    double best_total = 0.0;          // realized-regret benchmark
};

struct UcbPiece {
    double lo;
    double hi;
    double loss;
};

inline std::vector<UcbPiece> ucb_dual_pieces(const UcbDualSetup& setup) {
    const auto& R = *setup.rewards;
    const std::size_t n = R.size();
    std::vector<UcbPiece> out;
    std::vector<UcbNode> stack;
    stack.push_back(setup.root);
    while (!stack.empty()) {
        UcbNode s = std::move(stack.back());
        stack.pop_back();
        while (s.round < setup.horizon) {
            if (setup.stop_on_empty) {
                bool empty = false;
                for (std::size_t i = 0; i < n; ++i) empty = empty || s.cursor[i] >= R[i].size();
                if (empty) break;
            }
            std::size_t l = 0;
            if (n > 1) {
                const double logc = std::log(static_cast<double>(s.count));
                l = s.hint != npos ? s.hint : incumbent(s, s.lo, logc);
                s.hint = npos;
                const auto [a, arm] = next_crossing(s, l, logc);
                if (arm != npos && a < s.hi - same_tol(s.hi)) {
                    UcbNode right = s;
                    right.lo = a;
                    right.hint = arm;
                    stack.push_back(std::move(right));
                    s.hi = a;
                }
            }
            if (s.cursor[l] >= R[l].size()) throw TapeUnderflow(l);
            const double r = R[l][s.cursor[l]++];
            ++s.pulls[l];
            s.sums[l] += r;
            ++s.count;
            ++s.round;
            s.collected += r;
            if (setup.gaps) s.cum_regret += (*setup.gaps)[l];
        }
        const double T = static_cast<double>(std::max<std::size_t>(s.round, 1));
        const double loss = setup.gaps ? s.cum_regret / T : (setup.best_total - s.collected) / T;
        out.push_back({s.lo, s.hi, loss});
    }
    return out;
}

}  // namespace detail

/// Critical points of UCB(alpha) in (alpha_l, alpha_h) from a post-initialization
/// state: pulls and means per arm, and each arm's future rewards. Stops when any
/// arm's future is exhausted.
inline std::vector<double> alpha_critical_points(double alpha_l, double alpha_h, const std::vector<std::size_t>& pulls,
                                                 const std::vector<double>& means,
                                                 const std::vector<std::vector<double>>& future) {
    if (!(alpha_l < alpha_h)) throw DomainError("alpha_critical_points: need alpha_l < alpha_h");
    const std::size_t n = pulls.size();
    if (means.size() != n || future.size() != n) throw ConfigError("pulls, means and future must have equal length");
    detail::UcbNode root{alpha_l, alpha_h, pulls, {}, std::vector<std::size_t>(n, 0), 0, 0, 0.0, 0.0, detail::npos};
    for (std::size_t i = 0; i < n; ++i) {
        if (pulls[i] < 1) throw DomainError("alpha_critical_points: every arm needs at least one pull");
        if (!std::isfinite(means[i])) throw DomainError("alpha_critical_points: means must be finite");
        root.sums.push_back(means[i] * static_cast<double>(pulls[i]));
        root.count += pulls[i];
    }
    detail::UcbDualSetup setup{&future, std::move(root), std::numeric_limits<std::size_t>::max(), true, nullptr};
    const auto pieces = detail::ucb_dual_pieces(setup);
    std::vector<double> cps;
    for (std::size_t k = 1; k < pieces.size(); ++k) cps.push_back(pieces[k].lo);
    return cps;
}

namespace detail {

inline std::vector<double> gaps_of(const std::optional<std::vector<double>>& true_means, std::size_t n) {
    std::vector<double> g;
    if (!true_means) return g;
    if (true_means->size() != n) throw ConfigError("true_means length differs from tape arm count");
    const double best = *std::max_element(true_means->begin(), true_means->end());
    for (double m : *true_means) g.push_back(best - m);
    return g;
}

inline PiecewiseLoss assemble(const std::vector<UcbPiece>& pieces, double rho_min, double rho_max, double H) {
    std::vector<double> cps;
    std::vector<double> losses;
    for (std::size_t k = 0; k < pieces.size(); ++k) {
        if (k > 0) cps.push_back(pieces[k].lo);
        losses.push_back(pieces[k].loss);
    }
    return PiecewiseLoss(rho_min, rho_max, std::move(cps), std::move(losses), H);
}

inline void check_range(double lo, double hi) {
    if (!(lo >= 0.0) || !(lo < hi) || !std::isfinite(hi)) throw ConfigError("alpha range must satisfy 0 <= min < max");
}

}  // namespace detail

/// Exact dual loss of UCB(alpha) on a tape over [alpha_min, alpha_max] for horizon T.
/// Loss is average pseudo-regret when true means are given, otherwise realized-reward regret.
inline PiecewiseLoss piecewise_dual_ucb(const RewardTape& tape, const std::optional<std::vector<double>>& true_means,
                                        double alpha_min, double alpha_max, std::size_t horizon) {
    detail::check_range(alpha_min, alpha_max);
    const std::size_t n = tape.n_arms();
    if (n == 0) throw ConfigError("tape has no arms");
    if (horizon < n) throw ConfigError("horizon must be >= number of arms");
    const auto gaps = detail::gaps_of(true_means, n);
    detail::UcbNode root{alpha_min, alpha_max, std::vector<std::size_t>(n, 1), std::vector<double>(n),
                         std::vector<std::size_t>(n, 1), n, n, 0.0, 0.0, detail::npos};
    for (std::size_t i = 0; i < n; ++i) {
        root.sums[i] = tape.at(i, 0);
        root.collected += root.sums[i];
        if (true_means) root.cum_regret += gaps[i];
    }
    if (n == 1) {
        root.pulls[0] = 0;
        root.sums[0] = 0.0;
        root.cursor[0] = 0;
        root.count = root.round = 0;
        root.collected = 0.0;
    }
    detail::UcbDualSetup setup{&tape.per_arm(), std::move(root), horizon, false, true_means ? &gaps : nullptr,
                               true_means ? 0.0 : detail::best_arm_total(tape, horizon)};
    const double H = true_means ? *std::max_element(gaps.begin(), gaps.end()) : 0.0;
    return detail::assemble(detail::ucb_dual_pieces(setup), alpha_min, alpha_max, H);
}

/// Same for UCB with one prior pseudo-pull per arm and no initialization phase.
inline PiecewiseLoss piecewise_dual_ucb_prior(const RewardTape& tape, const std::optional<std::vector<double>>& true_means,
                                              const std::vector<double>& prior, double alpha_min, double alpha_max,
                                              std::size_t horizon) {
    detail::check_range(alpha_min, alpha_max);
    const std::size_t n = tape.n_arms();
    if (n == 0) throw ConfigError("tape has no arms");
    if (prior.size() != n) throw ConfigError("prior length differs from arm count");
    const auto gaps = detail::gaps_of(true_means, n);
    detail::UcbNode root{alpha_min, alpha_max, std::vector<std::size_t>(n, 1), prior,
                         std::vector<std::size_t>(n, 0), n, 0, 0.0, 0.0, detail::npos};
    detail::UcbDualSetup setup{&tape.per_arm(), std::move(root), horizon, false, true_means ? &gaps : nullptr,
                               true_means ? 0.0 : detail::best_arm_total(tape, horizon)};
    const double H = true_means ? *std::max_element(gaps.begin(), gaps.end()) : 0.0;
    return detail::assemble(detail::ucb_dual_pieces(setup), alpha_min, alpha_max, H);
}

}  // namespace bt

#include "bt/parallel.hpp"

namespace bt {

/// The k-th (task, tape) pair of a seeded experiment.
struct TaskSample {
    BanditInstance instance;
    RewardTape tape;
};

inline TaskSample sample_task_tape(const TaskDistribution& dist, std::size_t pulls_per_arm, std::uint64_t seed,
                                   std::size_t k) {
    TaskSample s{sample_task(dist, derive_seed(seed, k, 0x7a51)), {}};
    s.tape = draw_tape(s.instance, pulls_per_arm, derive_seed(seed, k, 0x7a52));
    return s;
}

struct QdEstimate {
    double mean = 0.0;
    double ci95 = 0.0;  // half-width, normal approximation
    std::size_t n_samples = 0;
    std::string family;
    std::size_t T = 0;
    double rho_min = 0.0;
    double rho_max = 1.0;
    std::vector<std::size_t> counts;  // piece count per sample
};

/// Mean number of pieces of the UCB(alpha) dual over (task, tape) draws.
inline QdEstimate estimate_qd(const TaskDistribution& dist, std::size_t horizon, double rho_min, double rho_max,
                              std::size_t num_samples, std::uint64_t seed, std::size_t workers = 1) {
    if (num_samples < 2) throw ConfigError("samples must be >= 2");
    detail::check_range(rho_min, rho_max);
    dist.validate();
    QdEstimate est;
    est.family = dist.name();
    est.T = horizon;
    est.rho_min = rho_min;
    est.rho_max = rho_max;
    est.n_samples = num_samples;
    est.counts = parallel_map(num_samples, workers, [&](std::size_t k) {
        const auto s = sample_task_tape(dist, horizon, seed, k);
        return piecewise_dual_ucb(s.tape, s.instance.true_means, rho_min, rho_max, horizon).pieces();
    });
    double sum = 0.0;
    for (std::size_t c : est.counts) sum += static_cast<double>(c);
    est.mean = sum / static_cast<double>(num_samples);
    double ss = 0.0;
    for (std::size_t c : est.counts) ss += (static_cast<double>(c) - est.mean) * (static_cast<double>(c) - est.mean);
    const double sd = std::sqrt(ss / static_cast<double>(num_samples - 1));
    est.ci95 = 1.959963984540054 * sd / std::sqrt(static_cast<double>(num_samples));
    return est;
}

}  // namespace bt
