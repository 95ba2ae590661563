#pragma once

// UCB(alpha) on a reward tape, with and without prior means, plus the run
// record shared by every policy in the library.

#include "bt/env.hpp"
#include "bt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace bt {

/// One realized run of a policy.
struct RunRecord {
    std::vector<std::size_t> choices;       // arm (or grid point) per round, 0-based
    std::vector<double> rewards;            // observed reward per round
    std::vector<double> cum_pseudo_regret;  // empty when true means are unknown
    double param = 0.0;

    std::size_t horizon() const noexcept { return choices.size(); }

    /// Final cumulative pseudo-regret divided by T.
    double average_pseudo_regret() const {
        if (cum_pseudo_regret.empty()) {
            throw ConfigError("run has no pseudo-regret trace (true means unknown)");
        }
        return cum_pseudo_regret.back() / static_cast<double>(cum_pseudo_regret.size());
    }

    double total_reward() const {
        double s = 0.0;
        for (double r : rewards) s += r;
        return s;
    }

    void write_csv(std::ostream& out) const;
};

namespace detail {
inline void append_regret(RunRecord& rec, const std::vector<double>* gaps, std::size_t arm) {
    if (!gaps) return;
    const double prev = rec.cum_pseudo_regret.empty() ? 0.0 : rec.cum_pseudo_regret.back();
    rec.cum_pseudo_regret.push_back(prev + (*gaps)[arm]);
}
}  // namespace detail

/// Width term sqrt(alpha * ln(count) / pulls) added to the mean, where count
/// is the number of observations so far (sum of pulls).
inline double ucb_index(double mean, std::size_t pulls, std::size_t round, double alpha) {
    if (pulls < 1) throw DomainError("ucb_index: pulls must be >= 1");
    if (round < 2) throw DomainError("ucb_index: round must be >= 2");
    if (!(alpha >= 0.0)) throw DomainError("ucb_index: alpha must be >= 0");
    return mean + std::sqrt(alpha * std::log(static_cast<double>(round)) / static_cast<double>(pulls));
}

/// Pull counts and reward sums of a UCB learner. Means are computed as S_i / t_i
/// everywhere so that replays and the critical-point recursion agree bit for bit.
class UcbState {
public:
    explicit UcbState(std::size_t n) : pulls_(n, 0), sums_(n, 0.0) {}

    std::size_t n_arms() const noexcept { return pulls_.size(); }
    std::size_t pulls(std::size_t i) const { return pulls_[i]; }
    double sum(std::size_t i) const { return sums_[i]; }
    double mean(std::size_t i) const { return sums_[i] / static_cast<double>(pulls_[i]); }
    /// Sum of pull counts, including any prior pseudo-pulls.
    std::size_t count() const noexcept { return count_; }
    const std::vector<std::size_t>& pulls() const noexcept { return pulls_; }
    const std::vector<double>& sums() const noexcept { return sums_; }

    void observe(std::size_t arm, double reward) {
        ++pulls_[arm];
        sums_[arm] += reward;
        ++count_;
    }

    /// First arm with zero pulls, or n if every arm has been tried.
    std::size_t first_untried() const {
        for (std::size_t i = 0; i < pulls_.size(); ++i) {
            if (pulls_[i] == 0) return i;
        }
        return pulls_.size();
    }

    /// Argmax of the UCB index; ties go to the lowest index. Untried arms come first.
    std::size_t select(double alpha) const {
        const std::size_t n = pulls_.size();
        if (n == 1) return 0;
        if (const std::size_t u = first_untried(); u < n) return u;
        const double logc = std::log(static_cast<double>(count_));
        std::size_t best = 0;
        double best_v = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            const double v = mean(i) + std::sqrt(alpha * logc / static_cast<double>(pulls_[i]));
            if (v > best_v) {
                best_v = v;
                best = i;
            }
        }
        return best;
    }

private:
    std::vector<std::size_t> pulls_;
    std::vector<double> sums_;
    std::size_t count_ = 0;
};

namespace detail {

inline RunRecord run_ucb_from(UcbState state, const RewardTape& tape, double alpha, std::size_t horizon,
                              const std::optional<std::vector<double>>& true_means) {
    const std::size_t n = tape.n_arms();
    std::vector<double> gaps;
    if (true_means) {
        if (true_means->size() != n) throw ConfigError("true_means length differs from tape arm count");
        const double best = *std::max_element(true_means->begin(), true_means->end());
        for (double m : *true_means) gaps.push_back(best - m);
    }
    RunRecord rec;
    rec.param = alpha;
    rec.choices.reserve(horizon);
    rec.rewards.reserve(horizon);
    std::vector<std::size_t> cursor(n, 0);
    for (std::size_t t = 0; t < horizon; ++t) {
        const std::size_t arm = state.select(alpha);
        const double r = tape.at(arm, cursor[arm]++);
        state.observe(arm, r);
        rec.choices.push_back(arm);
        rec.rewards.push_back(r);
        detail::append_regret(rec, true_means ? &gaps : nullptr, arm);
    }
    return rec;
}

}  // namespace detail

/// UCB(alpha): each arm once in order, then the argmax index with ties to the lowest arm.
inline RunRecord run_ucb(const RewardTape& tape, double alpha, std::size_t horizon,
                         const std::optional<std::vector<double>>& true_means = std::nullopt) {
    if (tape.n_arms() == 0) throw ConfigError("tape has no arms");
    if (horizon < tape.n_arms()) throw ConfigError("horizon must be >= number of arms");
    if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
    return detail::run_ucb_from(UcbState(tape.n_arms()), tape, alpha, horizon, true_means);
}

/// UCB(alpha) where arm i starts with one pseudo-pull of reward prior[i]; no forced
/// round-robin phase.
inline RunRecord run_ucb_with_prior(const RewardTape& tape, double alpha, const std::vector<double>& prior,
                                    std::size_t horizon,
                                    const std::optional<std::vector<double>>& true_means = std::nullopt) {
    const std::size_t n = tape.n_arms();
    if (n == 0) throw ConfigError("tape has no arms");
    if (prior.size() != n) throw ConfigError("prior length differs from arm count");
    for (double m : prior) {
        if (!(m >= 0.0) || !std::isfinite(m)) throw ConfigError("prior means must be finite and >= 0");
    }
    if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
    UcbState state(n);
    for (std::size_t i = 0; i < n; ++i) state.observe(i, prior[i]);
    return detail::run_ucb_from(std::move(state), tape, alpha, horizon, true_means);
}

namespace detail {
/// Total reward of the best arm over its first T tape entries; arms with fewer
/// entries are extrapolated from their empirical mean.
inline double best_arm_total(const RewardTape& tape, std::size_t T) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < tape.n_arms(); ++i) {
        const auto& seq = tape.arm(i);
        const std::size_t m = std::min(T, seq.size());
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += seq[j];
        if (m < T && m > 0) s *= static_cast<double>(T) / static_cast<double>(m);
        best = std::max(best, s);
    }
    return best;
}
}  // namespace detail

/// Realized-reward regret: best arm's total over the first T tape entries minus
/// the collected total, divided by T.
inline double realized_regret(const RunRecord& rec, const RewardTape& tape) {
    const std::size_t T = rec.horizon();
    return (detail::best_arm_total(tape, T) - rec.total_reward()) / static_cast<double>(T);
}

/// Average pseudo-regret when means are known, otherwise realized-reward regret.
inline double run_loss(const RunRecord& rec, const RewardTape& tape) {
    return rec.cum_pseudo_regret.empty() ? realized_regret(rec, tape) : rec.average_pseudo_regret();
}

inline void RunRecord::write_csv(std::ostream& out) const {
    out << "round,choice,reward,cum_pseudo_regret\n";
    char buf[64];
    for (std::size_t t = 0; t < choices.size(); ++t) {
        out << (t + 1) << ',' << choices[t] << ',';
        std::snprintf(buf, sizeof buf, "%.17g", rewards[t]);
        out << buf << ',';
        if (!cum_pseudo_regret.empty()) {
            std::snprintf(buf, sizeof buf, "%.17g", cum_pseudo_regret[t]);
            out << buf;
        }
        out << '\n';
    }
}

}  // namespace bt
