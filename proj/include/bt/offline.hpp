#pragma once

// Offline data collection for one task: uniform (every arm T times) and
// piecewise (one UCB run per discovered piece of the alpha dual).

#include "bt/dual.hpp"
#include "bt/env.hpp"
#include "bt/ucb.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace bt {

struct OfflineCollection {
    RewardTape tape;
    std::size_t pieces = 0;   // pieces explored, one UCB run each
    std::size_t total_pulls = 0;  // T_o: tape entries drawn
};

inline OfflineCollection collect_offline_uniform(const BanditInstance& instance, std::size_t horizon,
                                                 std::uint64_t seed) {
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    OfflineCollection out;
    out.tape = draw_tape(instance, horizon, seed);
    out.pieces = 1;
    out.total_pulls = instance.n_arms() * horizon;
    return out;
}

/// Runs UCB at the left end of each piece of [alpha_min, alpha_max] in turn,
/// restarting every T rounds. Each run also finds where its piece ends, using
/// the same crossing rule as the dual recursion, and rewards are drawn only
/// when a run reads past an arm's current tape. Replay at any alpha in the
/// range, endpoints included, stays within the collected tape.
inline OfflineCollection collect_offline_piecewise(const BanditInstance& instance, double alpha_min, double alpha_max,
                                                   std::size_t horizon, std::uint64_t seed) {
    instance.validate();
    detail::check_range(alpha_min, alpha_max);
    const std::size_t n = instance.n_arms();
    if (horizon < n) throw ConfigError("horizon must be >= number of arms");
    std::vector<ArmCoinStream> streams;
    for (std::size_t i = 0; i < n; ++i) streams.emplace_back(seed, i);
    std::vector<std::vector<double>> rewards(n), coins(n);
    auto read = [&](std::size_t arm, std::size_t pull) {
        while (rewards[arm].size() <= pull) {
            const double z = streams[arm].next();
            coins[arm].push_back(z);
            rewards[arm].push_back(instance.arms[arm].quantile(z));
        }
        return rewards[arm][pull];
    };

    OfflineCollection out;
    double lo = alpha_min;
    std::size_t hint = detail::npos;
    std::size_t hint_round = 0;
    for (;;) {
        ++out.pieces;
        detail::UcbNode s{lo, alpha_max, std::vector<std::size_t>(n, 0), std::vector<double>(n, 0.0),
                          std::vector<std::size_t>(n, 0), 0, 0, 0.0, 0.0, detail::npos};
        double hi = alpha_max;
        std::size_t next_hint = detail::npos, next_round = 0;
        for (std::size_t t = 0; t < horizon; ++t) {
            std::size_t l = 0;
            if (t < n) {
                l = t;
            } else if (n > 1) {
                const double logc = std::log(static_cast<double>(s.count));
                l = (hint != detail::npos && t == hint_round) ? hint : detail::incumbent(s, lo, logc);
                const auto [a, arm] = detail::next_crossing(s, l, logc);
                if (arm != detail::npos && a < hi - detail::same_tol(hi)) {
                    hi = a;
                    next_hint = arm;
                    next_round = t;
                }
            }
            const double r = read(l, s.cursor[l]++);
            ++s.pulls[l];
            s.sums[l] += r;
            ++s.count;
        }
        if (!(hi < alpha_max)) break;
        lo = hi;
        hint = next_hint;
        hint_round = next_round;
    }
    // Exactly at a range endpoint a tie can resolve differently from the adjacent
    // piece, and the tuner scores both endpoints, so replay them too. Usually this
    // reads nothing new.
    for (double a : {alpha_min, alpha_max}) {
        UcbState st(n);
        std::vector<std::size_t> cursor(n, 0);
        for (std::size_t t = 0; t < horizon; ++t) {
            const std::size_t arm = st.select(a);
            st.observe(arm, read(arm, cursor[arm]++));
        }
    }
    for (const auto& seq : rewards) out.total_pulls += seq.size();
    out.tape = RewardTape(std::move(rewards), seed, std::move(coins));
    return out;
}

}  // namespace bt
