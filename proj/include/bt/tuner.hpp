#pragma once

// ERM tuners over offline tasks and the sample-size calculator.

#include "bt/dual.hpp"
#include "bt/env.hpp"
#include "bt/errors.hpp"
#include "bt/gp_ucb.hpp"
#include "bt/parallel.hpp"
#include "bt/piecewise.hpp"
#include "bt/ucb.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bt {

/// One offline task: its reward tape and, for synthetic tasks, the true means.
struct OfflineTask {
    std::string id;
    RewardTape tape;
    std::optional<std::vector<double>> true_means;
};

struct TunerResult {
    double param = 0.0;
    std::optional<std::vector<double>> prior;  // set by tune_with_prior
    double objective = 0.0;
    std::size_t candidates = 0;
    std::vector<std::size_t> per_task_pieces;
    std::map<std::string, std::string> config;
};

namespace detail {

/// Candidates: the range endpoints and the midpoint of every piece of the common
/// refinement of all task partitions. Endpoint values come from `at_endpoint`
/// (behaviour exactly at the boundary), interior values from the pieces.
inline TunerResult erm_over_pieces(const std::vector<PiecewiseLoss>& duals, double rho_min, double rho_max,
                                   const std::function<double(std::size_t, double)>& at_endpoint) {
    std::vector<double> cuts;
    for (const auto& d : duals) cuts.insert(cuts.end(), d.critical_points().begin(), d.critical_points().end());
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    std::vector<double> cand{rho_min};
    double prev = rho_min;
    for (double c : cuts) {
        cand.push_back(0.5 * (prev + c));
        prev = c;
    }
    cand.push_back(0.5 * (prev + rho_max));
    cand.push_back(rho_max);

    const double N = static_cast<double>(duals.size());
    TunerResult res;
    res.candidates = cand.size();
    res.objective = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cand.size(); ++c) {
        const bool endpoint = c == 0 || c + 1 == cand.size();
        double sum = 0.0;
        for (std::size_t k = 0; k < duals.size(); ++k) {
            sum += endpoint ? at_endpoint(k, cand[c]) : duals[k].at(cand[c]);
        }
        const double obj = sum / N;
        if (obj < res.objective) {
            res.objective = obj;
            res.param = cand[c];
        }
    }
    for (const auto& d : duals) res.per_task_pieces.push_back(d.pieces());
    return res;
}

inline void check_tasks(const std::vector<OfflineTask>& tasks) {
    if (tasks.empty()) throw ConfigError("at least one offline task is required");
}

}  // namespace detail

/// Loss of UCB(alpha) (or its prior variant) on one offline task, by direct replay.
inline double replay_loss(const OfflineTask& task, double alpha, std::size_t horizon,
                          const std::vector<double>* prior = nullptr) {
    const RunRecord rec = prior ? run_ucb_with_prior(task.tape, alpha, *prior, horizon, task.true_means)
                                : run_ucb(task.tape, alpha, horizon, task.true_means);
    return run_loss(rec, task.tape);
}

/// TunedUCB: exact ERM of the mean dual loss over [alpha_min, alpha_max]; ties go to the smallest alpha.
inline TunerResult tuned_ucb(const std::vector<OfflineTask>& tasks, double alpha_min, double alpha_max,
                             std::size_t horizon, std::size_t workers = 1) {
    detail::check_tasks(tasks);
    detail::check_range(alpha_min, alpha_max);
    const auto duals = parallel_map(tasks.size(), workers, [&](std::size_t k) {
        return piecewise_dual_ucb(tasks[k].tape, tasks[k].true_means, alpha_min, alpha_max, horizon);
    });
    auto res = detail::erm_over_pieces(duals, alpha_min, alpha_max, [&](std::size_t k, double a) {
        return replay_loss(tasks[k], a, horizon);
    });
    res.config = {{"alpha_min", detail::num(alpha_min)}, {"alpha_max", detail::num(alpha_max)},
                  {"T", std::to_string(horizon)}, {"n_tasks", std::to_string(tasks.size())}};
    return res;
}

/// Mean loss at each grid point; argmin with ties to the smallest point.
inline TunerResult grid_erm(const std::function<double(std::size_t, double)>& loss, std::size_t n_tasks,
                            const std::vector<double>& grid, std::size_t workers = 1) {
    if (grid.empty()) throw ConfigError("grid must be nonempty");
    if (n_tasks == 0) throw ConfigError("at least one task is required");
    if (!std::is_sorted(grid.begin(), grid.end())) throw ConfigError("grid must be sorted");
    // Row-major table: values[g * n_tasks + k].
    const auto values = parallel_map(grid.size() * n_tasks, workers, [&](std::size_t idx) {
        const double rho = grid[idx / n_tasks];
        try {
            return loss(idx % n_tasks, rho);
        } catch (const std::exception& e) {
            throw NumericalError("at grid point " + detail::num(rho) + ": " + e.what());
        }
    });
    TunerResult res;
    res.candidates = grid.size();
    res.objective = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double sum = 0.0;
        for (std::size_t k = 0; k < n_tasks; ++k) sum += values[g * n_tasks + k];
        const double obj = sum / static_cast<double>(n_tasks);
        if (obj < res.objective) {
            res.objective = obj;
            res.param = grid[g];
        }
    }
    return res;
}

/// Joint ERM over alpha and a finite grid of prior-mean vectors.
inline TunerResult tune_with_prior(const std::vector<OfflineTask>& tasks, double alpha_min, double alpha_max,
                                   const std::vector<std::vector<double>>& prior_grid, std::size_t horizon,
                                   std::size_t workers = 1) {
    detail::check_tasks(tasks);
    detail::check_range(alpha_min, alpha_max);
    if (prior_grid.empty()) throw ConfigError("prior grid must be nonempty");
    const std::size_t n = tasks.front().tape.n_arms();
    for (const auto& t : tasks) {
        if (t.tape.n_arms() != n) throw ConfigError("all tasks must share the same number of arms");
    }
    for (const auto& p : prior_grid) {
        if (p.size() != n) throw ConfigError("prior vectors must have one entry per arm");
    }
    TunerResult best;
    best.objective = std::numeric_limits<double>::infinity();
    std::size_t total = 0;
    for (const auto& prior : prior_grid) {
        const auto duals = parallel_map(tasks.size(), workers, [&](std::size_t k) {
            return piecewise_dual_ucb_prior(tasks[k].tape, tasks[k].true_means, prior, alpha_min, alpha_max, horizon);
        });
        auto res = detail::erm_over_pieces(duals, alpha_min, alpha_max, [&](std::size_t k, double a) {
            return replay_loss(tasks[k], a, horizon, &prior);
        });
        total += res.candidates;
        if (res.objective < best.objective) {
            best = std::move(res);
            best.prior = prior;
        }
    }
    best.candidates = total;
    best.config = {{"alpha_min", detail::num(alpha_min)}, {"alpha_max", detail::num(alpha_max)},
                   {"T", std::to_string(horizon)}, {"n_tasks", std::to_string(tasks.size())},
                   {"n_priors", std::to_string(prior_grid.size())}};
    return best;
}

/// n points spaced geometrically over [lo, hi].
inline std::vector<double> geometric_grid(double lo, double hi, std::size_t n) {
    if (!(lo > 0.0) || !(lo < hi) || n < 2) throw ConfigError("geometric grid needs 0 < lo < hi and n >= 2");
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
    }
    g.front() = lo;
    g.back() = hi;
    return g;
}

struct GpTask {
    GPInstance instance;
    std::uint64_t seed = 0;
};

enum class GpObjective { Regret, Reward };

struct GpTuneOptions {
    BetaSchedule beta;
    RbfKernel kernel;
    GpObjective objective = GpObjective::Regret;
};

/// Grid ERM of GP-UCB's noise parameter. Loss is mean regret per round, or the
/// negated mean f value of the chosen points when tuning for reward.
inline TunerResult tune_gp_noise(const std::vector<GpTask>& tasks, double s_min, double s_max, std::size_t grid_size,
                                 std::size_t horizon, const GpTuneOptions& opt = {}, std::size_t workers = 1) {
    if (tasks.empty()) throw ConfigError("at least one GP task is required");
    const auto grid = geometric_grid(s_min, s_max, grid_size);
    auto res = grid_erm(
        [&](std::size_t k, double s) {
            const auto& task = tasks[k];
            const RunRecord rec = run_gpucb(task.instance, s, opt.beta, horizon, task.seed, opt.kernel);
            if (opt.objective == GpObjective::Regret) return rec.cum_pseudo_regret.back() / static_cast<double>(horizon);
            double sum = 0.0;
            for (std::size_t c : rec.choices) sum += task.instance.f[c];
            return -sum / static_cast<double>(horizon);
        },
        tasks.size(), grid, workers);
    res.config = {{"s_min", detail::num(s_min)}, {"s_max", detail::num(s_max)},
                  {"grid_size", std::to_string(grid_size)}, {"T", std::to_string(horizon)},
                  {"objective", opt.objective == GpObjective::Regret ? "regret" : "reward"}};
    return res;
}

struct SampleBudget {
    double epsilon, delta, H, log_Qd;
    double leading;           // 4 (H/eps)^2 (log_Qd + ln(1/delta)), before rounding
    std::size_t N;            // with the ln N term iterated twice
    std::size_t T_o;          // min(n, Q_D) * T
};

/// Sufficient number of offline tasks and pulls per task; constant 4, labelled sufficient, not tight.
inline SampleBudget sample_budget(double epsilon, double delta, double H, double log_Qd, std::size_t n_arms,
                                  std::size_t horizon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0,1)");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
    if (!(H > 0.0)) throw ConfigError("H must be > 0");
    if (!(log_Qd >= 0.0)) throw ConfigError("log_Qd must be >= 0");
    if (n_arms < 1) throw ConfigError("n_arms must be >= 1");
    SampleBudget b{epsilon, delta, H, log_Qd, 0.0, 0, 0};
    const double scale = 4.0 * (H / epsilon) * (H / epsilon);
    const double base = log_Qd + std::log(1.0 / delta);
    b.leading = scale * base;
    double N = b.leading;
    for (int it = 0; it < 2; ++it) N = scale * (base + std::log(std::max(N, 1.0)));
    b.N = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(N)));
    const double q = std::min(static_cast<double>(n_arms), std::exp(log_Qd));
    b.T_o = static_cast<std::size_t>(std::ceil(q * static_cast<double>(horizon)));
    return b;
}

}  // namespace bt
