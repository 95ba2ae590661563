#pragma once

// Experiment-level computations: Gaussian lower-bound constants, regret curves,
// transfer comparisons against corralling, and generalization curves.

#include "bt/corral.hpp"
#include "bt/dual.hpp"
#include "bt/env.hpp"
#include "bt/errors.hpp"
#include "bt/parallel.hpp"
#include "bt/tuner.hpp"
#include "bt/ucb.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace bt {

// ---------------------------------------------------------------------------
// Lower bound

/// inf KL(N(mu, V) || N(mu + delta, sigma^2)) over sigma <= B.
inline double kl_inf_gaussian(double delta, double V, double B) {
    if (!(V > 0.0)) throw DomainError("kl_inf_gaussian: variance must be > 0");
    if (!(delta >= 0.0)) throw DomainError("kl_inf_gaussian: delta must be >= 0");
    if (!(B > 0.0)) throw DomainError("kl_inf_gaussian: cap B must be > 0");
    if (B * B >= delta * delta + V) return 0.5 * std::log1p(delta * delta / V);
    const double s2 = B * B;
    return 0.5 * std::log(s2 / V) + (V + delta * delta) / (2.0 * s2) - 0.5;
}

struct LowerBoundReport {
    std::vector<double> gaps;
    std::vector<double> variances;
    std::vector<double> terms;    // 2 Delta_i / ln(1 + Delta_i^2 / V_i), 0 for optimal arms
    std::vector<double> kl_inf;   // per arm, at the cap B
    double total = 0.0;
    double B = 0.0;
    bool cap_ok = false;          // B^2 > max_i (Delta_i^2 + V_i)
};

inline LowerBoundReport lower_bound_constant(const BanditInstance& inst, double B) {
    LowerBoundReport rep;
    rep.B = B;
    std::vector<double> mu;
    for (const auto& arm : inst.arms) {
        const auto* g = std::get_if<Gaussian>(&arm.kind());
        if (!g || arm.clip()) throw UnsupportedModel("lower bound requires unclipped Gaussian arms");
        if (!(g->sigma > 0.0)) throw DomainError("lower bound requires positive arm variances");
        mu.push_back(g->mu);
        rep.variances.push_back(g->sigma * g->sigma);
    }
    const double best = *std::max_element(mu.begin(), mu.end());
    double need = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double d = best - mu[i];
        const double V = rep.variances[i];
        rep.gaps.push_back(d);
        need = std::max(need, d * d + V);
        rep.kl_inf.push_back(kl_inf_gaussian(d, V, B));
        const double term = d > 0.0 ? 2.0 * d / std::log1p(d * d / V) : 0.0;
        rep.terms.push_back(term);
        rep.total += term;
    }
    rep.cap_ok = B * B > need;
    return rep;
}

// ---------------------------------------------------------------------------
// Regret curves

struct RegretCurve {
    std::vector<double> grid;
    std::vector<double> mean;
    std::vector<double> stderr_;
    std::size_t n_tasks = 0;
    std::size_t T = 0;

    void write_csv(std::ostream& out) const {
        out << "param,mean_loss,stderr\n";
        char buf[128];
        for (std::size_t g = 0; g < grid.size(); ++g) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", grid[g], mean[g], stderr_[g]);
            out << buf;
        }
    }
};

namespace detail {
inline std::pair<double, double> mean_stderr(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += x;
    const double m = s / n;
    if (v.size() < 2) return {m, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / (n - 1.0) / n)};
}
}  // namespace detail

/// Mean and standard error of the UCB(alpha) loss over N sampled tasks at each grid point.
inline RegretCurve regret_curve(const TaskDistribution& dist, const std::vector<double>& grid, std::size_t n_tasks,
                                std::size_t horizon, std::uint64_t seed, std::size_t workers = 1) {
    if (n_tasks < 2) throw ConfigError("regret curve needs N >= 2 tasks");
    if (grid.empty() || !std::is_sorted(grid.begin(), grid.end())) throw ConfigError("grid must be nonempty and sorted");
    RegretCurve c;
    c.grid = grid;
    c.n_tasks = n_tasks;
    c.T = horizon;
    // losses[k][g]
    const auto losses = parallel_map(n_tasks, workers, [&](std::size_t k) {
        const auto s = sample_task_tape(dist, horizon, seed, k);
        std::vector<double> row;
        for (double a : grid) row.push_back(run_loss(run_ucb(s.tape, a, horizon, s.instance.true_means), s.tape));
        return row;
    });
    for (std::size_t g = 0; g < grid.size(); ++g) {
        std::vector<double> col;
        for (const auto& row : losses) col.push_back(row[g]);
        const auto [m, se] = detail::mean_stderr(col);
        c.mean.push_back(m);
        c.stderr_.push_back(se);
    }
    return c;
}

inline std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
    if (n < 2 || !(lo < hi)) throw ConfigError("linear grid needs lo < hi and n >= 2");
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    g.back() = hi;
    return g;
}

// ---------------------------------------------------------------------------
// Training-task helpers

inline std::vector<OfflineTask> sample_offline_tasks(const TaskDistribution& dist, std::size_t n, std::size_t T_o,
                                                     std::uint64_t seed) {
    std::vector<OfflineTask> tasks;
    tasks.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        auto s = sample_task_tape(dist, T_o, seed, k);
        tasks.push_back({"task-" + std::to_string(k), std::move(s.tape), s.instance.true_means});
    }
    return tasks;
}

/// How the transfer tuner searches alpha: exactly over a range, or over a finite grid.
struct AlphaSearch {
    double alpha_min = 0.0;
    double alpha_max = 1.0;
    std::vector<double> grid;  // nonempty: grid ERM over these values instead

    TunerResult tune(const std::vector<OfflineTask>& tasks, std::size_t T_o, std::size_t workers) const {
        if (grid.empty()) return tuned_ucb(tasks, alpha_min, alpha_max, T_o, workers);
        return grid_erm([&](std::size_t k, double a) { return replay_loss(tasks[k], a, T_o); }, tasks.size(), grid,
                        workers);
    }
};

// ---------------------------------------------------------------------------
// Transfer comparison

inline const std::vector<double>& default_corral_grid() {
    static const std::vector<double> g{0.1, 0.2, 0.5, 1, 2, 5, 10, 20, 50, 100};
    return g;
}

struct TransferConfig {
    std::size_t n_train = 200;
    std::size_t T_o = 20;
    AlphaSearch search{0.0, 100.0, default_corral_grid()};
    std::vector<double> corral_grid = default_corral_grid();
    std::size_t T = 10000;
    std::size_t n_test = 5;
    std::size_t stride = 0;  // rows every `stride` steps in the trace; 0 = about 1000 rows
    CorralOptions corral;
};

struct TransferTrace {
    struct Row {
        std::size_t step;
        std::string method;
        double mean_regret;
        double sd;
    };
    TunerResult tuned;
    std::vector<Row> rows;
    // final cumulative pseudo-regret per test task, by method
    std::vector<double> final_tuned, final_corral, final_corral_stochastic;

    void write_csv(std::ostream& out) const {
        out << "step,method,mean_regret,sd\n";
        char buf[160];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof buf, "%zu,%s,%.17g,%.17g\n", r.step, r.method.c_str(), r.mean_regret, r.sd);
            out << buf;
        }
    }
};

inline TransferTrace transfer_experiment(const TaskDistribution& dist, const TransferConfig& cfg, std::uint64_t seed,
                                         std::size_t workers = 1) {
    if (cfg.n_train < 1 || cfg.n_test < 1 || cfg.T < 1) throw ConfigError("n_train, n_test and T must be >= 1");
    TransferTrace out;
    const auto train = sample_offline_tasks(dist, cfg.n_train, cfg.T_o, derive_seed(seed, 0, 0x7a11));
    out.tuned = cfg.search.tune(train, cfg.T_o, workers);
    const double alpha = out.tuned.param;

    struct TestRuns {
        std::vector<double> ucb, corral, stochastic;
    };
    const auto runs = parallel_map(cfg.n_test, workers, [&](std::size_t j) {
        const std::uint64_t s = derive_seed(seed, j, 0x7e57);
        const BanditInstance inst = sample_task(dist, s);
        TestRuns r;
        r.ucb = run_ucb(draw_tape(inst, cfg.T, derive_seed(s, 0, 1)), alpha, cfg.T, inst.true_means).cum_pseudo_regret;
        r.corral = run_corral(inst, cfg.corral_grid, cfg.T, derive_seed(s, 0, 2), cfg.corral).record.cum_pseudo_regret;
        r.stochastic =
            run_corral_stochastic(inst, cfg.corral_grid, cfg.T, derive_seed(s, 0, 3), cfg.corral).record.cum_pseudo_regret;
        return r;
    });
    const std::size_t stride = cfg.stride > 0 ? cfg.stride : std::max<std::size_t>(1, cfg.T / 1000);
    auto emit = [&](const char* name, auto member) {
        for (std::size_t t = 0; t < cfg.T; ++t) {
            if ((t + 1) % stride != 0 && t + 1 != cfg.T) continue;
            std::vector<double> v;
            for (const auto& r : runs) v.push_back((r.*member)[t]);
            const auto [m, se] = detail::mean_stderr(v);
            const double sd = se * std::sqrt(static_cast<double>(v.size()));
            out.rows.push_back({t + 1, name, m, sd});
        }
    };
    emit("tuned_ucb", &TestRuns::ucb);
    emit("corral", &TestRuns::corral);
    emit("corral_stochastic", &TestRuns::stochastic);
    for (const auto& r : runs) {
        out.final_tuned.push_back(r.ucb.back());
        out.final_corral.push_back(r.corral.back());
        out.final_corral_stochastic.push_back(r.stochastic.back());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Generalization

struct GeneralizationConfig {
    std::vector<std::size_t> n_values{10, 50, 200};
    std::size_t trials = 5;
    std::size_t T_o = 100;
    AlphaSearch search{0.0, 1.0, {}};
    std::size_t n_test = 10;
    std::size_t T = 100;
};

struct GeneralizationCurve {
    std::vector<std::size_t> n_values;
    std::vector<double> mean;      // mean test regret over trials
    std::vector<double> stderr_;
    std::vector<std::vector<double>> per_trial;  // [n index][trial]
    std::vector<std::vector<double>> alphas;     // learned alpha [n index][trial]

    void write_csv(std::ostream& out) const {
        out << "param,mean_loss,stderr\n";
        char buf[128];
        for (std::size_t i = 0; i < n_values.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", n_values[i], mean[i], stderr_[i]);
            out << buf;
        }
    }
};

/// Test regret of UCB(alpha-hat) learned from N training tasks, averaged over trials.
/// Training sets are nested within a trial; the test tasks are shared across N within a trial.
inline GeneralizationCurve generalization_curve(const TaskDistribution& dist, const GeneralizationConfig& cfg,
                                                std::uint64_t seed, std::size_t workers = 1) {
    if (cfg.n_values.empty() || !std::is_sorted(cfg.n_values.begin(), cfg.n_values.end()) || cfg.n_values.front() < 1) {
        throw ConfigError("N values must be sorted ascending and >= 1");
    }
    if (cfg.trials < 1 || cfg.n_test < 1) throw ConfigError("trials and test tasks must be >= 1");
    GeneralizationCurve c;
    c.n_values = cfg.n_values;
    c.per_trial.assign(cfg.n_values.size(), {});
    c.alphas.assign(cfg.n_values.size(), {});
    for (std::size_t r = 0; r < cfg.trials; ++r) {
        const std::uint64_t trial_seed = derive_seed(seed, r, 0x9e11);
        const auto train = sample_offline_tasks(dist, cfg.n_values.back(), cfg.T_o, derive_seed(trial_seed, 0, 1));
        const auto test = sample_offline_tasks(dist, cfg.n_test, cfg.T, derive_seed(trial_seed, 0, 2));
        for (std::size_t i = 0; i < cfg.n_values.size(); ++i) {
            const std::vector<OfflineTask> subset(train.begin(),
                                                  train.begin() + static_cast<std::ptrdiff_t>(cfg.n_values[i]));
            const double alpha = cfg.search.tune(subset, cfg.T_o, workers).param;
            double sum = 0.0;
            for (const auto& t : test) sum += replay_loss(t, alpha, cfg.T);
            c.per_trial[i].push_back(sum / static_cast<double>(test.size()));
            c.alphas[i].push_back(alpha);
        }
    }
    for (const auto& v : c.per_trial) {
        const auto [m, se] = detail::mean_stderr(v);
        c.mean.push_back(m);
        c.stderr_.push_back(se);
    }
    return c;
}

}  // namespace bt
