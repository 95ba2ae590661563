#pragma once

// Command-line front end. cli_main is callable in-process so tests can drive it.

#include "bt/analysis.hpp"
#include "bt/corral.hpp"
#include "bt/dual.hpp"
#include "bt/env.hpp"
#include "bt/errors.hpp"
#include "bt/gp_ucb.hpp"
#include "bt/io.hpp"
#include "bt/offline.hpp"
#include "bt/parallel.hpp"
#include "bt/tuner.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace bt {

namespace cli {

struct FamilyOptions {
    std::string family = "bernoulli";
    std::optional<double> sigma, center, width_center, var_lo, var_hi, mu1, mu2, sd;
    std::string arms;

    void add(CLI::App* app) {
        app->add_option("--family", family, "bernoulli|uniform|gaussian|gaussian-variance|symmetric-gaussian|custom")
            ->capture_default_str();
        app->add_option("--sigma", sigma, "family spread (standard deviation)");
        app->add_option("--center", center, "Bernoulli family center of p");
        app->add_option("--width-center", width_center, "Uniform family center of the half-width");
        app->add_option("--var-lo", var_lo, "gaussian-variance lower variance");
        app->add_option("--var-hi", var_hi, "gaussian-variance upper variance");
        app->add_option("--mu1", mu1, "symmetric-gaussian first mean");
        app->add_option("--mu2", mu2, "symmetric-gaussian second mean");
        app->add_option("--sd", sd, "symmetric-gaussian standard deviation");
        app->add_option("--arms", arms, "custom instances: arm specs separated by ';', instances by '|'");
    }

    TaskDistribution build() const {
        std::map<std::string, std::string> p;
        auto put = [&p](const char* key, const std::optional<double>& v) {
            if (v) p[key] = detail::num(*v);
        };
        put("sigma", sigma);
        put("center", center);
        put("width_center", width_center);
        put("var_lo", var_lo);
        put("var_hi", var_hi);
        put("mu1", mu1);
        put("mu2", mu2);
        put("sd", sd);
        if (!arms.empty()) p["arms"] = arms;
        return TaskDistribution::from_config(family, p);
    }
};

struct Common {
    std::optional<std::uint64_t> seed;
    std::string out;
    std::size_t workers = 0;

    void add(CLI::App* app) {
        app->add_option("--seed", seed, "random seed (required)");
        app->add_option("--out", out, "output directory for data files and manifest.json");
        app->add_option("--workers", workers, "parallel workers; 0 reads BT_WORKERS, else 1");
    }
    std::size_t threads() const { return workers > 0 ? workers : default_workers(); }
};

/// Effective settings of a parsed subcommand: each option's given value, else its default.
inline std::map<std::string, std::string> effective_config(const CLI::App* sub) {
    std::map<std::string, std::string> cfg;
    for (const CLI::Option* opt : sub->get_options()) {
        const std::string name = opt->get_single_name();
        if (name == "help" || name == "config" || name.empty()) continue;
        std::string value;
        if (opt->count() > 0) {
            for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
        } else {
            value = opt->get_default_str();
        }
        if (!value.empty()) cfg[name] = value;
    }
    return cfg;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

template <class F>
std::string csv_of(F&& write) {
    std::ostringstream s;
    write(s);
    return s.str();
}

struct Outputs {
    std::vector<std::pair<std::string, std::string>> files;  // name, content
    json result;
};

inline std::vector<double> parse_vector(const std::string& text, const char* field) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(cell, &used));
            if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            throw ConfigError(std::string(field) + ": '" + cell + "' is not a number");
        }
    }
    if (v.empty()) throw ConfigError(std::string(field) + ": empty vector");
    return v;
}

inline std::vector<OfflineTask> tasks_from_log(const std::string& path, std::size_t surrogate, std::uint64_t seed) {
    LoadOptions opt;
    if (surrogate > 0) opt.surrogate_horizon = surrogate;
    opt.surrogate_seed = seed;
    std::vector<OfflineTask> tasks;
    for (auto& t : load_tapes(path, opt)) tasks.push_back({t.task_id, std::move(t.tape), std::nullopt});
    return tasks;
}

inline BanditInstance parse_instance(const std::string& arms) {
    if (arms.empty()) throw ConfigError("--arms is required");
    std::vector<ArmDistribution> list;
    std::stringstream ss(arms);
    std::string a;
    while (std::getline(ss, a, ';')) list.push_back(ArmDistribution::parse(a));
    return BanditInstance::with_means(std::move(list), "arms");
}

}  // namespace cli

/// Runs one subcommand. Exit codes: 0 success, 1 runtime failure, 2 invalid usage or configuration.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    using namespace cli;
    CLI::App app{"Bandit hyperparameter transfer: tuning, duals, baselines and analysis"};
    app.name("bt");
    app.set_config("--config", "", "TOML/INI file with the same keys as the flags; flags override it");
    app.require_subcommand(1, 1);

    Common common;
    FamilyOptions fam;
    // Subcommand-local settings. Each subcommand registers what it uses.
    std::size_t n_train = 200, t_offline = 20, horizon = 100, samples = 10000, n_tasks = 100, points = 101;
    std::size_t t_online = 10000, n_test = 5, trials = 5, stride = 0, grid_size = 16, surrogate = 0, n_arms = 2;
    double alpha_min = 0.0, alpha_max = 1.0;
    std::vector<double> grid;
    std::vector<std::string> priors;
    std::vector<std::size_t> n_values{10, 50, 200};
    std::string tapes_path, policy = "piecewise", objective = "regret";
    double phase = 0.0, noise_var = 0.01, s_min = 1e-3, s_max = 1.0, lengthscale = 1.0, beta = 0.0;
    double cap = 1e6, epsilon = 0.1, delta = 0.05, H = 1.0;
    std::optional<double> log_qd, qd;
    bool exact = false;

    std::map<std::string, CLI::App*> subs;
    auto sub = [&](const char* name, const char* help) {
        CLI::App* s = app.add_subcommand(name, help);
        common.add(s);
        subs[name] = s;
        return s;
    };

    {
        auto* s = sub("tune", "learn alpha for UCB from offline tasks (exact piecewise ERM, or a grid)");
        fam.add(s);
        s->add_option("--n-train", n_train, "number of offline tasks")->capture_default_str();
        s->add_option("--t-offline", t_offline, "offline horizon T_o")->capture_default_str();
        s->add_option("--grid", grid, "finite alpha grid; replaces the exact range search")->delimiter(',');
        s->add_option("--tapes", tapes_path, "offline reward log CSV; replaces sampling from the family")
            ->check(CLI::ExistingFile);
        s->add_option("--surrogate-horizon", surrogate, "extend logged arms to this many pulls (0 = off)");
    }
    {
        auto* s = sub("tune-prior", "learn alpha jointly with prior mean vectors");
        fam.add(s);
        s->add_option("--n-train", n_train, "number of offline tasks")->capture_default_str();
        s->add_option("--t-offline", t_offline, "offline horizon T_o")->capture_default_str();
        s->add_option("--prior", priors, "prior mean vector, comma separated; repeatable")->required();
    }
    {
        auto* s = sub("tune-gp", "learn the GP-UCB noise parameter on sin x + cos y tasks over a 24x24 grid");
        s->add_option("--n-tasks", n_tasks, "number of tasks")->capture_default_str();
        s->add_option("--phase", phase, "tasks shift x and y by U(-phase, phase)")->capture_default_str();
        s->add_option("--noise-var", noise_var, "observation noise variance")->capture_default_str();
        s->add_option("--s-min", s_min, "smallest s")->capture_default_str();
        s->add_option("--s-max", s_max, "largest s")->capture_default_str();
        s->add_option("--grid-size", grid_size, "geometric grid size")->capture_default_str();
        s->add_option("--t", horizon, "horizon")->capture_default_str();
        s->add_option("--lengthscale", lengthscale, "RBF length-scale")->capture_default_str();
        s->add_option("--beta", beta, "constant beta; 0 uses the finite-grid schedule")->capture_default_str();
        s->add_option("--objective", objective, "regret|reward")->capture_default_str();
    }
    {
        auto* s = sub("qd", "estimate the mean number of dual pieces");
        fam.add(s);
        s->add_option("--t", horizon, "horizon")->capture_default_str();
        s->add_option("--samples", samples, "number of (task, tape) samples")->capture_default_str();
    }
    {
        auto* s = sub("regret-curve", "mean loss of UCB(alpha) over sampled tasks on an alpha grid");
        fam.add(s);
        s->add_option("--n-tasks", n_tasks, "number of tasks")->capture_default_str();
        s->add_option("--t", horizon, "horizon")->capture_default_str();
        s->add_option("--points", points, "linear grid size over the alpha range")->capture_default_str();
        s->add_option("--grid", grid, "explicit alpha grid; replaces --points")->delimiter(',');
    }
    {
        auto* s = sub("transfer", "tuned UCB versus corralling on fresh tasks");
        fam.add(s);
        s->add_option("--n-train", n_train, "number of offline tasks")->capture_default_str();
        s->add_option("--t-offline", t_offline, "offline horizon T_o")->capture_default_str();
        s->add_option("--t", t_online, "online horizon")->capture_default_str();
        s->add_option("--n-test", n_test, "number of test tasks")->capture_default_str();
        s->add_option("--grid", grid, "alpha grid for tuning and corralling")->delimiter(',');
        s->add_option("--stride", stride, "trace row spacing (0 = about 1000 rows)")->capture_default_str();
        s->add_flag("--exact", exact, "tune over the alpha range exactly instead of the grid");
    }
    {
        auto* s = sub("generalize", "test regret of the learned alpha against the number of training tasks");
        fam.add(s);
        s->add_option("--n-values", n_values, "training-set sizes, ascending")->delimiter(',')->capture_default_str();
        s->add_option("--trials", trials, "independent trials")->capture_default_str();
        s->add_option("--t-offline", t_offline, "offline horizon T_o")->capture_default_str();
        s->add_option("--n-test", n_test, "test tasks per trial")->capture_default_str();
        s->add_option("--t", horizon, "test horizon")->capture_default_str();
    }
    {
        auto* s = sub("lower-bound", "asymptotic regret constant for Gaussian arms");
        s->add_option("--arms", fam.arms, "arm specs separated by ';', e.g. gaussian(1,1);gaussian(0,1)")->required();
        s->add_option("--cap", cap, "reward-support bound B")->capture_default_str();
    }
    {
        auto* s = sub("collect", "collect offline tapes with the uniform or piecewise policy");
        fam.add(s);
        s->add_option("--policy", policy, "uniform|piecewise")->capture_default_str();
        s->add_option("--n-tasks", n_tasks, "number of tasks")->capture_default_str();
        s->add_option("--t", horizon, "horizon")->capture_default_str();
    }
    {
        auto* s = sub("budget", "sufficient offline tasks N and pulls T_o");
        s->add_option("--epsilon", epsilon, "accuracy")->capture_default_str();
        s->add_option("--delta", delta, "failure probability")->capture_default_str();
        s->add_option("--H", H, "loss range")->capture_default_str();
        s->add_option("--log-qd", log_qd, "ln Q_D");
        s->add_option("--qd", qd, "Q_D (used when --log-qd is absent)");
        s->add_option("--n-arms", n_arms, "number of arms")->capture_default_str();
        s->add_option("--t", horizon, "horizon")->capture_default_str();
    }
    // Range flags: the defaults differ per subcommand, so register them after the rest.
    for (const char* name : {"tune", "tune-prior", "qd", "regret-curve", "generalize", "collect"}) {
        subs[name]->add_option("--alpha-min", alpha_min, "lower end of the alpha range")->capture_default_str();
        subs[name]->add_option("--alpha-max", alpha_max, "upper end of the alpha range")->capture_default_str();
    }
    subs["transfer"]->add_option("--alpha-min", alpha_min, "lower end of the alpha range (with --exact)");
    subs["transfer"]->add_option("--alpha-max", alpha_max, "upper end of the alpha range (with --exact)");

    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config") {
            ++i;
            continue;
        }
        if (a.rfind("-", 0) == 0) continue;
        if (!subs.count(a)) {
            err << "error: unknown subcommand '" << a << "'\n" << app.help();
            return 2;
        }
        break;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        if (app.get_subcommands().empty()) err << app.help();
        return 2;
    }

    CLI::App* active = app.get_subcommands().front();
    const std::string cmd = active->get_name();
    if (!common.seed) {
        err << "error: seed required (--seed)\n";
        return 2;
    }
    const std::uint64_t seed = *common.seed;
    const std::size_t workers = common.threads();

    try {
        Outputs o;
        if (cmd == "tune") {
            std::vector<OfflineTask> tasks =
                tapes_path.empty() ? sample_offline_tasks(fam.build(), n_train, t_offline, seed)
                                   : tasks_from_log(tapes_path, surrogate, seed);
            AlphaSearch search{alpha_min, alpha_max, grid};
            std::sort(search.grid.begin(), search.grid.end());
            TunerResult r = search.tune(tasks, t_offline, workers);
            r.config["search"] = grid.empty() ? "range" : "grid";
            o.result = to_json(r);
            o.files.push_back({"tuner.json", dump(o.result)});
        } else if (cmd == "tune-prior") {
            std::vector<std::vector<double>> prior_grid;
            for (const auto& p : priors) prior_grid.push_back(parse_vector(p, "prior"));
            const auto tasks = sample_offline_tasks(fam.build(), n_train, t_offline, seed);
            o.result = to_json(tune_with_prior(tasks, alpha_min, alpha_max, prior_grid, t_offline, workers));
            o.files.push_back({"tuner.json", dump(o.result)});
        } else if (cmd == "tune-gp") {
            if (objective != "regret" && objective != "reward") throw ConfigError("objective must be regret or reward");
            if (!(phase >= 0.0)) throw ConfigError("phase must be >= 0");
            std::vector<GpTask> tasks;
            for (std::size_t k = 0; k < n_tasks; ++k) {
                Rng rng(derive_seed(seed, k, 0x6b7));
                const double u = phase > 0.0 ? rng.uniform(-phase, phase) : 0.0;
                const double v = phase > 0.0 ? rng.uniform(-phase, phase) : 0.0;
                auto fn = [u, v](double x, double y) { return std::sin(x + u) + std::cos(y + v); };
                tasks.push_back({GPInstance::grid_2d(fn, -3.0, 2.75, 24, 2.0, 4.0, noise_var, "sin-cos"),
                                 derive_seed(seed, k, 0x6b8)});
            }
            GpTuneOptions opt;
            opt.kernel.lengthscale = lengthscale;
            if (beta > 0.0) opt.beta.values.assign(horizon, beta);
            opt.objective = objective == "regret" ? GpObjective::Regret : GpObjective::Reward;
            o.result = to_json(tune_gp_noise(tasks, s_min, s_max, grid_size, horizon, opt, workers));
            o.files.push_back({"tuner.json", dump(o.result)});
        } else if (cmd == "qd") {
            const QdEstimate q = estimate_qd(fam.build(), horizon, alpha_min, alpha_max, samples, seed, workers);
            o.result = to_json(q);
            o.files.push_back({"qd.json", dump(o.result)});
            o.files.push_back({"counts.csv", csv_of([&](std::ostream& s) {
                                   s << "sample,pieces\n";
                                   for (std::size_t k = 0; k < q.counts.size(); ++k) s << k << ',' << q.counts[k] << '\n';
                               })});
        } else if (cmd == "regret-curve") {
            auto g = grid.empty() ? linear_grid(alpha_min, alpha_max, points) : grid;
            std::sort(g.begin(), g.end());
            const RegretCurve c = regret_curve(fam.build(), g, n_tasks, horizon, seed, workers);
            const auto best = std::min_element(c.mean.begin(), c.mean.end()) - c.mean.begin();
            o.result = json{{"argmin", c.grid[static_cast<std::size_t>(best)]},
                            {"min_mean_loss", c.mean[static_cast<std::size_t>(best)]},
                            {"n_tasks", c.n_tasks},
                            {"T", c.T}};
            o.files.push_back({"curve.csv", csv_of([&](std::ostream& s) { c.write_csv(s); })});
        } else if (cmd == "transfer") {
            TransferConfig cfg;
            cfg.n_train = n_train;
            cfg.T_o = t_offline;
            cfg.T = t_online;
            cfg.n_test = n_test;
            cfg.stride = stride;
            if (!grid.empty()) {
                std::sort(grid.begin(), grid.end());
                cfg.corral_grid = grid;
                cfg.search.grid = grid;
            }
            if (exact) {
                cfg.search = AlphaSearch{alpha_min, alpha_max, {}};
                if (active->get_option("--alpha-max")->count() == 0) cfg.search.alpha_max = cfg.corral_grid.back();
            }
            // Default transfer family: arm 2 ~ Bernoulli(p), p ~ N(0.7, 0.1^2).
            if (fam.family == "bernoulli" && !fam.center) fam.center = 0.7;
            const auto dist = fam.build();
            const TransferTrace tr = transfer_experiment(dist, cfg, seed, workers);
            auto summary = [](const std::vector<double>& v) {
                const auto [m, se] = detail::mean_stderr(v);
                return json{{"mean", m}, {"sd", se * std::sqrt(static_cast<double>(v.size()))}};
            };
            o.result = json{{"alpha", tr.tuned.param},
                            {"family", dist.name()},
                            {"T", cfg.T},
                            {"final_regret",
                             {{"tuned_ucb", summary(tr.final_tuned)},
                              {"corral", summary(tr.final_corral)},
                              {"corral_stochastic", summary(tr.final_corral_stochastic)}}}};
            o.files.push_back({"trace.csv", csv_of([&](std::ostream& s) { tr.write_csv(s); })});
            o.files.push_back({"tuner.json", dump(to_json(tr.tuned))});
        } else if (cmd == "generalize") {
            GeneralizationConfig cfg;
            cfg.n_values = n_values;
            cfg.trials = trials;
            cfg.T_o = t_offline;
            cfg.search = AlphaSearch{alpha_min, alpha_max, {}};
            cfg.n_test = n_test;
            cfg.T = horizon;
            const GeneralizationCurve c = generalization_curve(fam.build(), cfg, seed, workers);
            o.result = json{{"n_values", c.n_values}, {"mean", c.mean}, {"stderr", c.stderr_}, {"alphas", c.alphas}};
            o.files.push_back({"generalization.csv", csv_of([&](std::ostream& s) { c.write_csv(s); })});
        } else if (cmd == "lower-bound") {
            o.result = to_json(lower_bound_constant(parse_instance(fam.arms), cap));
            o.files.push_back({"lower_bound.json", dump(o.result)});
        } else if (cmd == "collect") {
            if (policy != "uniform" && policy != "piecewise") throw ConfigError("policy must be uniform or piecewise");
            const auto dist = fam.build();
            std::vector<std::pair<std::string, RewardTape>> tapes;
            std::vector<std::size_t> t_o, pieces;
            for (std::size_t k = 0; k < n_tasks; ++k) {
                const BanditInstance inst = sample_task(dist, derive_seed(seed, k, 0xc011));
                const std::uint64_t s = derive_seed(seed, k, 0xc012);
                OfflineCollection c = policy == "uniform" ? collect_offline_uniform(inst, horizon, s)
                                                          : collect_offline_piecewise(inst, alpha_min, alpha_max, horizon, s);
                t_o.push_back(c.total_pulls);
                pieces.push_back(c.pieces);
                tapes.push_back({"task-" + std::to_string(k), std::move(c.tape)});
            }
            double mean = 0.0;
            for (std::size_t v : t_o) mean += static_cast<double>(v);
            mean /= static_cast<double>(std::max<std::size_t>(1, t_o.size()));
            o.result = json{{"policy", policy}, {"T", horizon}, {"mean_T_o", mean}, {"T_o", t_o}, {"pieces", pieces}};
            o.files.push_back({"collect.json", dump(o.result)});
            o.files.push_back({"tapes.csv", csv_of([&](std::ostream& s) { write_tapes_csv(s, tapes); })});
        } else if (cmd == "budget") {
            double lq = 0.0;
            if (log_qd) {
                lq = *log_qd;
            } else if (qd) {
                if (!(*qd >= 1.0)) throw ConfigError("qd must be >= 1");
                lq = std::log(*qd);
            } else {
                throw ConfigError("log-qd or qd is required");
            }
            o.result = to_json(sample_budget(epsilon, delta, H, lq, n_arms, horizon));
            o.files.push_back({"budget.json", dump(o.result)});
        }

        if (!common.out.empty()) {
            const std::filesystem::path dir(common.out);
            std::vector<std::string> names;
            for (const auto& [name, content] : o.files) {
                write_file(dir / name, content);
                names.push_back(name);
            }
            auto cfg = effective_config(active);
            cfg.erase("out");
            cfg.erase("workers");
            write_file(dir / "manifest.json", dump(make_manifest(cmd, cfg, seed, names)));
        }
        out << o.result.dump(2) << "\n";
        return 0;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const UnsupportedModel& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace bt
