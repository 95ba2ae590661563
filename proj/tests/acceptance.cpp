// Acceptance checks, one per criterion. Usage: acceptance <1..12>
// Prints one PASS/FAIL line and exits 0 on pass, 1 on fail. Tolerances are fixed below.

#include "bt/analysis.hpp"
#include "bt/dual.hpp"
#include "bt/gp_ucb.hpp"
#include "bt/offline.hpp"
#include "bt/tuner.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace bt;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. Q_D reproduction

constexpr double kQdTolerance = 3.0;
constexpr std::size_t kQdSamples = 10000;

Verdict qd_reproduction() {
    const double sigmas[] = {0.1, 0.2, 0.3, 0.5};
    const double published[3][4] = {{28.26, 31.77, 35.93, 40.84}, {20.03, 20.53, 19.79, 19.63}, {32.23, 28.70, 25.30, 22.48}};
    const char* families[] = {"bernoulli", "uniform", "gaussian"};
    bool ok = true;
    std::string detail;
    for (int f = 0; f < 3; ++f) {
        for (int j = 0; j < 4; ++j) {
            const auto dist = TaskDistribution::from_config(families[f], {{"sigma", detail::num(sigmas[j])}});
            const auto q = estimate_qd(dist, 100, 0.0, 1.0, kQdSamples, 1);
            const bool cell = std::abs(q.mean - published[f][j]) <= kQdTolerance;
            ok = ok && cell;
            detail += fmt(" %s(%.1f)=%.2f+-%.2f vs %.2f%s;", families[f], sigmas[j], q.mean, q.ci95, published[f][j],
                          cell ? "" : " X");
        }
    }
    return {ok, detail};
}

// ---------------------------------------------------------------------------
// 2-4. Critical points against a brute-force alpha scan

constexpr std::size_t kScanPoints = 10000;

struct RandomTask {
    BanditInstance instance;
    RewardTape tape;
    std::size_t T;
};

std::vector<RandomTask> random_tasks() {
    std::vector<RandomTask> out;
    auto make = [&](std::size_t n, std::size_t T, std::uint64_t seed) {
        Rng rng(derive_seed(seed, n, 0xacce));
        std::vector<ArmDistribution> arms;
        for (std::size_t i = 0; i < n; ++i) {
            switch (rng.below(3)) {
                case 0: arms.push_back(ArmDistribution::bernoulli(rng.uniform())); break;
                case 1: {
                    const double a = rng.uniform();
                    arms.push_back(ArmDistribution::uniform(a, a + rng.uniform()));
                    break;
                }
                default: arms.push_back(ArmDistribution::gaussian(rng.uniform(), 0.05 + 0.5 * rng.uniform())); break;
            }
        }
        auto inst = BanditInstance::with_means(std::move(arms));
        auto tape = draw_tape(inst, T, seed);
        out.push_back({std::move(inst), std::move(tape), T});
    };
    for (std::uint64_t s = 0; s < 100; ++s) make(2, 50, s);
    for (std::uint64_t s = 0; s < 20; ++s) make(3, 20, 1000 + s);
    return out;
}

Verdict critical_point_equivalence() {
    std::size_t switches = 0, unmatched_switches = 0, cps = 0, unmatched_cps = 0, unresolved = 0, loss_mismatch = 0;
    for (const auto& t : random_tasks()) {
        const auto d = piecewise_dual_ucb(t.tape, t.instance.true_means, 0.0, 1.0, t.T);
        const auto& c = d.critical_points();
        std::vector<double> grid(kScanPoints);
        std::vector<std::vector<std::size_t>> seq(kScanPoints);
        for (std::size_t g = 0; g < kScanPoints; ++g) {
            grid[g] = (static_cast<double>(g) + 0.5) / static_cast<double>(kScanPoints);
            const auto rec = run_ucb(t.tape, grid[g], t.T, t.instance.true_means);
            seq[g] = rec.choices;
            if (d.at(grid[g]) != rec.average_pseudo_regret()) ++loss_mismatch;
        }
        auto in_cell = [&](std::size_t g) {
            return static_cast<std::size_t>(std::count_if(c.begin(), c.end(), [&](double x) {
                return x > grid[g] && x <= grid[g + 1];
            }));
        };
        for (std::size_t g = 0; g + 1 < kScanPoints; ++g) {
            if (seq[g] != seq[g + 1]) {
                ++switches;
                if (in_cell(g) == 0) ++unmatched_switches;
            }
        }
        for (double x : c) {
            ++cps;
            if (x <= grid.front() || x > grid.back()) {
                ++unresolved;
                continue;
            }
            const auto g = static_cast<std::size_t>(std::upper_bound(grid.begin(), grid.end(), x) - grid.begin()) - 1;
            if (in_cell(g) > 1) {
                ++unresolved;  // several switches inside one grid cell
            } else if (seq[g] == seq[g + 1]) {
                ++unmatched_cps;
            }
        }
    }
    const bool ok = unmatched_switches == 0 && unmatched_cps == 0 && loss_mismatch == 0;
    return {ok, fmt(" %zu scan switches (%zu without a critical point), %zu critical points (%zu without a switch, "
                    "%zu below grid resolution), %zu loss mismatches",
                    switches, unmatched_switches, cps, unmatched_cps, unresolved, loss_mismatch)};
}

constexpr int kInteriorProbes = 10;

Verdict piecewise_constancy() {
    std::size_t pieces = 0, bad = 0;
    for (const auto& t : random_tasks()) {
        const auto d = piecewise_dual_ucb(t.tape, t.instance.true_means, 0.0, 1.0, t.T);
        for (std::size_t p = 0; p < d.pieces(); ++p) {
            ++pieces;
            const auto ref = run_ucb(t.tape, d.midpoint(p), t.T).choices;
            for (int j = 1; j <= kInteriorProbes; ++j) {
                const double a = d.lo(p) + (d.hi(p) - d.lo(p)) * j / (kInteriorProbes + 1.0);
                if (run_ucb(t.tape, a, t.T).choices != ref) {
                    ++bad;
                    break;
                }
            }
        }
    }
    return {bad == 0, fmt(" %zu pieces, %zu with a sequence change inside", pieces, bad)};
}

Verdict critical_point_count_bound() {
    std::size_t violations = 0, worst = 0, over_sum = 0;
    double worst_ratio = 0.0;
    for (const auto& t : random_tasks()) {
        const auto d = piecewise_dual_ucb(t.tape, t.instance.true_means, 0.0, 1.0, t.T);
        const double bound = std::pow(static_cast<double>(t.T), static_cast<double>(t.tape.n_arms() - 1));
        const std::size_t k = d.critical_points().size();
        if (static_cast<double>(k) > bound) ++violations;
        // Summing the per-round count (t-1)^(n-1) over rounds gives (T-n)(T-1)^(n-1); reported, not asserted.
        const double n = static_cast<double>(t.tape.n_arms()), T = static_cast<double>(t.T);
        if (static_cast<double>(k) > (T - n) * std::pow(T - 1.0, n - 1.0)) ++over_sum;
        if (static_cast<double>(k) / bound > worst_ratio) {
            worst_ratio = static_cast<double>(k) / bound;
            worst = k;
        }
    }
    return {violations == 0,
            fmt(" %zu instances above T^(n-1); largest count/bound ratio %.3f (%zu points); %zu above (T-n)(T-1)^(n-1)",
                violations, worst_ratio, worst, over_sum)};
}

// ---------------------------------------------------------------------------
// 5. ERM correctness

constexpr double kErmSlack = 1e-12;

Verdict erm_correctness() {
    std::size_t worse = 0, probes = 0;
    for (std::uint64_t b = 0; b < 20; ++b) {
        const TaskDistribution dist{BernoulliFamily{0.1 + 0.02 * static_cast<double>(b), 0.5}};
        std::vector<OfflineTask> tasks;
        for (std::size_t k = 0; k < 10; ++k) {
            auto s = sample_task_tape(dist, 50, 5000 + b, k);
            tasks.push_back({std::to_string(k), std::move(s.tape), s.instance.true_means});
        }
        const auto r = tuned_ucb(tasks, 0.0, 1.0, 50);
        Rng rng(derive_seed(b, 0, 0xe77));
        for (int i = 0; i < 200; ++i) {
            const double a = rng.uniform();
            double sum = 0.0;
            for (const auto& t : tasks) sum += replay_loss(t, a, 50);
            ++probes;
            if (r.objective > sum / 10.0 + kErmSlack) ++worse;
        }
    }
    return {worse == 0, fmt(" %zu of %zu random probes beat the ERM objective", worse, probes)};
}

// ---------------------------------------------------------------------------
// 6. Transfer comparison

Verdict transfer_comparison() {
    const TaskDistribution dist{BernoulliFamily{0.1, 0.7}};
    TransferConfig cfg;  // N_train 200, T_o 20, T 1e4, n_test 5, grid {0.1..100}
    cfg.corral.warn = false;
    const auto tr = transfer_experiment(dist, cfg, 2024);
    auto stats = [](const std::vector<double>& v) {
        const auto [m, se] = detail::mean_stderr(v);
        return std::pair{m, se * std::sqrt(static_cast<double>(v.size()))};
    };
    const auto [mt, st] = stats(tr.final_tuned);
    const auto [mc, sc] = stats(tr.final_corral);
    const auto [ms, ss] = stats(tr.final_corral_stochastic);
    const double pc = std::sqrt((st * st + sc * sc) / 2.0);
    const double ps = std::sqrt((st * st + ss * ss) / 2.0);
    const bool ok = mt < mc - pc && mt < ms - ps;
    return {ok, fmt(" learned alpha %.3g; tuned %.2f (sd %.2f), corral %.2f (sd %.2f, pooled %.2f), "
                    "tsallis %.2f (sd %.2f, pooled %.2f)",
                    tr.tuned.param, mt, st, mc, sc, pc, ms, ss, ps)};
}

// ---------------------------------------------------------------------------
// 7. Generalization trend

Verdict generalization_trend() {
    const TaskDistribution dist{BernoulliFamily{0.1, 0.7}};
    GeneralizationConfig cfg;
    cfg.n_values = {10, 200};
    cfg.trials = 5;
    cfg.T_o = 100;
    cfg.T = 100;
    cfg.n_test = 1000;
    const auto c = generalization_curve(dist, cfg, 77);
    // Unpaired standard error of the difference of the two trial means.
    const double se = std::sqrt(c.stderr_[0] * c.stderr_[0] + c.stderr_[1] * c.stderr_[1]);
    const double gap = c.mean[0] - c.mean[1];
    return {gap > se, fmt(" mean regret N=10 %.5f (se %.5f), N=200 %.5f (se %.5f); gap %.5f vs se %.5f", c.mean[0],
                          c.stderr_[0], c.mean[1], c.stderr_[1], gap, se)};
}

// ---------------------------------------------------------------------------
// 8. GP posterior algebra

constexpr double kGpTolerance = 1e-9;
constexpr double kGpMonotoneSlack = 1e-10;

Verdict gp_algebra() {
    Rng rng(88);
    double worst = 0.0;
    std::size_t rises = 0;
    for (int d = 0; d < 50; ++d) {
        const std::size_t n = 1 + rng.below(30);
        const std::size_t t = 1 + rng.below(10);
        std::vector<Eigen::VectorXd> design;
        for (std::size_t i = 0; i < n; ++i) {
            Eigen::VectorXd p(2);
            p << rng.uniform(-3, 3), rng.uniform(-3, 3);
            design.push_back(p);
        }
        const RbfKernel k{0.3 + 1.5 * rng.uniform()};
        const double s = 1e-3 + rng.uniform();
        GpState st(k, s);
        std::vector<double> prev(n, k(design[0], design[0]));
        for (std::size_t r = 0; r < t; ++r) {
            st.observe(design[rng.below(n)], rng.normal());
            const auto m = static_cast<Eigen::Index>(st.points().size());
            Eigen::MatrixXd G(m, m);
            Eigen::VectorXd y(m);
            for (Eigen::Index i = 0; i < m; ++i) {
                for (Eigen::Index j = 0; j < m; ++j) {
                    G(i, j) = k(st.points()[static_cast<std::size_t>(i)], st.points()[static_cast<std::size_t>(j)]);
                }
                y[i] = st.observations()[static_cast<std::size_t>(i)];
            }
            G += (s + GpState::jitter) * Eigen::MatrixXd::Identity(m, m);
            const Eigen::MatrixXd Ginv = G.fullPivLu().inverse();
            for (std::size_t q = 0; q < n; ++q) {
                Eigen::VectorXd kq(m);
                for (Eigen::Index i = 0; i < m; ++i) kq[i] = k(st.points()[static_cast<std::size_t>(i)], design[q]);
                const double mean = kq.dot(Ginv * y);
                const double var = k(design[q], design[q]) - kq.dot(Ginv * kq);
                const auto p = gp_posterior(st, design[q]);
                worst = std::max({worst, std::abs(p.mean - mean), std::abs(p.variance - var)});
                if (p.variance > prev[q] + kGpMonotoneSlack) ++rises;
                prev[q] = p.variance;
            }
        }
    }
    return {worst <= kGpTolerance && rises == 0,
            fmt(" max deviation from dense inverse %.3g, %zu variance increases", worst, rises)};
}

// ---------------------------------------------------------------------------
// 9. GP-UCB behavioural pieces

constexpr double kGpPublishedPieces = 10.0;
constexpr double kGpPieceCap = 30.0;
constexpr double kGpOrderFactor = 3.0;

Verdict gp_piece_count() {
    const auto inst = GPInstance::grid_2d([](double x, double y) { return std::sin(x) + std::cos(y); }, -3.0, 2.75, 24,
                                          2.0, 4.0, 0.01, "sin x + cos y");
    const BetaSchedule beta{0.1, std::vector<double>(20, 100.0)};
    const auto grid = geometric_grid(1e-3, 1.0, 512);
    bool ok = true;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        std::set<std::vector<std::size_t>> seqs;
        for (double s : grid) seqs.insert(run_gpucb(inst, s, beta, 20, seed, RbfKernel{1.0}).choices);
        const double count = static_cast<double>(seqs.size());
        const bool cell = count <= kGpPieceCap && count <= kGpOrderFactor * kGpPublishedPieces &&
                          count >= kGpPublishedPieces / kGpOrderFactor;
        ok = ok && cell;
        detail += fmt(" seed %llu: %zu sequences;", static_cast<unsigned long long>(seed), seqs.size());
    }
    return {ok, detail};
}

// ---------------------------------------------------------------------------
// 10. Lower-bound calculator

constexpr double kLowerBoundTolerance = 1e-12;

Verdict lower_bound() {
    const double kl = kl_inf_gaussian(1.0, 1.0, 1e6);
    double worst = std::abs(kl - std::log(2.0) / 2.0);
    const std::vector<std::vector<double>> means{{1, 0}, {1, 0.5, 0}, {0.3, 2.0, 1.1, 1.9}};
    const std::vector<std::vector<double>> sds{{1, 1}, {1, 1, 1}, {0.5, 1.2, 0.7, 2.0}};
    for (std::size_t c = 0; c < means.size(); ++c) {
        std::vector<ArmDistribution> arms;
        for (std::size_t i = 0; i < means[c].size(); ++i) arms.push_back(ArmDistribution::gaussian(means[c][i], sds[c][i]));
        const auto rep = lower_bound_constant(BanditInstance::with_means(std::move(arms)), 1e6);
        const double best = *std::max_element(means[c].begin(), means[c].end());
        double total = 0.0;
        for (std::size_t i = 0; i < means[c].size(); ++i) {
            // Long double keeps log(1 + x) accurate for small x without using log1p.
            const long double d = best - means[c][i];
            const long double V = static_cast<long double>(sds[c][i]) * sds[c][i];
            const double term = d > 0 ? static_cast<double>(2.0L * d / std::log(1.0L + d * d / V)) : 0.0;
            total += term;
            worst = std::max(worst, std::abs(rep.terms[i] - term));
        }
        worst = std::max(worst, std::abs(rep.total - total));
    }
    return {worst <= kLowerBoundTolerance, fmt(" kl_inf(1,1) = %.15f, max deviation %.3g", kl, worst)};
}

// ---------------------------------------------------------------------------
// 11. Intra-task policy bound

constexpr double kPolicySlack = 1.05;

Verdict intra_task_bound() {
    bool ok = true;
    std::string detail;
    const std::size_t T = 100, seeds = 500;
    for (double sigma : {0.1, 0.2, 0.3, 0.5}) {
        const TaskDistribution dist{BernoulliFamily{sigma, 0.5}};
        const double qd = estimate_qd(dist, T, 0.0, 1.0, 2000, 11).mean;
        double sum = 0.0;
        for (std::size_t k = 0; k < seeds; ++k) {
            const auto inst = sample_task(dist, derive_seed(k, 0, 0x11));
            sum += static_cast<double>(collect_offline_piecewise(inst, 0.0, 1.0, T, derive_seed(k, 1, 0x11)).total_pulls);
        }
        const double mean = sum / static_cast<double>(seeds);
        const double bound = std::min(2.0, qd) * static_cast<double>(T) * kPolicySlack;
        ok = ok && mean <= bound;
        detail += fmt(" sigma %.1f: T_o %.1f vs %.1f (Q_D %.1f);", sigma, mean, bound, qd);
    }
    return {ok, detail};
}

// ---------------------------------------------------------------------------
// 12. CLI determinism

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Verdict cli_determinism() {
    const std::string bin = BT_CLI_PATH;
    const fs::path root = fs::temp_directory_path() / "bt_acceptance_cli";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::vector<std::pair<std::string, std::string>> commands{
        {"tune", "--seed 3 --n-train 8 --t-offline 30"},
        {"tune-prior", "--seed 3 --n-train 6 --t-offline 30 --prior 0,0 --prior 0.5,0.7"},
        {"tune-gp", "--seed 3 --n-tasks 2 --grid-size 6 --t 8"},
        {"qd", "--seed 3 --t 40 --samples 50"},
        {"regret-curve", "--seed 3 --n-tasks 6 --t 40 --points 9"},
        {"transfer", "--seed 3 --n-train 10 --t 500 --n-test 2"},
        {"generalize", "--seed 3 --n-values 2,5 --trials 2 --t-offline 30 --n-test 5 --t 30"},
        {"lower-bound", "--seed 3 --arms 'gaussian(1,1);gaussian(0.5,1);gaussian(0,1)'"},
        {"collect", "--seed 3 --n-tasks 4 --t 30"},
        {"budget", "--seed 3 --epsilon 0.1 --delta 0.05 --qd 30 --n-arms 2 --t 100"},
    };
    std::size_t differing = 0, failed = 0;
    std::string detail;
    for (const auto& [cmd, args] : commands) {
        std::vector<std::map<std::string, std::string>> runs;
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path dir = root / (cmd + std::to_string(rep));
            const std::string line = bin + " " + cmd + " " + args + " --out " + dir.string() + " > " +
                                     (root / (cmd + std::to_string(rep) + ".stdout")).string() + " 2>/dev/null";
            if (std::system(line.c_str()) != 0) {
                ++failed;
                detail += " " + cmd + " failed;";
                break;
            }
            std::map<std::string, std::string> files;
            files["stdout"] = slurp(root / (cmd + std::to_string(rep) + ".stdout"));
            for (const auto& e : fs::directory_iterator(dir)) {
                if (e.path().filename() != "manifest.json") files[e.path().filename().string()] = slurp(e.path());
            }
            runs.push_back(std::move(files));
        }
        if (runs.size() == 2 && runs[0] != runs[1]) {
            ++differing;
            detail += " " + cmd + " differs;";
        }
    }
    return {differing == 0 && failed == 0,
            fmt(" %zu subcommands, %zu with differing outputs, %zu failed to run;", commands.size(), differing, failed) +
                detail};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"Q_D reproduction", qd_reproduction},
        {"critical points match a brute-force alpha scan", critical_point_equivalence},
        {"sequences constant inside pieces", piecewise_constancy},
        {"critical point count at most T^(n-1)", critical_point_count_bound},
        {"ERM objective no worse than random alphas", erm_correctness},
        {"tuned UCB beats corralling on transfer", transfer_comparison},
        {"test regret falls from N=10 to N=200", generalization_trend},
        {"GP posterior matches dense oracle", gp_algebra},
        {"GP-UCB behavioural piece count", gp_piece_count},
        {"lower-bound calculator", lower_bound},
        {"piecewise collection within min(n, Q_D) T", intra_task_bound},
        {"CLI outputs byte-identical across runs", cli_determinism},
    };
    const int which = argc > 1 ? std::atoi(argv[1]) : 0;
    if (which < 1 || which > static_cast<int>(criteria.size())) {
        std::fprintf(stderr, "usage: acceptance <1..%zu>\n", criteria.size());
        return 2;
    }
    const auto& [name, check] = criteria[static_cast<std::size_t>(which - 1)];
    Verdict v;
    try {
        v = check();
    } catch (const std::exception& e) {
        v = {false, std::string(" error: ") + e.what()};
    }
    std::printf("criterion %d %s: %s:%s\n", which, v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
    return v.pass ? 0 : 1;
}
