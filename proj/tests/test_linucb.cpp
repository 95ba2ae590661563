#include "bt/linucb.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace bt;

namespace {

ContextualInstance random_instance(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    ContextualInstance inst;
    inst.dim = d;
    inst.scale = 0.5;
    inst.noise_sd = 0.1;
    inst.theta_star = Eigen::VectorXd(static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < d; ++k) inst.theta_star[static_cast<Eigen::Index>(k)] = rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXd c(static_cast<Eigen::Index>(d));
        for (std::size_t k = 0; k < d; ++k) c[static_cast<Eigen::Index>(k)] = rng.normal();
        inst.centers.push_back(c);
    }
    return inst;
}

Eigen::VectorXd v1(double x) {
    Eigen::VectorXd v(1);
    v << x;
    return v;
}

}  // namespace

TEST(LinUcbState, ScalarRecursionWithUnitContexts) {
    LinUcbState s(1);
    double sum = 0.0;
    Rng rng(3);
    for (std::size_t t = 1; t <= 30; ++t) {
        const double y = rng.normal(0.4, 1.0);
        sum += y;
        s.update(v1(1.0), y);
        EXPECT_NEAR(s.theta()[0], sum / (1.0 + static_cast<double>(t)), 1e-12);
    }
}

TEST(LinUcbState, SymmetricAndSolved) {
    const auto inst = random_instance(4, 3, 1);
    const auto tape = draw_context_tape(inst, 40, 2);
    LinUcbState s(3);
    for (std::size_t t = 0; t < 40; ++t) {
        s.update(tape.contexts[t][t % 4], tape.noise[t][t % 4] + 1.0);
        EXPECT_LE((s.K() - s.K().transpose()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LE((s.K() * s.theta() - s.b()).norm(), 1e-9);
    }
}

TEST(RunLinUcb, DeterministicInSeed) {
    const auto inst = random_instance(3, 2, 5);
    const auto a = run_linucb(inst, 11, 0.7, 50);
    const auto b = run_linucb(inst, 11, 0.7, 50);
    EXPECT_EQ(a.choices, b.choices);
    EXPECT_EQ(a.rewards, b.rewards);
    for (std::size_t t = 1; t < a.horizon(); ++t) EXPECT_GE(a.cum_pseudo_regret[t], a.cum_pseudo_regret[t - 1]);
}

TEST(LinUcbCriticalPoints, SingleArmOnePiece) {
    const auto inst = random_instance(1, 2, 4);
    const auto tape = draw_context_tape(inst, 20, 4);
    EXPECT_EQ(linucb_critical_points(inst, tape, 0.0, 3.0, 20).pieces(), 1u);
}

TEST(LinUcbCriticalPoints, HandComputedTwoRoundCrossing) {
    // theta* = 0.5, no noise. Round 1: x = (1, 2), arm 2 wins for alpha > 0 and pays 1,
    // so K = 5, b = 2, theta = 0.4. Round 2: x = (1, -2) crosses at
    // alpha = theta (1 - (-2)) / ((2 - 1) / sqrt 5) = 1.2 sqrt 5.
    ContextualInstance inst;
    inst.dim = 1;
    inst.centers = {v1(0.0), v1(0.0)};
    inst.theta_star = v1(0.5);
    inst.noise_sd = 0.0;
    ContextTape tape;
    tape.contexts = {{v1(1.0), v1(2.0)}, {v1(1.0), v1(-2.0)}};
    tape.noise = {{0.0, 0.0}, {0.0, 0.0}};
    const auto d = linucb_critical_points(inst, tape, 0.1, 5.0, 2);
    ASSERT_EQ(d.critical_points().size(), 1u);
    EXPECT_NEAR(d.critical_points()[0], 1.2 * std::sqrt(5.0), 1e-12);
    EXPECT_EQ(run_linucb_on(inst, tape, 2.0, 2).choices, (std::vector<std::size_t>{1, 0}));
    EXPECT_EQ(run_linucb_on(inst, tape, 3.0, 2).choices, (std::vector<std::size_t>{1, 1}));
}

TEST(LinUcbCriticalPoints, PieceLossesMatchGridReplay) {
    for (std::uint64_t s = 0; s < 8; ++s) {
        const auto inst = random_instance(3, 2, 20 + s);
        const auto tape = draw_context_tape(inst, 30, s);
        const auto d = linucb_critical_points(inst, tape, 0.0, 4.0, 30);
        for (int g = 0; g < 500; ++g) {
            const double a = 4.0 * (g + 0.5) / 500.0;
            EXPECT_NEAR(d.at(a), run_linucb_on(inst, tape, a, 30).average_pseudo_regret(), 1e-12) << "alpha " << a;
        }
    }
}

TEST(LinUcbCriticalPoints, IntervalCapIsAResourceError) {
    const auto inst = random_instance(4, 2, 3);
    const auto tape = draw_context_tape(inst, 60, 3);
    EXPECT_THROW(linucb_critical_points(inst, tape, 0.0, 50.0, 60, 2), ResourceError);
}
